"""Workbench for measuring high-level semantic fidelity of SR outputs.

Subpackages and modules:

- imgcore: image buffers, PNG/JPEG I/O, resampling, luma conversion
- degrade: seeded blur/resize/noise/JPEG degradation synthesis
- metrics: full-reference PSNR/SSIM/VIF on luma planes
- hlf: embedding-model interchange, interpreter and change scoring
- study: annotation store, trap filtering, aggregation, selection, splits
- correlate: SRCC/PLCC benchmark harness and series I/O
- service: HTTP annotation backend
- cli: command-line front door (``srfid``)
"""

__version__ = "0.1.0"
