"""Embedding extraction and cosine-based fidelity-change scoring."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    BackendError,
    DegenerateEmbeddingError,
    ModelLoadError,
    ModelSpecError,
)
from ..imgcore import ImageBuffer, resize
from .model import load_model
from .runtime import GraphRunner

__all__ = [
    "EmbeddingModelSpec",
    "Embedding",
    "HlfScore",
    "EmbeddingBackend",
    "load_spec",
    "load_backend",
    "embed",
    "cosine_similarity",
    "regressed_change_score",
    "change_score_from_cosine",
    "hlf_score",
    "batch_score",
]

RESIZE_POLICIES = ("stretch", "center_crop_after_resize")

_SPEC_FIELDS = (
    "model_path",
    "input_size",
    "normalization",
    "resize_policy",
    "embedding_dim",
    "fine_tuned",
)


@dataclass(frozen=True)
class EmbeddingModelSpec:
    """Description of an embedding backbone and its preprocessing."""

    model_path: str
    input_size: tuple  # (height, width)
    mean: tuple  # per-channel, applied after scaling to [0, 1]
    std: tuple
    resize_policy: str
    embedding_dim: int
    fine_tuned: bool = False

    def __post_init__(self):
        h, w = self.input_size
        if h < 1 or w < 1:
            raise ValueError(f"input_size must be positive, got {self.input_size}")
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValueError("mean and std must each have exactly 3 entries")
        if any(s == 0 for s in self.std):
            raise ValueError("std entries must be nonzero")
        if self.resize_policy not in RESIZE_POLICIES:
            raise ValueError(f"unknown resize_policy {self.resize_policy!r}")
        if self.embedding_dim < 1:
            raise ValueError(f"embedding_dim must be >= 1, got {self.embedding_dim}")

    def to_dict(self) -> dict:
        return {
            "model_path": self.model_path,
            "input_size": list(self.input_size),
            "normalization": {"mean": list(self.mean), "std": list(self.std)},
            "resize_policy": self.resize_policy,
            "embedding_dim": self.embedding_dim,
            "fine_tuned": self.fine_tuned,
        }


def load_spec(path) -> EmbeddingModelSpec:
    """Read a `<model>.spec.json` sidecar.

    A relative model_path resolves against the sidecar's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelSpecError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelSpecError(f"spec {path} is not valid JSON: {exc}") from exc
    missing = [f for f in _SPEC_FIELDS if f not in doc]
    if missing:
        raise ModelSpecError(f"spec {path} is missing fields: {', '.join(missing)}")
    norm = doc["normalization"]
    if "mean" not in norm or "std" not in norm:
        raise ModelSpecError(f"spec {path} normalization needs mean and std")
    model_path = Path(doc["model_path"])
    if not model_path.is_absolute():
        model_path = path.parent / model_path
    try:
        return EmbeddingModelSpec(
            model_path=str(model_path),
            input_size=tuple(int(v) for v in doc["input_size"]),
            mean=tuple(float(v) for v in norm["mean"]),
            std=tuple(float(v) for v in norm["std"]),
            resize_policy=doc["resize_policy"],
            embedding_dim=int(doc["embedding_dim"]),
            fine_tuned=bool(doc["fine_tuned"]),
        )
    except (TypeError, ValueError) as exc:
        raise ModelSpecError(f"spec {path} is invalid: {exc}") from exc


@dataclass(frozen=True)
class Embedding:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.isfinite(values).all():
            raise ValueError("embedding has non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class HlfScore:
    pair_id: str
    cosine: float
    change_score: float


class EmbeddingBackend:
    """A loaded graph plus its preprocessing contract.

    Exclusive-use: batch scorers should hold one instance per worker.
    """

    def __init__(self, spec: EmbeddingModelSpec, runner: GraphRunner,
                 input_name: str, output_name: str):
        self.spec = spec
        self.runner = runner
        self.input_name = input_name
        self.output_name = output_name


def load_backend(spec: EmbeddingModelSpec) -> EmbeddingBackend:
    """Load the model file and validate it against the spec.

    Checks: a single image input (rank 4, 3 channels) and a single
    output; static graph dims must match the spec; a zero-image probe
    run must yield exactly embedding_dim values.
    """
    model = load_model(spec.model_path)
    graph = model.graph
    data_inputs = graph.data_inputs()
    if len(data_inputs) != 1:
        raise ModelSpecError(
            f"expected exactly 1 graph input, found {len(data_inputs)}"
        )
    if len(graph.outputs) != 1:
        raise ModelSpecError(
            f"expected exactly 1 graph output, found {len(graph.outputs)}"
        )
    vin = data_inputs[0]
    if vin.dims and len(vin.dims) != 4:
        raise ModelSpecError(
            f"graph input must be rank 4 (NCHW), declared {vin.dims}"
        )
    h, w = spec.input_size
    if vin.dims:
        declared = vin.dims
        for position, expected in ((1, 3), (2, h), (3, w)):
            got = declared[position]
            if isinstance(got, int) and got != expected:
                raise ModelSpecError(
                    f"graph input axis {position} is {got}, spec requires {expected}"
                )
    runner = GraphRunner(graph)

    probe = np.zeros((1, 3, h, w), dtype=np.float32)
    out = runner.run({vin.name: probe})[graph.outputs[0].name]
    flat = np.asarray(out).reshape(-1)
    if flat.size != spec.embedding_dim:
        raise ModelSpecError(
            f"graph produces {flat.size} values, spec declares "
            f"embedding_dim {spec.embedding_dim}"
        )
    return EmbeddingBackend(
        spec=spec, runner=runner,
        input_name=vin.name, output_name=graph.outputs[0].name,
    )


def _to_three_channels(img: ImageBuffer) -> np.ndarray:
    arr = img.data
    if img.channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    return arr


def _preprocess(backend: EmbeddingBackend, img: ImageBuffer) -> np.ndarray:
    spec = backend.spec
    h, w = spec.input_size
    rgb = ImageBuffer.from_array(_to_three_channels(img))
    if spec.resize_policy == "stretch":
        resized = resize(rgb, w, h, kernel="bicubic")
        arr = resized.data
    else:  # center_crop_after_resize
        scale = max(h / rgb.height, w / rgb.width)
        rw = max(w, int(round(rgb.width * scale)))
        rh = max(h, int(round(rgb.height * scale)))
        resized = resize(rgb, rw, rh, kernel="bicubic")
        top = (rh - h) // 2
        left = (rw - w) // 2
        arr = resized.data[top : top + h, left : left + w, :]
    x = arr.astype(np.float32) / 255.0
    mean = np.asarray(spec.mean, dtype=np.float32)
    std = np.asarray(spec.std, dtype=np.float32)
    x = (x - mean) / std
    return np.transpose(x, (2, 0, 1))[None, :, :, :]  # NCHW


def embed(backend: EmbeddingBackend, img: ImageBuffer) -> Embedding:
    """Run one image through the backbone and return its raw embedding."""
    x = _preprocess(backend, img)
    out = backend.runner.run({backend.input_name: x})[backend.output_name]
    flat = np.asarray(out, dtype=np.float64).reshape(-1)
    if not np.isfinite(flat).all():
        raise BackendError("inference produced non-finite embedding values")
    if not flat.any():
        raise DegenerateEmbeddingError("embedding is all zeros")
    return Embedding(values=flat)


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """dot(a, b) / (|a| |b|), clamped to [-1, 1] against floating drift."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise DegenerateEmbeddingError("cosine undefined for a zero embedding")
    cos = float(np.dot(a.values, b.values)) / (na * nb)
    return min(1.0, max(-1.0, cos))


def regressed_change_score(value: float) -> float:
    """Clamp a regressed change score to [0, 1] (fine-tuned convention)."""
    return min(1.0, max(0.0, float(value)))


def change_score_from_cosine(cosine: float, fine_tuned: bool) -> float:
    """Map cosine similarity to the published change score.

    (1 - cos)/2 orients all scorers the same way: higher = more change.
    Fine-tuned backbones regress the change score directly, so their
    output path additionally clamps to [0, 1].
    """
    raw = (1.0 - cosine) / 2.0
    if fine_tuned:
        return regressed_change_score(raw)
    return raw


def hlf_score(
    backend: EmbeddingBackend, gt: ImageBuffer, sr: ImageBuffer, pair_id: str
) -> HlfScore:
    """Embed both images and score the change between them."""
    try:
        e_gt = embed(backend, gt)
        e_sr = embed(backend, sr)
        cos = cosine_similarity(e_gt, e_sr)
    except (BackendError, DegenerateEmbeddingError, ValueError) as exc:
        raise type(exc)(f"pair {pair_id!r}: {exc}") from exc
    return HlfScore(
        pair_id=pair_id,
        cosine=cos,
        change_score=change_score_from_cosine(cos, backend.spec.fine_tuned),
    )


def batch_score(backend: EmbeddingBackend, items, model_name: str):
    """Score (pair_id, gt, sr) triples; yields JSON-ready records."""
    for pair_id, gt, sr in items:
        score = hlf_score(backend, gt, sr, pair_id)
        yield {
            "pair_id": score.pair_id,
            "cosine": score.cosine,
            "change_score": score.change_score,
            "model_name": model_name,
        }
