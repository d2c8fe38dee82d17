"""Checkpoint export across the interchange boundary.

Walks a registry backbone layer by layer into a GraphIR, serializes it
next to a spec sidecar the scorer can load, and self-checks the graph:
a numpy evaluation of the exported structure must reproduce the torch
forward pass within 1e-4 max-abs on 8 probe inputs before anything is
written to disk.
"""

import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .model import build_backbone
from .onnxio import GraphIR, GraphNode, serialize_model

__all__ = ["ExportError", "model_to_graph", "numpy_forward",
           "export_model", "export_checkpoint"]

_PARITY_TOL = 1e-4
_N_PROBES = 8


class ExportError(RuntimeError):
    """Export failed: unsupported layer, bad checkpoint or parity miss."""


def _conv_node(layer: nn.Conv2d, idx: int, src: str, dst: str, inits: dict) -> GraphNode:
    if layer.dilation != (1, 1) or layer.groups != 1:
        raise ExportError(f"layer {idx}: dilation/groups are not supported")
    ph, pw = layer.padding
    w_name, b_name = f"conv{idx}_w", f"conv{idx}_b"
    inits[w_name] = layer.weight.detach().numpy()
    inputs = [src, w_name]
    if layer.bias is not None:
        inits[b_name] = layer.bias.detach().numpy()
        inputs.append(b_name)
    return GraphNode("Conv", inputs, [dst], f"conv{idx}", {
        "kernel_shape": list(layer.kernel_size),
        "pads": [ph, pw, ph, pw],
        "strides": list(layer.stride),
    })


def model_to_graph(model: nn.Sequential, input_size, embedding_dim: int) -> GraphIR:
    """Translate a registry backbone into the interchange IR."""
    if not isinstance(model, nn.Sequential):
        raise ExportError(f"expected nn.Sequential, got {type(model).__name__}")
    nodes = []
    inits: dict = {}
    src = "image"
    for idx, layer in enumerate(model):
        dst = f"x{idx}"
        if isinstance(layer, nn.Conv2d):
            nodes.append(_conv_node(layer, idx, src, dst, inits))
        elif isinstance(layer, nn.ReLU):
            nodes.append(GraphNode("Relu", [src], [dst], f"relu{idx}"))
        elif isinstance(layer, nn.AdaptiveAvgPool2d):
            size = layer.output_size
            if size not in (1, (1, 1)):
                raise ExportError(f"layer {idx}: only global average pooling exports")
            nodes.append(GraphNode("GlobalAveragePool", [src], [dst], f"gap{idx}"))
        elif isinstance(layer, nn.Flatten):
            nodes.append(GraphNode("Flatten", [src], [dst], f"flatten{idx}",
                                   {"axis": 1}))
        elif isinstance(layer, nn.Linear):
            w_name, b_name = f"fc{idx}_w", f"fc{idx}_b"
            inits[w_name] = layer.weight.detach().numpy()
            inputs = [src, w_name]
            if layer.bias is not None:
                inits[b_name] = layer.bias.detach().numpy()
                inputs.append(b_name)
            nodes.append(GraphNode("Gemm", inputs, [dst], f"fc{idx}",
                                   {"transB": 1}))
        else:
            raise ExportError(f"layer {idx}: {type(layer).__name__} is not exportable")
        src = dst
    if not nodes:
        raise ExportError("model has no layers")
    nodes[-1].outputs = ["embedding"]
    h, w = int(input_size[0]), int(input_size[1])
    return GraphIR(
        name="backbone",
        nodes=nodes,
        initializers=inits,
        input_name="image",
        input_shape=("N", 3, h, w),
        output_name="embedding",
        output_shape=("N", embedding_dim),
    )


# ---------------------------------------------------------------------------
# structural self-check
# ---------------------------------------------------------------------------

def _np_conv(x, w, b, pads, strides):
    ph0, pw0, ph1, pw1 = pads
    sh, sw = strides
    x = np.pad(x, ((0, 0), (0, 0), (ph0, ph1), (pw0, pw1)))
    n, _, h, w_in = x.shape
    m, _, kh, kw = w.shape
    oh = (h - kh) // sh + 1
    ow = (w_in - kw) // sw + 1
    out = np.zeros((n, m, oh, ow), dtype=np.float64)
    for di in range(kh):
        for dj in range(kw):
            tap = x[:, :, di:di + sh * oh:sh, dj:dj + sw * ow:sw]
            out += np.einsum("mc,nchw->nmhw", w[:, :, di, dj], tap)
    if b is not None:
        out += b[None, :, None, None]
    return out


def numpy_forward(ir: GraphIR, batch: np.ndarray) -> np.ndarray:
    """Evaluate the exported graph structure with numpy, in float64."""
    env = {ir.input_name: batch.astype(np.float64)}
    env.update({k: v.astype(np.float64) for k, v in ir.initializers.items()})
    for node in ir.nodes:
        args = [env[name] for name in node.inputs]
        if node.op_type == "Conv":
            bias = args[2] if len(args) > 2 else None
            out = _np_conv(args[0], args[1], bias,
                           node.attrs["pads"], node.attrs["strides"])
        elif node.op_type == "Relu":
            out = np.maximum(args[0], 0.0)
        elif node.op_type == "GlobalAveragePool":
            out = args[0].mean(axis=(2, 3), keepdims=True)
        elif node.op_type == "Flatten":
            out = args[0].reshape(args[0].shape[0], -1)
        elif node.op_type == "Gemm":
            out = args[0] @ args[1].T
            if len(args) > 2:
                out = out + args[2]
        else:
            raise ExportError(f"self-check cannot evaluate {node.op_type}")
        env[node.outputs[0]] = out
    return env[ir.nodes[-1].outputs[0]]


def _parity_check(model: nn.Sequential, ir: GraphIR, input_size, seed: int):
    h, w = int(input_size[0]), int(input_size[1])
    rng = np.random.default_rng(seed)
    probes = rng.standard_normal((_N_PROBES, 3, h, w)).astype(np.float32)
    with torch.no_grad():
        reference = model(torch.from_numpy(probes)).numpy()
    exported = numpy_forward(ir, probes)
    gap = float(np.max(np.abs(exported - reference)))
    if gap > _PARITY_TOL:
        raise ExportError(
            f"exported graph disagrees with the torch forward pass: "
            f"max abs difference {gap:.3e} over {_N_PROBES} probes"
        )


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def export_model(model: nn.Sequential, export_path, input_size,
                 embedding_dim: int, normalization, resize_policy: str = "stretch",
                 probe_seed: int = 0) -> Path:
    """Write <export_path> plus <stem>.spec.json; returns the sidecar path.

    ``normalization`` is {"mean": [...], "std": [...]} on [0, 1] values.
    The sidecar carries fine_tuned=true: scores from this model clamp the
    regressed value instead of assuming the raw pretrained mapping.
    """
    model = model.eval()
    ir = model_to_graph(model, input_size, embedding_dim)
    _parity_check(model, ir, input_size, probe_seed)
    export_path = Path(export_path)
    export_path.parent.mkdir(parents=True, exist_ok=True)
    export_path.write_bytes(serialize_model(ir))
    spec = {
        "model_path": export_path.name,
        "input_size": [int(input_size[0]), int(input_size[1])],
        "normalization": {
            "mean": [float(v) for v in normalization["mean"]],
            "std": [float(v) for v in normalization["std"]],
        },
        "resize_policy": resize_policy,
        "embedding_dim": int(embedding_dim),
        "fine_tuned": True,
    }
    spec_path = export_path.with_name(export_path.stem + ".spec.json")
    spec_path.write_text(json.dumps(spec, indent=2) + "\n", encoding="utf-8")
    return spec_path


def export_checkpoint(checkpoint_path, export_path, probe_seed: int = 0) -> Path:
    """Export a checkpoint written by train(); see export_model."""
    try:
        payload = torch.load(checkpoint_path, map_location="cpu",
                             weights_only=True)
    except Exception as exc:
        raise ExportError(f"cannot read checkpoint {checkpoint_path}: {exc}") from exc
    for key in ("backbone_id", "embedding_dim", "input_size",
                "normalization", "state_dict"):
        if key not in payload:
            raise ExportError(f"checkpoint {checkpoint_path} is missing {key!r}")
    model = build_backbone(payload["backbone_id"], payload["embedding_dim"], seed=0)
    try:
        model.load_state_dict(payload["state_dict"])
    except RuntimeError as exc:
        raise ExportError(f"checkpoint state does not fit "
                          f"{payload['backbone_id']!r}: {exc}") from exc
    return export_model(model, export_path, payload["input_size"],
                        payload["embedding_dim"], payload["normalization"],
                        probe_seed=probe_seed)
