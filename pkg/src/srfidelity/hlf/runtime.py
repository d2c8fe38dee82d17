"""Feed-forward graph interpreter over numpy, float32 throughout.

Covers the operator set common to exported CNN/MLP image encoders. The
op vocabulary is validated up front at load time so an unsupported
graph fails before any inference call.
"""

import numpy as np

from ..errors import BackendError
from .model import GraphDef, NodeDef

__all__ = ["GraphRunner", "SUPPORTED_OPS"]


def _pair(values, default, n=2):
    vals = tuple(values) if values else (default,) * n
    if len(vals) != n:
        raise BackendError(f"expected {n} values, got {vals}")
    return vals


def _conv_pads(node: NodeDef):
    pads = node.attr_ints("pads", (0, 0, 0, 0))
    if len(pads) != 4:
        raise BackendError(f"Conv/Pool pads must have 4 entries, got {pads}")
    auto_pad = node.attr_s("auto_pad", "NOTSET")
    if auto_pad not in ("", "NOTSET"):
        raise BackendError(f"auto_pad {auto_pad!r} is not supported")
    return pads


def _window_slices(x, kh, kw, sh, sw, dh=1, dw=1):
    # Yield the strided input view aligned with each kernel tap.
    h_out = (x.shape[2] - (kh - 1) * dh - 1) // sh + 1
    w_out = (x.shape[3] - (kw - 1) * dw - 1) // sw + 1
    for i in range(kh):
        for j in range(kw):
            yield i, j, x[
                :,
                :,
                i * dh : i * dh + sh * (h_out - 1) + 1 : sh,
                j * dw : j * dw + sw * (w_out - 1) + 1 : sw,
            ]


def _op_conv(node, inputs):
    x, w = inputs[0], inputs[1]
    b = inputs[2] if len(inputs) > 2 and inputs[2] is not None else None
    if node.attr_i("group", 1) != 1:
        raise BackendError("grouped Conv is not supported")
    sh, sw = _pair(node.attr_ints("strides"), 1)
    dh, dw = _pair(node.attr_ints("dilations"), 1)
    pt, pl, pb, pr = _conv_pads(node)
    if x.ndim != 4 or w.ndim != 4:
        raise BackendError("Conv expects 4-D input and weight")
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    m, c_w, kh, kw = w.shape
    if xp.shape[1] != c_w:
        raise BackendError(
            f"Conv channel mismatch: input {xp.shape[1]}, weight {c_w}"
        )
    out = None
    for i, j, xs in _window_slices(xp, kh, kw, sh, sw, dh, dw):
        term = np.einsum("mc,nchw->nmhw", w[:, :, i, j], xs, optimize=True)
        out = term if out is None else out + term
    out = out.astype(np.float32)
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1).astype(np.float32)
    return out


def _pool_common(node, x, reducer):
    kh, kw = _pair(node.attr_ints("kernel_shape"), None)
    sh, sw = _pair(node.attr_ints("strides"), 1)
    pt, pl, pb, pr = _conv_pads(node)
    pad_value = -np.inf if reducer == "max" else 0.0
    xp = np.pad(
        x, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
        constant_values=pad_value,
    )
    acc = None
    for _, _, xs in _window_slices(xp, kh, kw, sh, sw):
        if reducer == "max":
            acc = xs if acc is None else np.maximum(acc, xs)
        else:
            acc = xs.copy() if acc is None else acc + xs
    if reducer == "avg":
        acc = acc / float(kh * kw)
    return acc.astype(np.float32)


def _op_gemm(node, inputs):
    a, b = inputs[0], inputs[1]
    c = inputs[2] if len(inputs) > 2 and inputs[2] is not None else None
    alpha = node.attr_f("alpha", 1.0)
    beta = node.attr_f("beta", 1.0)
    if node.attr_i("transA", 0):
        a = a.T
    if node.attr_i("transB", 0):
        b = b.T
    out = alpha * (a @ b)
    if c is not None:
        out = out + beta * c
    return out.astype(np.float32)


def _op_reshape(node, inputs):
    data, shape = inputs[0], inputs[1]
    target = []
    for axis, dim in enumerate(np.asarray(shape).reshape(-1).tolist()):
        if dim == 0:
            target.append(data.shape[axis])
        else:
            target.append(int(dim))
    return data.reshape(target)


def _op_batchnorm(node, inputs):
    x, scale, bias, mean, var = inputs[:5]
    eps = node.attr_f("epsilon", 1e-5)
    shape = (1, -1) + (1,) * (x.ndim - 2)
    y = (x - mean.reshape(shape)) / np.sqrt(var.reshape(shape) + eps)
    return (y * scale.reshape(shape) + bias.reshape(shape)).astype(np.float32)


def _axes_arg(node, inputs, position):
    # Axes moved from attribute to input across opset revisions; allow both.
    if len(inputs) > position and inputs[position] is not None:
        return tuple(int(v) for v in np.asarray(inputs[position]).reshape(-1))
    axes = node.attr_ints("axes", ())
    return tuple(int(v) for v in axes) if axes else None


def _op_reduce_mean(node, inputs):
    x = inputs[0]
    axes = _axes_arg(node, inputs, 1)
    keepdims = bool(node.attr_i("keepdims", 1))
    return np.mean(
        x, axis=axes if axes is None else tuple(axes), keepdims=keepdims
    ).astype(np.float32)


def _op_clip(node, inputs):
    x = inputs[0]
    lo = inputs[1] if len(inputs) > 1 and inputs[1] is not None else node.attr_f("min")
    hi = inputs[2] if len(inputs) > 2 and inputs[2] is not None else node.attr_f("max")
    if lo is not None:
        x = np.maximum(x, np.float32(np.asarray(lo).reshape(())))
    if hi is not None:
        x = np.minimum(x, np.float32(np.asarray(hi).reshape(())))
    return x.astype(np.float32)


def _op_unsqueeze(node, inputs):
    x = inputs[0]
    axes = _axes_arg(node, inputs, 1)
    if axes is None:
        raise BackendError("Unsqueeze needs axes")
    out = x
    for axis in sorted(axes):
        out = np.expand_dims(out, axis=axis)
    return out


def _op_squeeze(node, inputs):
    x = inputs[0]
    axes = _axes_arg(node, inputs, 1)
    if axes is None:
        return np.squeeze(x)
    return np.squeeze(x, axis=tuple(axes))


def _op_constant(node, inputs):
    tensor = node.attr_t("value")
    if tensor is None:
        raise BackendError("Constant node without a value tensor")
    return tensor.data


def _op_concat(node, inputs):
    axis = node.attr_i("axis")
    if axis is None:
        raise BackendError("Concat needs an axis")
    return np.concatenate([np.asarray(v) for v in inputs], axis=axis)


def _op_transpose(node, inputs):
    perm = node.attr_ints("perm", ())
    return np.transpose(inputs[0], axes=perm or None)


_BINARY = {
    "Add": np.add,
    "Sub": np.subtract,
    "Mul": np.multiply,
    "Div": np.divide,
}

_OPS = {
    "Conv": _op_conv,
    "Relu": lambda node, inputs: np.maximum(inputs[0], 0.0).astype(np.float32),
    "Sigmoid": lambda node, inputs: (
        1.0 / (1.0 + np.exp(-inputs[0].astype(np.float64)))
    ).astype(np.float32),
    "Tanh": lambda node, inputs: np.tanh(inputs[0]).astype(np.float32),
    "GlobalAveragePool": lambda node, inputs: np.mean(
        inputs[0], axis=(2, 3), keepdims=True
    ).astype(np.float32),
    "MaxPool": lambda node, inputs: _pool_common(node, inputs[0], "max"),
    "AveragePool": lambda node, inputs: _pool_common(node, inputs[0], "avg"),
    "Gemm": _op_gemm,
    "MatMul": lambda node, inputs: (inputs[0] @ inputs[1]).astype(np.float32),
    "Flatten": lambda node, inputs: _flatten(inputs[0], node.attr_i("axis", 1)),
    "Reshape": _op_reshape,
    "Constant": _op_constant,
    "Identity": lambda node, inputs: inputs[0],
    "BatchNormalization": _op_batchnorm,
    "Transpose": _op_transpose,
    "Concat": _op_concat,
    "Unsqueeze": _op_unsqueeze,
    "Squeeze": _op_squeeze,
    "ReduceMean": _op_reduce_mean,
    "Clip": _op_clip,
}

for _name, _fn in _BINARY.items():
    _OPS[_name] = (
        lambda node, inputs, fn=_fn: fn(inputs[0], inputs[1]).astype(np.float32)
    )

SUPPORTED_OPS = frozenset(_OPS)


def _flatten(x, axis):
    lead = 1
    for d in x.shape[:axis]:
        lead *= d
    return x.reshape(lead, -1)


class GraphRunner:
    """Executes a parsed graph on named numpy inputs.

    The operator scan happens at construction, so an unsupported graph is
    rejected before any inference. Instances hold only immutable state
    and scratch values local to each run() call.
    """

    def __init__(self, graph: GraphDef):
        self.graph = graph
        unsupported = sorted(
            {n.op_type for n in graph.nodes if n.op_type not in _OPS}
        )
        if unsupported:
            raise BackendError(
                f"unsupported graph operators: {', '.join(unsupported)}"
            )
        self.input_names = tuple(v.name for v in graph.data_inputs())
        self.output_names = tuple(v.name for v in graph.outputs)
        if not self.output_names:
            raise BackendError("graph declares no outputs")
        self._weights = {
            name: t.data for name, t in graph.initializers.items()
        }

    def run(self, feeds: dict) -> dict:
        """Evaluate the graph; feeds maps input name -> array."""
        missing = [n for n in self.input_names if n not in feeds]
        if missing:
            raise BackendError(f"missing graph inputs: {', '.join(missing)}")
        env = dict(self._weights)
        for name, value in feeds.items():
            arr = np.asarray(value)
            if arr.dtype != np.int64:
                arr = arr.astype(np.float32)
            env[name] = arr
        for node in self.graph.nodes:
            args = []
            for name in node.inputs:
                if name == "":
                    args.append(None)  # optional input left empty
                elif name in env:
                    args.append(env[name])
                else:
                    raise BackendError(
                        f"node {node.name or node.op_type}: input {name!r} "
                        "is not available; graph is not topologically ordered"
                    )
            try:
                result = _OPS[node.op_type](node, args)
            except BackendError:
                raise
            except Exception as exc:
                raise BackendError(
                    f"node {node.name or node.op_type} ({node.op_type}) failed: {exc}"
                ) from exc
            outputs = (
                result if isinstance(result, tuple) else (result,)
            )
            for out_name, value in zip(node.outputs, outputs):
                if out_name:
                    env[out_name] = value
        out = {}
        for name in self.output_names:
            if name not in env:
                raise BackendError(f"graph output {name!r} was never produced")
            out[name] = env[name]
        return out
