"""Reader for the neural-network interchange format used by model files.

Decodes the protobuf wire format directly for the handful of message
types a feed-forward vision graph needs: the model envelope, the graph,
nodes with attributes, tensors (weights) and value-info shape
declarations. Unknown fields are skipped, so files produced by standard
exporters load as long as they stay within the supported tensor types.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelLoadError

__all__ = [
    "ModelDef",
    "GraphDef",
    "NodeDef",
    "AttributeDef",
    "TensorDef",
    "ValueInfoDef",
    "load_model",
    "parse_model",
]

# tensor element types (the interchange enum values)
_DT_FLOAT = 1
_DT_INT32 = 6
_DT_INT64 = 7
_DT_DOUBLE = 11

# attribute type enum values
ATTR_FLOAT = 1
ATTR_INT = 2
ATTR_STRING = 3
ATTR_TENSOR = 4
ATTR_FLOATS = 6
ATTR_INTS = 7


@dataclass(frozen=True)
class TensorDef:
    name: str
    dims: tuple
    data: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class AttributeDef:
    name: str
    type: int = 0
    f: float | None = None
    i: int | None = None
    s: bytes | None = None
    t: TensorDef | None = None
    floats: tuple = ()
    ints: tuple = ()


@dataclass(frozen=True)
class NodeDef:
    op_type: str
    name: str
    inputs: tuple
    outputs: tuple
    attributes: dict = field(default_factory=dict)

    def attr_i(self, name: str, default: int | None = None) -> int | None:
        a = self.attributes.get(name)
        return default if a is None or a.i is None else a.i

    def attr_f(self, name: str, default: float | None = None) -> float | None:
        a = self.attributes.get(name)
        return default if a is None or a.f is None else a.f

    def attr_ints(self, name: str, default=()) -> tuple:
        a = self.attributes.get(name)
        return tuple(default) if a is None else tuple(a.ints)

    def attr_s(self, name: str, default: str = "") -> str:
        a = self.attributes.get(name)
        return default if a is None or a.s is None else a.s.decode("utf-8")

    def attr_t(self, name: str) -> TensorDef | None:
        a = self.attributes.get(name)
        return None if a is None else a.t


@dataclass(frozen=True)
class ValueInfoDef:
    name: str
    elem_type: int = 0
    # dims entries: int for fixed sizes, str for named symbolic axes
    dims: tuple = ()


@dataclass(frozen=True)
class GraphDef:
    name: str
    nodes: tuple
    initializers: dict
    inputs: tuple
    outputs: tuple

    def data_inputs(self) -> tuple:
        """Declared inputs that are not provided by initializers."""
        return tuple(v for v in self.inputs if v.name not in self.initializers)


@dataclass(frozen=True)
class ModelDef:
    ir_version: int
    graph: GraphDef
    opsets: dict


# ---------------------------------------------------------------------------
# wire-format primitives
# ---------------------------------------------------------------------------

class _Cursor:
    __slots__ = ("buf", "pos", "end")

    def __init__(self, buf, pos=0, end=None):
        self.buf = buf
        self.pos = pos
        self.end = len(buf) if end is None else end

    def done(self) -> bool:
        return self.pos >= self.end

    def varint(self) -> int:
        result = 0
        shift = 0
        while True:
            if self.pos >= self.end:
                raise ModelLoadError("truncated varint")
            b = self.buf[self.pos]
            self.pos += 1
            result |= (b & 0x7F) << shift
            if not b & 0x80:
                return result
            shift += 7
            if shift > 63:
                raise ModelLoadError("varint exceeds 64 bits")

    def signed_varint(self) -> int:
        v = self.varint()
        return v - (1 << 64) if v >= (1 << 63) else v

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise ModelLoadError("truncated field payload")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def tag(self):
        key = self.varint()
        return key >> 3, key & 0x7

    def skip(self, wire_type: int):
        if wire_type == 0:
            self.varint()
        elif wire_type == 1:
            self.take(8)
        elif wire_type == 2:
            self.take(self.varint())
        elif wire_type == 5:
            self.take(4)
        else:
            raise ModelLoadError(f"unsupported wire type {wire_type}")

    def sub(self) -> "_Cursor":
        length = self.varint()
        if self.pos + length > self.end:
            raise ModelLoadError("truncated nested message")
        cur = _Cursor(self.buf, self.pos, self.pos + length)
        self.pos += length
        return cur


def _fixed32_float(cur: _Cursor) -> float:
    return struct.unpack("<f", cur.take(4))[0]


def _packed_varints(data: bytes, signed: bool) -> list:
    cur = _Cursor(data)
    out = []
    while not cur.done():
        out.append(cur.signed_varint() if signed else cur.varint())
    return out


# ---------------------------------------------------------------------------
# message parsers
# ---------------------------------------------------------------------------

def _parse_tensor(cur: _Cursor) -> TensorDef:
    dims: list = []
    data_type = 0
    name = ""
    raw = None
    float_data: list = []
    int64_data: list = []
    int32_data: list = []
    double_data: list = []
    while not cur.done():
        f, wt = cur.tag()
        if f == 1:  # dims
            if wt == 2:
                dims.extend(_packed_varints(cur.take(cur.varint()), signed=True))
            else:
                dims.append(cur.signed_varint())
        elif f == 2 and wt == 0:  # data_type
            data_type = cur.varint()
        elif f == 4:  # float_data
            if wt == 2:
                payload = cur.take(cur.varint())
                float_data.extend(
                    struct.unpack(f"<{len(payload) // 4}f", payload)
                )
            else:
                float_data.append(_fixed32_float(cur))
        elif f == 5:  # int32_data
            if wt == 2:
                int32_data.extend(_packed_varints(cur.take(cur.varint()), signed=True))
            else:
                int32_data.append(cur.signed_varint())
        elif f == 7:  # int64_data
            if wt == 2:
                int64_data.extend(_packed_varints(cur.take(cur.varint()), signed=True))
            else:
                int64_data.append(cur.signed_varint())
        elif f == 8 and wt == 2:  # name
            name = cur.take(cur.varint()).decode("utf-8")
        elif f == 9 and wt == 2:  # raw_data
            raw = cur.take(cur.varint())
        elif f == 10:  # double_data
            if wt == 2:
                payload = cur.take(cur.varint())
                double_data.extend(
                    struct.unpack(f"<{len(payload) // 8}d", payload)
                )
            else:
                double_data.append(struct.unpack("<d", cur.take(8))[0])
        else:
            cur.skip(wt)

    shape = tuple(int(d) for d in dims)
    count = 1
    for d in shape:
        count *= d

    if data_type == _DT_FLOAT:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        else:
            arr = np.asarray(float_data, dtype=np.float32)
    elif data_type == _DT_INT64:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<i8").astype(np.int64)
        else:
            arr = np.asarray(int64_data, dtype=np.int64)
    elif data_type == _DT_INT32:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<i4").astype(np.int64)
        else:
            arr = np.asarray(int32_data, dtype=np.int64)
    elif data_type == _DT_DOUBLE:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<f8").astype(np.float32)
        else:
            arr = np.asarray(double_data, dtype=np.float32)
    else:
        raise ModelLoadError(
            f"tensor {name!r} has unsupported element type {data_type}"
        )

    if arr.size != count:
        raise ModelLoadError(
            f"tensor {name!r} carries {arr.size} values for shape {shape}"
        )
    return TensorDef(name=name, dims=shape, data=arr.reshape(shape))


def _parse_attribute(cur: _Cursor) -> AttributeDef:
    name = ""
    atype = 0
    f_val = None
    i_val = None
    s_val = None
    t_val = None
    floats: list = []
    ints: list = []
    while not cur.done():
        f, wt = cur.tag()
        if f == 1 and wt == 2:
            name = cur.take(cur.varint()).decode("utf-8")
        elif f == 2 and wt == 5:
            f_val = _fixed32_float(cur)
        elif f == 3 and wt == 0:
            i_val = cur.signed_varint()
        elif f == 4 and wt == 2:
            s_val = cur.take(cur.varint())
        elif f == 5 and wt == 2:
            t_val = _parse_tensor(cur.sub())
        elif f == 7:  # floats
            if wt == 2:
                payload = cur.take(cur.varint())
                floats.extend(struct.unpack(f"<{len(payload) // 4}f", payload))
            else:
                floats.append(_fixed32_float(cur))
        elif f == 8:  # ints
            if wt == 2:
                ints.extend(_packed_varints(cur.take(cur.varint()), signed=True))
            else:
                ints.append(cur.signed_varint())
        elif f == 20 and wt == 0:
            atype = cur.varint()
        else:
            cur.skip(wt)
    return AttributeDef(
        name=name, type=atype, f=f_val, i=i_val, s=s_val, t=t_val,
        floats=tuple(floats), ints=tuple(ints),
    )


def _parse_node(cur: _Cursor) -> NodeDef:
    inputs: list = []
    outputs: list = []
    name = ""
    op_type = ""
    attributes: dict = {}
    while not cur.done():
        f, wt = cur.tag()
        if f == 1 and wt == 2:
            inputs.append(cur.take(cur.varint()).decode("utf-8"))
        elif f == 2 and wt == 2:
            outputs.append(cur.take(cur.varint()).decode("utf-8"))
        elif f == 3 and wt == 2:
            name = cur.take(cur.varint()).decode("utf-8")
        elif f == 4 and wt == 2:
            op_type = cur.take(cur.varint()).decode("utf-8")
        elif f == 5 and wt == 2:
            attr = _parse_attribute(cur.sub())
            attributes[attr.name] = attr
        else:
            cur.skip(wt)
    if not op_type:
        raise ModelLoadError(f"node {name!r} is missing op_type")
    return NodeDef(
        op_type=op_type, name=name, inputs=tuple(inputs),
        outputs=tuple(outputs), attributes=attributes,
    )


def _parse_shape(cur: _Cursor) -> tuple:
    dims: list = []
    while not cur.done():
        f, wt = cur.tag()
        if f == 1 and wt == 2:
            dim_cur = cur.sub()
            value = None
            while not dim_cur.done():
                df, dwt = dim_cur.tag()
                if df == 1 and dwt == 0:
                    value = dim_cur.signed_varint()
                elif df == 2 and dwt == 2:
                    value = dim_cur.take(dim_cur.varint()).decode("utf-8")
                else:
                    dim_cur.skip(dwt)
            dims.append(value)
        else:
            cur.skip(wt)
    return tuple(dims)


def _parse_value_info(cur: _Cursor) -> ValueInfoDef:
    name = ""
    elem_type = 0
    dims: tuple = ()
    while not cur.done():
        f, wt = cur.tag()
        if f == 1 and wt == 2:
            name = cur.take(cur.varint()).decode("utf-8")
        elif f == 2 and wt == 2:  # TypeProto
            type_cur = cur.sub()
            while not type_cur.done():
                tf, twt = type_cur.tag()
                if tf == 1 and twt == 2:  # tensor_type
                    tensor_cur = type_cur.sub()
                    while not tensor_cur.done():
                        sf, swt = tensor_cur.tag()
                        if sf == 1 and swt == 0:
                            elem_type = tensor_cur.varint()
                        elif sf == 2 and swt == 2:
                            dims = _parse_shape(tensor_cur.sub())
                        else:
                            tensor_cur.skip(swt)
                else:
                    type_cur.skip(twt)
        else:
            cur.skip(wt)
    return ValueInfoDef(name=name, elem_type=elem_type, dims=dims)


def _parse_graph(cur: _Cursor) -> GraphDef:
    nodes: list = []
    name = ""
    initializers: dict = {}
    inputs: list = []
    outputs: list = []
    while not cur.done():
        f, wt = cur.tag()
        if f == 1 and wt == 2:
            nodes.append(_parse_node(cur.sub()))
        elif f == 2 and wt == 2:
            name = cur.take(cur.varint()).decode("utf-8")
        elif f == 5 and wt == 2:
            tensor = _parse_tensor(cur.sub())
            initializers[tensor.name] = tensor
        elif f == 11 and wt == 2:
            inputs.append(_parse_value_info(cur.sub()))
        elif f == 12 and wt == 2:
            outputs.append(_parse_value_info(cur.sub()))
        else:
            cur.skip(wt)
    return GraphDef(
        name=name, nodes=tuple(nodes), initializers=initializers,
        inputs=tuple(inputs), outputs=tuple(outputs),
    )


def parse_model(data: bytes) -> ModelDef:
    """Parse serialized model bytes into a ModelDef."""
    cur = _Cursor(data)
    ir_version = 0
    graph = None
    opsets: dict = {}
    try:
        while not cur.done():
            f, wt = cur.tag()
            if f == 1 and wt == 0:
                ir_version = cur.signed_varint()
            elif f == 7 and wt == 2:
                graph = _parse_graph(cur.sub())
            elif f == 8 and wt == 2:
                op_cur = cur.sub()
                domain = ""
                version = 0
                while not op_cur.done():
                    of, owt = op_cur.tag()
                    if of == 1 and owt == 2:
                        domain = op_cur.take(op_cur.varint()).decode("utf-8")
                    elif of == 2 and owt == 0:
                        version = op_cur.signed_varint()
                    else:
                        op_cur.skip(owt)
                opsets[domain] = version
            else:
                cur.skip(wt)
    except ModelLoadError:
        raise
    except Exception as exc:
        raise ModelLoadError(f"malformed model file: {exc}") from exc
    if graph is None:
        raise ModelLoadError("model file carries no graph")
    return ModelDef(ir_version=ir_version, graph=graph, opsets=opsets)


def load_model(path) -> ModelDef:
    """Read and parse a model file; missing or undecodable → ModelLoadError."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ModelLoadError(f"cannot read model file {path}: {exc}") from exc
    if not data:
        raise ModelLoadError(f"model file {path} is empty")
    return parse_model(data)
