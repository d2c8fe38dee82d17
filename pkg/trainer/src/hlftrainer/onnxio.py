"""Interchange graph serialization.

Writes ModelProto wire bytes directly (the environment's torch build has
no working onnx exporter). Only what the backbone registry needs is
supported: float32 tensors, scalar/int-list/float/string attributes, one
dynamic batch axis. Field numbers follow onnx.proto3.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GraphNode", "GraphIR", "serialize_model"]

_IR_VERSION = 8
_OPSET_VERSION = 17

# AttributeProto.AttributeType values
_AT_FLOAT = 1
_AT_INT = 2
_AT_STRING = 3
_AT_INTS = 7


@dataclass
class GraphNode:
    op_type: str
    inputs: list
    outputs: list
    name: str
    attrs: dict = field(default_factory=dict)


@dataclass
class GraphIR:
    """Serializer-independent description of one embedding graph."""

    name: str
    nodes: list
    initializers: dict  # name -> float32 ndarray
    input_name: str
    input_shape: tuple  # leading "N" batch axis, then ints
    output_name: str
    output_shape: tuple


def _uvarint(value: int) -> bytes:
    if value < 0:
        value += 1 << 64  # two's complement for negative int64
    out = bytearray()
    while True:
        bits = value & 0x7F
        value >>= 7
        if value:
            out.append(bits | 0x80)
        else:
            out.append(bits)
            return bytes(out)


def _key(field_no: int, wire_type: int) -> bytes:
    return _uvarint(field_no << 3 | wire_type)


def _scalar(field_no: int, value: int) -> bytes:
    return _key(field_no, 0) + _uvarint(value)


def _record(field_no: int, payload: bytes) -> bytes:
    return _key(field_no, 2) + _uvarint(len(payload)) + payload


def _string(field_no: int, text: str) -> bytes:
    return _record(field_no, text.encode("utf-8"))


def _fixed32(field_no: int, value: float) -> bytes:
    return _key(field_no, 5) + np.float32(value).tobytes()


def _attribute(name: str, value) -> bytes:
    body = _string(1, name)
    if isinstance(value, bool):
        raise TypeError(f"attribute {name!r}: use int, not bool")
    if isinstance(value, int):
        body += _scalar(3, value) + _scalar(20, _AT_INT)
    elif isinstance(value, float):
        body += _fixed32(2, value) + _scalar(20, _AT_FLOAT)
    elif isinstance(value, str):
        body += _record(4, value.encode("utf-8")) + _scalar(20, _AT_STRING)
    elif isinstance(value, (list, tuple)):
        # packed int64 list
        packed = b"".join(_uvarint(int(v)) for v in value)
        body += _record(8, packed) + _scalar(20, _AT_INTS)
    else:
        raise TypeError(f"attribute {name!r}: unsupported value {type(value).__name__}")
    return _record(5, body)


def _node(node: GraphNode) -> bytes:
    body = b"".join(_string(1, t) for t in node.inputs)
    body += b"".join(_string(2, t) for t in node.outputs)
    body += _string(3, node.name)
    body += _string(4, node.op_type)
    body += b"".join(_attribute(k, v) for k, v in node.attrs.items())
    return _record(1, body)


def _tensor(name: str, array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype=np.float32)
    body = b"".join(_scalar(1, d) for d in array.shape)
    body += _scalar(2, 1)  # data_type FLOAT
    body += _string(8, name)
    body += _record(9, array.tobytes())
    return _record(5, body)


def _value_info(field_no: int, name: str, shape) -> bytes:
    dims = b""
    for d in shape:
        if isinstance(d, str):
            dims += _record(1, _string(2, d))
        else:
            dims += _record(1, _scalar(1, int(d)))
    tensor_type = _scalar(1, 1) + _record(2, dims)  # elem_type FLOAT + shape
    type_proto = _record(1, tensor_type)
    return _record(field_no, _string(1, name) + _record(2, type_proto))


def serialize_model(ir: GraphIR) -> bytes:
    graph = b"".join(_node(n) for n in ir.nodes)
    graph += _string(2, ir.name)
    graph += b"".join(_tensor(k, v) for k, v in ir.initializers.items())
    graph += _value_info(11, ir.input_name, ir.input_shape)
    graph += _value_info(12, ir.output_name, ir.output_shape)
    opset = _record(8, _string(1, "") + _scalar(2, _OPSET_VERSION))
    return _scalar(1, _IR_VERSION) + _record(7, graph) + opset
