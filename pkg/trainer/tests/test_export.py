"""Export path: graph walking, numpy self-check, checkpoint handling."""

import json

import numpy as np
import pytest
import torch
from torch import nn

from hlftrainer.export import (
    ExportError,
    _parity_check,
    export_checkpoint,
    export_model,
    model_to_graph,
    numpy_forward,
)
from hlftrainer.model import build_backbone

NORM = {"mean": [0.5, 0.5, 0.5], "std": [0.5, 0.5, 0.5]}


class TestGraphWalk:
    def test_tiny_structure(self):
        model = build_backbone("tiny", 4, seed=0)
        ir = model_to_graph(model, (16, 16), 4)
        assert [n.op_type for n in ir.nodes] == [
            "Conv", "Relu", "Conv", "Relu", "GlobalAveragePool",
            "Flatten", "Gemm",
        ]
        assert ir.nodes[-1].outputs == ["embedding"]
        assert ir.input_shape == ("N", 3, 16, 16)
        assert ir.output_shape == ("N", 4)
        assert ir.initializers["conv0_w"].shape == (8, 3, 3, 3)
        assert ir.initializers["fc6_w"].shape == (4, 16)

    def test_conv_attrs(self):
        model = build_backbone("tiny", 4, seed=0)
        ir = model_to_graph(model, (16, 16), 4)
        strided = ir.nodes[2]
        assert strided.attrs["strides"] == [2, 2]
        assert strided.attrs["pads"] == [1, 1, 1, 1]
        assert strided.attrs["kernel_shape"] == [3, 3]

    def test_unsupported_layer(self):
        model = nn.Sequential(nn.Conv2d(3, 4, 3), nn.Sigmoid())
        with pytest.raises(ExportError, match="Sigmoid"):
            model_to_graph(model, (8, 8), 4)

    def test_not_sequential(self):
        with pytest.raises(ExportError, match="Sequential"):
            model_to_graph(nn.Linear(4, 4), (8, 8), 4)


class TestNumpyForward:
    @pytest.mark.parametrize("backbone_id", ["tiny", "tiny_deep"])
    def test_matches_torch(self, backbone_id):
        model = build_backbone(backbone_id, 6, seed=9).eval()
        ir = model_to_graph(model, (16, 16), 6)
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 3, 16, 16)).astype(np.float32)
        with torch.no_grad():
            want = model(torch.from_numpy(x)).numpy()
        got = numpy_forward(ir, x)
        np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-5)

    def test_parity_check_catches_mismatch(self):
        model_a = build_backbone("tiny", 4, seed=0).eval()
        model_b = build_backbone("tiny", 4, seed=1).eval()
        ir_b = model_to_graph(model_b, (16, 16), 4)
        with pytest.raises(ExportError, match="disagrees"):
            _parity_check(model_a, ir_b, (16, 16), seed=0)


class TestExportModel:
    def test_writes_model_and_sidecar(self, tmp_path):
        model = build_backbone("tiny", 4, seed=0)
        spec_path = export_model(model, tmp_path / "enc.onnx", (16, 16), 4, NORM)
        assert spec_path == tmp_path / "enc.spec.json"
        spec = json.loads(spec_path.read_text())
        assert spec["model_path"] == "enc.onnx"
        assert spec["embedding_dim"] == 4
        assert spec["fine_tuned"] is True
        assert spec["input_size"] == [16, 16]
        assert (tmp_path / "enc.onnx").stat().st_size > 0


class TestExportCheckpoint:
    def _checkpoint(self, tmp_path, **overrides):
        model = build_backbone("tiny", 4, seed=5)
        payload = {
            "backbone_id": "tiny",
            "embedding_dim": 4,
            "input_size": (16, 16),
            "normalization": NORM,
            "state_dict": model.state_dict(),
        }
        payload.update(overrides)
        path = tmp_path / "ckpt.pt"
        torch.save(payload, path)
        return path

    def test_happy_path(self, tmp_path):
        ckpt = self._checkpoint(tmp_path)
        spec_path = export_checkpoint(ckpt, tmp_path / "out.onnx")
        assert spec_path.exists()
        assert (tmp_path / "out.onnx").exists()

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "bad.pt"
        path.write_bytes(b"this is not a checkpoint")
        with pytest.raises(ExportError, match="cannot read"):
            export_checkpoint(path, tmp_path / "out.onnx")

    def test_missing_key(self, tmp_path):
        ckpt = self._checkpoint(tmp_path)
        payload = torch.load(ckpt, weights_only=True)
        del payload["normalization"]
        torch.save(payload, ckpt)
        with pytest.raises(ExportError, match="normalization"):
            export_checkpoint(ckpt, tmp_path / "out.onnx")

    def test_state_dict_mismatch(self, tmp_path):
        wrong = build_backbone("tiny", 6, seed=5)  # dim 6 vs declared 4
        ckpt = self._checkpoint(tmp_path, state_dict=wrong.state_dict())
        with pytest.raises(ExportError, match="does not fit"):
            export_checkpoint(ckpt, tmp_path / "out.onnx")
