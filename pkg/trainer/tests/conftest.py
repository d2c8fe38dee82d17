"""Shared fixtures: the planted-geometry study and the criteria summary."""

import json

import numpy as np
import pytest
from PIL import Image

from hlftrainer.data import to_tensor

PLANTED_SEED = 2024
N_PAIRS = 50
INPUT_SIZE = (16, 16)
NORMALIZATION = {"mean": [0.5, 0.5, 0.5], "std": [0.5, 0.5, 0.5]}


def _planted_target(gt8: np.ndarray, sr8: np.ndarray) -> float:
    # planted geometry: embed an image as the per-channel mean of its
    # normalized pixels, score the pair by (1 - cos)/2
    mean, std = NORMALIZATION["mean"], NORMALIZATION["std"]
    e_gt = to_tensor(gt8, INPUT_SIZE, mean, std).numpy().mean(axis=(1, 2))
    e_sr = to_tensor(sr8, INPUT_SIZE, mean, std).numpy().mean(axis=(1, 2))
    cos = float(np.dot(e_gt, e_sr) / (np.linalg.norm(e_gt) * np.linalg.norm(e_sr)))
    return (1.0 - max(-1.0, min(1.0, cos))) / 2.0


@pytest.fixture(scope="session")
def planted_study(tmp_path_factory):
    """50 synthetic pairs whose scores follow a planted embedding geometry.

    Pair i slides the GT toward its color complement by i/49, so targets
    sweep the full [0, 1] range; every fifth pair is the test split.
    """
    root = tmp_path_factory.mktemp("planted")
    img_dir = root / "img"
    img_dir.mkdir()
    rng = np.random.default_rng(PLANTED_SEED)
    manifest = []
    scores = []
    for i in range(N_PAIRS):
        base = rng.integers(20, 236, (4, 4, 3)).astype(np.float64)
        gt = np.kron(base, np.ones((4, 4, 1)))
        lam = i / (N_PAIRS - 1)
        sr = (1 - lam) * gt + lam * (255.0 - gt)
        gt8 = np.clip(np.round(gt), 0, 255).astype(np.uint8)
        sr8 = np.clip(np.round(sr), 0, 255).astype(np.uint8)
        pid = f"p{i:02d}"
        Image.fromarray(gt8).save(img_dir / f"{pid}_gt.png")
        Image.fromarray(sr8).save(img_dir / f"{pid}_sr.png")
        manifest.append({
            "pair_id": pid,
            "gt_path": f"img/{pid}_gt.png",
            "sr_path": f"img/{pid}_sr.png",
            "model_name": "syn",
            "split": "test" if i % 5 == 4 else "train",
        })
        scores.append({"pair_id": pid, "n_valid": 12,
                       "score": _planted_target(gt8, sr8), "final": True})
    (root / "manifest.jsonl").write_text(
        "".join(json.dumps(m) + "\n" for m in manifest))
    (root / "scores.jsonl").write_text(
        "".join(json.dumps(s) + "\n" for s in scores))
    return root


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for status, label in (("passed", "PASS"), ("failed", "FAIL"),
                          ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if status == "passed" and getattr(rep, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            criterion = name.removeprefix("test_").replace("_", " ")
            rows.append((label, criterion))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for label, criterion in dict.fromkeys(rows):
            terminalreporter.write_line(f"{label}: {criterion}")
