"""Dataset plumbing: manifest/score readers and the image tensor pipeline.

The trainer talks to the study tooling through its JSON-lines file
formats only. Images are decoded with Pillow, resized with the same
centered bicubic (a = -0.5) convention the scorer uses, scaled to [0, 1]
and channel-normalized into NCHW float32 tensors.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

__all__ = [
    "ManifestPair",
    "PairExample",
    "read_manifest",
    "read_scores",
    "load_image_array",
    "resize_bicubic",
    "to_tensor",
    "build_examples",
]


class DataError(ValueError):
    """Malformed manifest, score file or image input."""


@dataclass(frozen=True)
class ManifestPair:
    pair_id: str
    gt_path: str
    sr_path: str
    split: str
    is_trap: bool = False


@dataclass
class PairExample:
    """One training example: preprocessed image pair plus its target."""

    pair_id: str
    gt: torch.Tensor  # (3, H, W) float32
    sr: torch.Tensor
    target: float  # human fidelity score in [0, 1]


def _parse_lines(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} line {lineno}: {exc}") from exc
        if not isinstance(obj, dict):
            raise DataError(f"{path} line {lineno}: expected an object")
        yield lineno, obj


def read_manifest(path) -> list:
    """Parse pair records; duplicates and missing keys are errors."""
    pairs = []
    seen = set()
    for lineno, obj in _parse_lines(path):
        try:
            pair = ManifestPair(
                pair_id=str(obj["pair_id"]),
                gt_path=str(obj["gt_path"]),
                sr_path=str(obj["sr_path"]),
                split=str(obj.get("split") or "unassigned"),
                is_trap=bool(obj.get("is_trap", False)),
            )
        except KeyError as exc:
            raise DataError(f"{path} line {lineno}: missing {exc}") from None
        if pair.pair_id in seen:
            raise DataError(f"{path} line {lineno}: duplicate pair {pair.pair_id!r}")
        seen.add(pair.pair_id)
        pairs.append(pair)
    return pairs


def read_scores(path) -> dict:
    """pair_id -> (score, final). Records without a score are skipped."""
    out = {}
    for lineno, obj in _parse_lines(path):
        if "pair_id" not in obj:
            raise DataError(f"{path} line {lineno}: missing 'pair_id'")
        score = obj.get("score")
        if score is None:
            continue
        score = float(score)
        if not 0.0 <= score <= 1.0 or not math.isfinite(score):
            raise DataError(f"{path} line {lineno}: score {score} outside [0, 1]")
        out[str(obj["pair_id"])] = (score, bool(obj.get("final", False)))
    return out


# ---------------------------------------------------------------------------
# image pipeline
# ---------------------------------------------------------------------------

def load_image_array(path) -> np.ndarray:
    """Decode to (H, W, 3) uint8; grayscale is replicated across channels."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    return arr


def _cubic_weight(t: float) -> float:
    # Keys kernel with a = -0.5
    a = -0.5
    at = abs(t)
    if at <= 1.0:
        return (a + 2.0) * at**3 - (a + 3.0) * at**2 + 1.0
    if at < 2.0:
        return a * at**3 - 5.0 * a * at**2 + 8.0 * a * at - 4.0 * a
    return 0.0


def _axis_taps(n_src: int, n_dst: int):
    # Center-aligned sampling; out-of-range taps clamp to the edge pixel.
    scale = n_src / n_dst
    idx = np.empty((n_dst, 4), dtype=np.int64)
    w = np.empty((n_dst, 4), dtype=np.float64)
    for i in range(n_dst):
        src = (i + 0.5) * scale - 0.5
        base = math.floor(src)
        for k in range(4):
            j = base - 1 + k
            w[i, k] = _cubic_weight(src - j)
            idx[i, k] = min(max(j, 0), n_src - 1)
    return idx, w


def resize_bicubic(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Separable bicubic stretch to (height, width); float64 output."""
    out = arr.astype(np.float64)
    if out.shape[0] != height:
        idx, w = _axis_taps(out.shape[0], height)
        out = np.einsum("dkwc,dk->dwc", out[idx], w)
    if out.shape[1] != width:
        idx, w = _axis_taps(out.shape[1], width)
        out = np.einsum("hdkc,dk->hdc", out[:, idx], w)
    return out


def to_tensor(arr: np.ndarray, input_size, mean, std) -> torch.Tensor:
    """uint8 (H, W, 3) -> normalized float32 (3, H', W') at input_size."""
    h, w = int(input_size[0]), int(input_size[1])
    data = arr.astype(np.float64)
    if data.shape[:2] != (h, w):
        data = resize_bicubic(data, h, w)
    data = data / 255.0
    data = (data - np.asarray(mean, dtype=np.float64)) / np.asarray(std, dtype=np.float64)
    chw = np.transpose(data, (2, 0, 1)).astype(np.float32)
    return torch.from_numpy(chw.copy())


def build_examples(pairs, scores: dict, root, input_size, mean, std,
                   split: str, require_final: bool = True) -> list:
    """Materialize preprocessed examples for one split, sorted by pair_id.

    Trap pairs never train or evaluate. A missing or non-final score for
    a selected pair is an error: the caller asked for data the study has
    not finished producing.
    """
    root = Path(root)
    out = []
    for pair in sorted(pairs, key=lambda p: p.pair_id):
        if pair.is_trap or pair.split != split:
            continue
        entry = scores.get(pair.pair_id)
        if entry is None:
            raise DataError(f"pair {pair.pair_id!r} has no fidelity score")
        score, final = entry
        if require_final and not final:
            raise DataError(f"pair {pair.pair_id!r} score is not final")
        gt = to_tensor(load_image_array(root / pair.gt_path), input_size, mean, std)
        sr = to_tensor(load_image_array(root / pair.sr_path), input_size, mean, std)
        out.append(PairExample(pair.pair_id, gt, sr, score))
    return out
