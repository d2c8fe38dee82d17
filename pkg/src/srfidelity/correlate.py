"""Rank and linear correlation of scorer outputs against fidelity scores.

The harness is deliberately self-contained: ranks, Pearson, series
parsing and report rendering are all here, so sign conventions and
tie/infinity handling live in one auditable place.
"""

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping

import numpy as np

from .errors import ConflictError, DegenerateInputError, ParseError

__all__ = [
    "ScoreSeries",
    "MetricRow",
    "MetricReport",
    "srcc",
    "plcc",
    "benchmark",
    "import_external_scores",
    "load_series_auto",
    "report_to_json",
    "render_table",
]

ORIENTATIONS = ("higher_is_better", "lower_is_better")
SERIES_TYPES = ("FR", "NR", "HLF")

# Quality-style series are negated before correlating, so positive SRCC/PLCC
# always mean agreement with fidelity-change scores. Stated in every report.
NEGATION_FOOTER = (
    "higher_is_better series are negated before correlating; positive values "
    "mean agreement with the human fidelity-change scores."
)


@dataclass(frozen=True)
class ScoreSeries:
    """One scorer's outputs keyed by pair id.

    Values are floats; +inf is the carrier for the infinite flag (PSNR of
    identical images). ``series_type`` labels the report row: FR, NR or HLF.
    """

    scorer_name: str
    orientation: str
    entries: dict = field(repr=False)
    series_type: str = "FR"

    def __post_init__(self):
        if not self.scorer_name:
            raise ValueError("scorer_name must be nonempty")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.series_type not in SERIES_TYPES:
            raise ValueError(f"unknown series type {self.series_type!r}")


@dataclass(frozen=True)
class MetricRow:
    scorer_name: str
    srcc: float | None
    plcc: float | None
    n: int
    series_type: str
    error: str | None = None


@dataclass(frozen=True)
class MetricReport:
    rows: tuple
    generated_at: str
    dataset_split: str


# ---------------------------------------------------------------------------
# correlation primitives
# ---------------------------------------------------------------------------

def _as_series(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise ValueError("series contains NaN")
    return arr


def _average_ranks(v: np.ndarray) -> np.ndarray:
    # Fractional ranks: tie groups share the mean of their positions.
    # Infinities compare naturally, so +inf ranks above all finite values.
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    sorted_v = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    mx = x.mean()
    my = y.mean()
    dx = x - mx
    dy = y - my
    sx = math.sqrt(float(np.sum(dx * dx)))
    sy = math.sqrt(float(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInputError("correlation undefined for a constant series")
    r = float(np.sum(dx * dy)) / (sx * sy)
    return min(1.0, max(-1.0, r))


def _check_lengths(x: np.ndarray, y: np.ndarray):
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise ValueError(f"need at least 3 paired values, got {len(x)}")


def srcc(x, y) -> float:
    """Spearman rank correlation with fractional ranks for ties.

    Infinite values are legal and rank at the extremes, tying with each
    other. Raises DegenerateInputError when either series is constant.
    """
    xa = _as_series(x)
    ya = _as_series(y)
    _check_lengths(xa, ya)
    return _pearson(_average_ranks(xa), _average_ranks(ya))


def plcc(x, y) -> float:
    """Pearson product-moment correlation on raw values.

    No logistic remapping is applied. Infinite values are rejected; the
    caller excludes or rank-transforms them first.
    """
    xa = _as_series(x)
    ya = _as_series(y)
    _check_lengths(xa, ya)
    if np.isinf(xa).any() or np.isinf(ya).any():
        raise ValueError("plcc requires finite values; exclude infinities first")
    return _pearson(xa, ya)


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def _score_map(scores) -> dict:
    # Accepts a mapping pair_id -> value, or objects carrying
    # .pair_id/.score (entries without a score are skipped).
    if isinstance(scores, Mapping):
        return {str(k): float(v) for k, v in scores.items()}
    out = {}
    for item in scores:
        if item.score is None:
            continue
        out[item.pair_id] = float(item.score)
    return out


def benchmark(
    scores,
    series_list: Iterable[ScoreSeries],
    split: str = "all",
    split_assignment: Mapping | None = None,
) -> MetricReport:
    """Correlate each series against human fidelity scores.

    ``scores`` is a pair_id -> score mapping (or FidelityScore objects).
    ``split`` restricts pairs via ``split_assignment`` (pair_id -> split
    name); "all" uses every scored pair. higher_is_better series are
    negated first; see NEGATION_FOOTER. A series with insufficient overlap
    or degenerate values yields a row carrying an error instead of raising.
    SRCC uses every common pair; PLCC drops pairs with infinite values.
    """
    if split not in ("train", "test", "all"):
        raise ValueError(f"unknown split {split!r}")
    target = _score_map(scores)
    if split != "all":
        if split_assignment is None:
            raise ValueError("split_assignment is required for a split other than 'all'")
        target = {p: v for p, v in target.items() if split_assignment.get(p) == split}

    rows = []
    for series in series_list:
        common = sorted(set(series.entries) & set(target))
        n = len(common)
        xs = np.array([float(series.entries[p]) for p in common])
        ys = np.array([target[p] for p in common])
        if series.orientation == "higher_is_better":
            xs = -xs
        row_srcc = None
        row_plcc = None
        error = None
        if n < 3:
            error = f"insufficient overlap: {n} common pairs"
        else:
            try:
                row_srcc = srcc(xs, ys)
            except DegenerateInputError as exc:
                error = str(exc)
            finite = np.isfinite(xs)
            if int(finite.sum()) < 3:
                error = error or "fewer than 3 finite values for plcc"
            else:
                try:
                    row_plcc = plcc(xs[finite], ys[finite])
                except DegenerateInputError as exc:
                    error = error or str(exc)
        rows.append(
            MetricRow(
                scorer_name=series.scorer_name,
                srcc=row_srcc,
                plcc=row_plcc,
                n=n,
                series_type=series.series_type,
                error=error,
            )
        )
    return MetricReport(
        rows=tuple(rows),
        generated_at=datetime.now(timezone.utc).isoformat(),
        dataset_split=split,
    )


# ---------------------------------------------------------------------------
# series I/O
# ---------------------------------------------------------------------------

def _parse_json_line(raw: str, lineno: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line=lineno)
    return obj


def _entry_value(obj: dict, lineno: int) -> float:
    if obj.get("infinite"):
        return math.inf
    value = obj.get("value")
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ParseError("'value' must be a number (or infinite: true)", line=lineno)
    return float(value)


def import_external_scores(path) -> ScoreSeries:
    """Read a score file: a header line then one entry per line.

    Header: {"scorer_name": ..., "orientation": ..., "type": optional}.
    Entries: {"pair_id": ..., "value": number} with optional
    "infinite": true. Unknown pair_ids are retained; the benchmark
    intersects with the fidelity scores later.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    stripped = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not stripped:
        raise ParseError("empty score file", line=1)

    lineno, raw = stripped[0]
    header = _parse_json_line(raw, lineno)
    if "scorer_name" not in header or "orientation" not in header:
        raise ParseError("header must carry scorer_name and orientation", line=lineno)
    name = header["scorer_name"]
    orientation = header["orientation"]
    if orientation not in ORIENTATIONS:
        raise ParseError(f"unknown orientation {orientation!r}", line=lineno)
    series_type = header.get("type", "FR")
    if series_type not in SERIES_TYPES:
        raise ParseError(f"unknown type {series_type!r}", line=lineno)

    entries: dict = {}
    for lineno, raw in stripped[1:]:
        obj = _parse_json_line(raw, lineno)
        if "pair_id" not in obj:
            raise ParseError("entry is missing pair_id", line=lineno)
        pair_id = str(obj["pair_id"])
        if pair_id in entries:
            raise ConflictError(f"duplicate pair_id {pair_id!r}")
        entries[pair_id] = _entry_value(obj, lineno)
    return ScoreSeries(
        scorer_name=name,
        orientation=orientation,
        entries=entries,
        series_type=series_type,
    )


def _series_from_metric_records(records) -> list:
    # Batch metric output: {pair_id, metric, value, infinite} records,
    # possibly several metrics interleaved. All are quality-style FR.
    by_metric: dict = {}
    for lineno, obj in records:
        if obj.get("error"):
            continue  # producer-side record failure: no value to correlate
        metric = obj.get("metric")
        if not metric or "pair_id" not in obj:
            raise ParseError("metric record needs pair_id and metric", line=lineno)
        bucket = by_metric.setdefault(metric, {})
        pair_id = str(obj["pair_id"])
        if pair_id in bucket:
            raise ConflictError(f"duplicate pair_id {pair_id!r} for metric {metric}")
        bucket[pair_id] = _entry_value(obj, lineno)
    return [
        ScoreSeries(scorer_name=m, orientation="higher_is_better",
                    entries=e, series_type="FR")
        for m, e in sorted(by_metric.items())
    ]


def _series_from_hlf_records(records) -> list:
    # Embedding scorer output: {pair_id, cosine, change_score, model_name}.
    # change_score grows with the amount of change, so lower is better.
    by_model: dict = {}
    for lineno, obj in records:
        if obj.get("error"):
            continue  # producer-side record failure: no value to correlate
        if "pair_id" not in obj or "change_score" not in obj:
            raise ParseError("record needs pair_id and change_score", line=lineno)
        model = obj.get("model_name", "hlf")
        bucket = by_model.setdefault(model, {})
        pair_id = str(obj["pair_id"])
        if pair_id in bucket:
            raise ConflictError(f"duplicate pair_id {pair_id!r} for model {model}")
        value = obj["change_score"]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError("'change_score' must be a number", line=lineno)
        bucket[pair_id] = float(value)
    return [
        ScoreSeries(scorer_name=m, orientation="lower_is_better",
                    entries=e, series_type="HLF")
        for m, e in sorted(by_model.items())
    ]


def load_series_auto(path) -> list:
    """Load scorer series from a file, detecting its format.

    Recognizes the external-score format (header with scorer_name), batch
    metric records, and embedding change-score records. Returns a list of
    ScoreSeries (one per metric or model found).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    stripped = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not stripped:
        raise ParseError("empty score file", line=1)
    first = _parse_json_line(stripped[0][1], stripped[0][0])
    if "scorer_name" in first:
        return [import_external_scores(path)]
    records = [(lineno, _parse_json_line(raw, lineno)) for lineno, raw in stripped]
    if "metric" in first:
        return _series_from_metric_records(records)
    if "change_score" in first:
        return _series_from_hlf_records(records)
    raise ParseError("unrecognized score file format", line=stripped[0][0])


# ---------------------------------------------------------------------------
# report output
# ---------------------------------------------------------------------------

def report_to_json(report: MetricReport) -> str:
    doc = {
        "generated_at": report.generated_at,
        "dataset_split": report.dataset_split,
        "negation_convention": NEGATION_FOOTER,
        "rows": [
            {
                "scorer_name": r.scorer_name,
                "srcc": r.srcc,
                "plcc": r.plcc,
                "n": r.n,
                "type": r.series_type,
                "error": r.error,
            }
            for r in report.rows
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def render_table(report: MetricReport) -> str:
    """Aligned text table with Metric, SRCC, PLCC and Type columns."""
    headers = ("Metric", "SRCC", "PLCC", "Type")
    body = []
    for r in report.rows:
        body.append(
            (
                r.scorer_name,
                "-" if r.srcc is None else f"{r.srcc:.4f}",
                "-" if r.plcc is None else f"{r.plcc:.4f}",
                r.series_type if r.error is None else f"{r.series_type} ({r.error})",
            )
        )
    widths = [
        max(len(headers[c]), *(len(row[c]) for row in body)) if body else len(headers[c])
        for c in range(4)
    ]
    lines = [
        "  ".join(h.ljust(widths[c]) for c, h in enumerate(headers)),
        "  ".join("-" * widths[c] for c in range(4)),
    ]
    for row in body:
        lines.append("  ".join(row[c].ljust(widths[c]) for c in range(4)))
    lines.append("")
    lines.append(f"split: {report.dataset_split}")
    lines.append(f"note: {NEGATION_FOOTER}")
    return "\n".join(lines)
