"""Dataset assembly and subjective-study bookkeeping.

Covers stratified pair selection, the append-only annotation store, trap
based annotator filtering, score aggregation, train/test splitting and
per-model score histograms. The JSON-lines event log is the single source
of truth; every in-memory index is rebuilt by replaying it.
"""

import json
import math
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import ConflictError, NotFoundError, ParseError, StateError

__all__ = [
    "MIN_ANNOTATIONS",
    "PairRecord",
    "AnnotationEvent",
    "FidelityScore",
    "AnnotatorStatus",
    "StudyStore",
    "stratified_select",
    "record_annotation",
    "annotator_filter",
    "aggregate_scores",
    "split_dataset",
    "distribution_report",
    "load_manifest",
    "save_manifest",
    "save_scores",
    "load_scores",
]

MIN_ANNOTATIONS = 12  # annotations needed before a score becomes final
TRAP_MIN_SEEN = 5  # traps an annotator must have seen before exclusion
TRAP_ACCURACY = 0.8  # exclusion threshold: accuracy strictly below this

SPLITS = ("train", "test", "unassigned")

_PAIR_FIELDS = (
    "pair_id",
    "gt_path",
    "sr_path",
    "model_name",
    "recipe_ref",
    "similarity",
    "bin",
    "split",
    "is_trap",
    "trap_expected",
)
_EVENT_FIELDS = (
    "event_id",
    "annotator_id",
    "pair_id",
    "answer",
    "presented_at",
    "latency_ms",
)


@dataclass(frozen=True)
class PairRecord:
    """One GT/SR image pair in the dataset manifest.

    ``trap_expected`` is "yes"/"no" for trap pairs and None otherwise;
    ``bin`` is the similarity stratum the pair fell into at selection time.
    """

    pair_id: str
    gt_path: str
    sr_path: str
    model_name: str
    recipe_ref: str | None = None
    similarity: float = 0.0
    bin: int = 0
    split: str = "unassigned"
    is_trap: bool = False
    trap_expected: str | None = None

    def __post_init__(self):
        if not self.pair_id:
            raise ValueError("pair_id must be nonempty")
        if not -1.0 <= self.similarity <= 1.0:
            raise ValueError(f"similarity must be in [-1, 1], got {self.similarity}")
        if self.bin < 0:
            raise ValueError(f"bin must be >= 0, got {self.bin}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if self.is_trap:
            if self.trap_expected not in ("yes", "no"):
                raise ValueError("trap pairs need trap_expected 'yes' or 'no'")
        elif self.trap_expected is not None:
            raise ValueError("non-trap pairs must not carry trap_expected")

    @property
    def trap_expected_answer(self) -> bool | None:
        if self.trap_expected is None:
            return None
        return self.trap_expected == "yes"

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in _PAIR_FIELDS}

    @classmethod
    def from_dict(cls, doc: dict) -> "PairRecord":
        return cls(**{f: doc[f] for f in _PAIR_FIELDS})


@dataclass(frozen=True)
class AnnotationEvent:
    """One answered question: did the semantic content change (yes/no)."""

    event_id: str
    annotator_id: str
    pair_id: str
    answer: bool
    presented_at: str
    latency_ms: int

    def __post_init__(self):
        if not self.event_id or not self.annotator_id or not self.pair_id:
            raise ValueError("event_id, annotator_id and pair_id must be nonempty")
        if not isinstance(self.answer, bool):
            raise ValueError("answer must be a bool")
        if not isinstance(self.latency_ms, int) or self.latency_ms < 0:
            raise ValueError(f"latency_ms must be a non-negative int, got {self.latency_ms}")
        try:
            datetime.fromisoformat(str(self.presented_at).replace("Z", "+00:00"))
        except ValueError as exc:
            raise ValueError(f"presented_at is not an ISO timestamp: {exc}") from exc

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in _EVENT_FIELDS}

    @classmethod
    def from_dict(cls, doc: dict) -> "AnnotationEvent":
        return cls(**{f: doc[f] for f in _EVENT_FIELDS})


@dataclass(frozen=True)
class FidelityScore:
    """Aggregated human score for one pair: mean of Yes answers in [0, 1]."""

    pair_id: str
    n_valid: int
    score: float | None

    def __post_init__(self):
        if self.n_valid < 0:
            raise ValueError("n_valid must be >= 0")
        if (self.score is None) != (self.n_valid == 0):
            raise ValueError("score must be None exactly when n_valid is 0")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")

    @property
    def final(self) -> bool:
        return self.n_valid >= MIN_ANNOTATIONS

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "n_valid": self.n_valid,
            "score": self.score,
            "final": self.final,
        }


@dataclass(frozen=True)
class AnnotatorStatus:
    annotator_id: str
    traps_seen: int
    traps_correct: int

    @property
    def excluded(self) -> bool:
        if self.traps_seen < TRAP_MIN_SEEN:
            return False
        return self.traps_correct / self.traps_seen < TRAP_ACCURACY

    def to_dict(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "traps_seen": self.traps_seen,
            "traps_correct": self.traps_correct,
            "excluded": self.excluded,
        }


# ---------------------------------------------------------------------------
# manifest and score I/O
# ---------------------------------------------------------------------------

def _read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc


def load_manifest(path) -> list:
    """Read PairRecords from a JSON-lines manifest."""
    out = []
    seen = set()
    for lineno, doc in _read_jsonl(path):
        try:
            rec = PairRecord.from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad pair record: {exc}", line=lineno) from exc
        if rec.pair_id in seen:
            raise ConflictError(f"duplicate pair_id {rec.pair_id!r} in manifest")
        seen.add(rec.pair_id)
        out.append(rec)
    return out


def save_manifest(pairs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in pairs:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def save_scores(scores, path):
    with open(path, "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")


def load_scores(path) -> list:
    out = []
    for lineno, doc in _read_jsonl(path):
        try:
            out.append(
                FidelityScore(
                    pair_id=doc["pair_id"],
                    n_valid=doc["n_valid"],
                    score=doc["score"],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad score record: {exc}", line=lineno) from exc
    return out


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------

class StudyStore:
    """Annotation store over an append-only JSON-lines event log.

    Every accepted event is flushed and fsynced before the call returns,
    so an acknowledged answer survives a crash. All mutation goes through
    one lock; reads return snapshots.
    """

    def __init__(self, data_dir, manifest_path=None, events_path=None):
        self.data_dir = Path(data_dir)
        self.manifest_path = Path(manifest_path or self.data_dir / "manifest.jsonl")
        self.events_path = Path(events_path or self.data_dir / "events.jsonl")
        self._lock = threading.Lock()
        self._pairs: dict = {}
        self._events: list = []
        self._answered: set = set()  # (annotator_id, pair_id)
        self._event_ids: set = set()
        self._annotators: set = set()
        self._trap_seen: dict = {}
        self._trap_correct: dict = {}

        if self.manifest_path.exists():
            for rec in load_manifest(self.manifest_path):
                self._pairs[rec.pair_id] = rec
        if self.events_path.exists():
            for lineno, doc in _read_jsonl(self.events_path):
                try:
                    event = AnnotationEvent.from_dict(doc)
                except (KeyError, TypeError, ValueError) as exc:
                    raise ParseError(f"bad event record: {exc}", line=lineno) from exc
                self._absorb(event)
        self._fh = open(self.events_path, "a", encoding="utf-8")

    # -- lifecycle

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- registration and lookups

    def register_annotator(self, annotator_id: str):
        if not annotator_id:
            raise ValueError("annotator_id must be nonempty")
        with self._lock:
            self._annotators.add(annotator_id)

    def is_registered(self, annotator_id: str) -> bool:
        return annotator_id in self._annotators

    def pair(self, pair_id: str) -> PairRecord:
        try:
            return self._pairs[pair_id]
        except KeyError:
            raise NotFoundError(f"unknown pair {pair_id!r}") from None

    def pairs(self) -> list:
        return sorted(self._pairs.values(), key=lambda r: r.pair_id)

    def has_pair(self, pair_id: str) -> bool:
        return pair_id in self._pairs

    def events(self) -> list:
        with self._lock:
            return list(self._events)

    def answered_pairs(self, annotator_id: str) -> set:
        with self._lock:
            return {p for a, p in self._answered if a == annotator_id}

    # -- mutation

    def _absorb(self, event: AnnotationEvent):
        # Index an event that is already durable (replay or fresh append).
        self._events.append(event)
        self._event_ids.add(event.event_id)
        self._answered.add((event.annotator_id, event.pair_id))
        self._annotators.add(event.annotator_id)
        pair = self._pairs.get(event.pair_id)
        if pair is not None and pair.is_trap:
            aid = event.annotator_id
            self._trap_seen[aid] = self._trap_seen.get(aid, 0) + 1
            if event.answer == pair.trap_expected_answer:
                self._trap_correct[aid] = self._trap_correct.get(aid, 0) + 1

    def record_annotation(self, event: AnnotationEvent):
        """Append one answer durably; rejects duplicates and unknown ids."""
        with self._lock:
            if event.pair_id not in self._pairs:
                raise NotFoundError(f"unknown pair {event.pair_id!r}")
            if event.annotator_id not in self._annotators:
                raise NotFoundError(f"unknown annotator {event.annotator_id!r}")
            if (event.annotator_id, event.pair_id) in self._answered:
                raise ConflictError(
                    f"annotator {event.annotator_id!r} already answered pair "
                    f"{event.pair_id!r}"
                )
            if event.event_id in self._event_ids:
                raise ConflictError(f"duplicate event_id {event.event_id!r}")
            # Durability point: the line is on disk before the call returns.
            self._fh.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._absorb(event)

    # -- aggregation

    def annotator_statuses(self) -> list:
        with self._lock:
            ids = sorted(self._annotators)
            return [
                AnnotatorStatus(
                    annotator_id=a,
                    traps_seen=self._trap_seen.get(a, 0),
                    traps_correct=self._trap_correct.get(a, 0),
                )
                for a in ids
            ]

    def aggregate_scores(self) -> list:
        excluded = {s.annotator_id for s in self.annotator_statuses() if s.excluded}
        with self._lock:
            events = list(self._events)
            pairs = sorted(self._pairs.values(), key=lambda r: r.pair_id)
        votes: dict = {}
        for event in events:
            if event.annotator_id in excluded:
                continue
            votes.setdefault(event.pair_id, []).append(event.answer)
        out = []
        for pair in pairs:
            if pair.is_trap:
                continue
            answers = votes.get(pair.pair_id, [])
            n = len(answers)
            score = sum(answers) / n if n else None
            out.append(FidelityScore(pair_id=pair.pair_id, n_valid=n, score=score))
        return out


def record_annotation(store: StudyStore, event: AnnotationEvent):
    store.record_annotation(event)


def annotator_filter(store: StudyStore) -> list:
    """Current per-annotator trap statistics with the exclusion flag."""
    return store.annotator_statuses()


def aggregate_scores(store: StudyStore) -> list:
    """Per non-trap pair: mean Yes-rate among non-excluded annotators."""
    return store.aggregate_scores()


# ---------------------------------------------------------------------------
# selection, splitting, reporting
# ---------------------------------------------------------------------------

def stratified_select(candidates, total: int, bins: int = 5) -> list:
    """Pick ``total`` pairs evenly across equal-width similarity strata.

    Quotas differ by at most one (earlier bins take the remainder); within
    a bin candidates are taken by ascending pair_id. A bin that cannot
    fill its quota spills the deficit to other bins, nearest bin first,
    lower index first on distance ties. Returned records carry their
    stratum in ``bin``, sorted by pair_id.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must be nonempty")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if total > len(candidates):
        raise ValueError(
            f"cannot select {total} from {len(candidates)} candidates"
        )
    if total < 0:
        raise ValueError("total must be >= 0")

    sims = [c.similarity for c in candidates]
    lo, hi = min(sims), max(sims)
    width = (hi - lo) / bins

    def stratum(sim: float) -> int:
        if width == 0.0:
            return 0
        return min(int((sim - lo) / width), bins - 1)

    by_bin: list = [[] for _ in range(bins)]
    for cand in candidates:
        by_bin[stratum(cand.similarity)].append(cand)
    for bucket in by_bin:
        bucket.sort(key=lambda c: c.pair_id)

    base, rem = divmod(total, bins)
    quotas = [base + (1 if i < rem else 0) for i in range(bins)]

    taken: list = [[] for _ in range(bins)]
    for i in range(bins):
        taken[i] = by_bin[i][: quotas[i]]
    leftovers = [by_bin[i][quotas[i]:] for i in range(bins)]

    for i in range(bins):
        deficit = quotas[i] - len(taken[i])
        if deficit <= 0:
            continue
        for j in sorted(range(bins), key=lambda j: (abs(j - i), j)):
            if j == i or deficit == 0:
                continue
            while leftovers[j] and deficit > 0:
                taken[i].append(leftovers[j].pop(0))
                deficit -= 1

    selected = []
    for i in range(bins):
        for cand in taken[i]:
            selected.append(replace(cand, bin=stratum(cand.similarity)))
    selected.sort(key=lambda c: c.pair_id)
    return selected


def split_dataset(pairs, scores, train_fraction: float = 0.8, seed: int = 0) -> list:
    """Assign non-trap pairs to train/test, stratified by SR model.

    Test size is round((1 - train_fraction) * N) overall; each model
    contributes its rounded share, with the residual adjusted on the
    model holding the most pairs. Assignment within a model is a seeded
    shuffle, so the split is deterministic per seed. Trap pairs stay
    unassigned. Raises StateError when a non-trap pair's score is missing
    or not final.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    pairs = list(pairs)
    score_map = {s.pair_id: s for s in scores}
    eligible = [p for p in pairs if not p.is_trap]
    for p in eligible:
        s = score_map.get(p.pair_id)
        if s is None or not s.final:
            raise StateError(
                f"pair {p.pair_id!r} has no final score; cannot split"
            )

    by_model: dict = {}
    for p in eligible:
        by_model.setdefault(p.model_name, []).append(p)
    for group in by_model.values():
        group.sort(key=lambda p: p.pair_id)

    test_fraction = 1.0 - train_fraction
    total_test = round(test_fraction * len(eligible))
    model_names = sorted(by_model)
    test_counts = {m: round(test_fraction * len(by_model[m])) for m in model_names}
    residual = total_test - sum(test_counts.values())
    if residual != 0:
        largest = max(model_names, key=lambda m: (len(by_model[m]), m))
        test_counts[largest] += residual
        if not 0 <= test_counts[largest] <= len(by_model[largest]):
            raise ValueError("residual adjustment exceeded the largest model's size")

    rng = np.random.default_rng(seed)
    assignment: dict = {}
    for m in model_names:
        group = by_model[m]
        order = rng.permutation(len(group))
        n_test = test_counts[m]
        for rank, idx in enumerate(order):
            assignment[group[idx].pair_id] = "test" if rank < n_test else "train"

    out = []
    for p in pairs:
        if p.is_trap:
            out.append(replace(p, split="unassigned"))
        else:
            out.append(replace(p, split=assignment[p.pair_id]))
    return out


def distribution_report(scores, n_buckets: int, pair_models=None) -> dict:
    """Histogram of scores over [0, 1] per SR model.

    ``pair_models`` maps pair_id to model_name; without it every score
    lands in a single "all" group. Buckets are half-open [k/B, (k+1)/B)
    with 1.0 in the last bucket; unscored (None) records are skipped.
    """
    if n_buckets < 2:
        raise ValueError(f"n_buckets must be >= 2, got {n_buckets}")
    histograms: dict = {}
    if pair_models is not None:
        for model in pair_models.values():
            histograms.setdefault(model, [0] * n_buckets)
    for s in scores:
        if s.score is None:
            continue
        model = "all" if pair_models is None else pair_models.get(s.pair_id)
        if model is None:
            continue
        hist = histograms.setdefault(model, [0] * n_buckets)
        # nudge defeats float residue so exact decimals land in the
        # intended half-open bucket; 1.0 folds into the last bucket
        idx = min(int(math.floor(s.score * n_buckets + 1e-9)), n_buckets - 1)
        hist[idx] += 1
    return histograms
