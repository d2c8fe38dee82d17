"""Command-line entry point orchestrating the workbench subsystems.

One binary with subcommands; JSON-lines in and out everywhere. Exit
codes: 0 success, 1 partial data errors (some records failed), 2 usage
or environment errors. Relative paths resolve against --data-dir.
"""

import concurrent.futures
import hashlib
import json
import logging
import sys
from pathlib import Path

import click

from . import correlate as correlate_mod
from . import degrade as degrade_mod
from . import metrics as metrics_mod
from . import study as study_mod
from .errors import (
    BackendError,
    ConflictError,
    ModelLoadError,
    ModelSpecError,
    ParseError,
    StateError,
)
from .hlf import hlf_score, load_backend, load_spec
from .imgcore import load_image, save_image, to_luma
from .service import load_config as load_service_config
from .service import serve as run_service

log = logging.getLogger("srfid")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class CliContext:
    def __init__(self, data_dir, seed, threads):
        self.data_dir = Path(data_dir)
        self.seed = seed
        self.threads = threads

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.data_dir / p


def _fail2(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _pool_map(threads: int, fn, items) -> list:
    """Apply fn across items; results keep input order regardless of scheduling."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _write_jsonl(path: Path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _image_seed(root_seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{root_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _load_manifest_or_die(path: Path) -> list:
    try:
        return study_mod.load_manifest(path)
    except (ParseError, OSError) as exc:
        _fail2(exc)


def _load_scores_or_die(path: Path) -> list:
    try:
        return study_mod.load_scores(path)
    except (ParseError, OSError) as exc:
        _fail2(exc)


@click.group()
@click.option("--data-dir", default=".", show_default=True,
              help="Base directory for relative paths.")
@click.option("--seed", default=0, show_default=True, type=int,
              help="Root seed; every randomized subcommand derives from it.")
@click.option("--threads", default=1, show_default=True,
              type=click.IntRange(min=1),
              help="Worker threads for batch subcommands.")
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]))
@click.pass_context
def main(ctx, data_dir, seed, threads, log_level):
    """Super-resolution fidelity workbench."""
    logging.basicConfig(level=getattr(logging, log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = CliContext(data_dir, seed, threads)


@main.command()
@click.option("--gt-dir", required=True, help="Directory of ground-truth images.")
@click.option("--out-dir", required=True, help="Destination for LR images and recipes.")
@click.option("--severity", default="medium", show_default=True,
              type=click.Choice(sorted(degrade_mod.SEVERITY_RANGES)))
@click.option("--seed", "seed_override", default=None, type=int,
              help="Override the global --seed for this run.")
@click.pass_obj
def degrade(cli, gt_dir, out_dir, severity, seed_override):
    """Synthesize one LR image plus a recipe sidecar per GT image."""
    seed = cli.seed if seed_override is None else seed_override
    src = cli.resolve(gt_dir)
    if not src.is_dir():
        raise click.UsageError(f"--gt-dir {src} is not a readable directory")
    dst = cli.resolve(out_dir)
    dst.mkdir(parents=True, exist_ok=True)
    names = sorted(
        p.name for p in src.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not names:
        click.echo(f"warning: no images found in {src}", err=True)
        return

    def one(name: str) -> str:
        gt = degrade_mod.prepare_gt(load_image(src / name))
        recipe = degrade_mod.sample_recipe(_image_seed(seed, name), severity)
        lr = degrade_mod.apply_degradation(gt, recipe)
        stem = Path(name).stem
        save_image(lr, dst / f"{stem}.png")
        (dst / f"{stem}.recipe.json").write_text(recipe.to_json() + "\n")
        return name

    for name in _pool_map(cli.threads, one, names):
        log.info("degraded %s", name)
    click.echo(f"degraded {len(names)} images into {dst}")


@main.command()
@click.option("--manifest", "manifest_path", default="manifest.jsonl",
              show_default=True)
@click.option("--metrics", "metric_names", default="psnr,ssim,vif",
              show_default=True, help="Comma-separated metric names.")
@click.option("--out", "out_path", required=True)
@click.pass_obj
def score(cli, manifest_path, metric_names, out_path):
    """Full-reference metric records, one per (pair, metric)."""
    names = [m.strip() for m in metric_names.split(",") if m.strip()]
    unknown = [m for m in names if m not in metrics_mod.METRICS]
    if unknown:
        raise click.UsageError(f"unknown metrics: {', '.join(unknown)}")
    pairs = _load_manifest_or_die(cli.resolve(manifest_path))

    def one(pair) -> list:
        base = {"pair_id": pair.pair_id, "value": None, "infinite": False}
        try:
            gt = to_luma(load_image(cli.resolve(pair.gt_path)))
            sr = to_luma(load_image(cli.resolve(pair.sr_path)))
        except Exception as exc:
            return [dict(base, metric=m, error=str(exc)) for m in names]
        records = []
        for m in names:
            try:
                mv = metrics_mod.METRICS[m](gt, sr)
                records.append(dict(
                    base, metric=m,
                    value=None if mv.infinite else mv.value,
                    infinite=mv.infinite,
                ))
            except Exception as exc:
                records.append(dict(base, metric=m, error=str(exc)))
        return records

    buckets = _pool_map(cli.threads, one, pairs)
    records = [record for bucket in buckets for record in bucket]
    _write_jsonl(cli.resolve(out_path), records)
    failures = sum(1 for r in records if r.get("error"))
    click.echo(f"wrote {len(records)} records ({failures} errors)")
    if failures:
        sys.exit(1)


@main.command()
@click.option("--manifest", "manifest_path", default="manifest.jsonl",
              show_default=True)
@click.option("--model", "model_spec_path", required=True,
              help="Path to the embedding model's spec sidecar.")
@click.option("--model-name", default=None,
              help="Name stored in output records; defaults to the model file stem.")
@click.option("--out", "out_path", required=True)
@click.pass_obj
def hlf(cli, manifest_path, model_spec_path, model_name, out_path):
    """Embedding change-score records, one per pair."""
    try:
        spec = load_spec(cli.resolve(model_spec_path))
        backend = load_backend(spec)
    except (ModelSpecError, ModelLoadError, BackendError) as exc:
        _fail2(f"model load failure: {exc}")
    name = model_name or Path(spec.model_path).stem
    pairs = _load_manifest_or_die(cli.resolve(manifest_path))

    def one(pair) -> dict:
        try:
            gt = load_image(cli.resolve(pair.gt_path))
            sr = load_image(cli.resolve(pair.sr_path))
            result = hlf_score(backend, gt, sr, pair.pair_id)
            return {
                "pair_id": result.pair_id,
                "cosine": result.cosine,
                "change_score": result.change_score,
                "model_name": name,
            }
        except Exception as exc:
            return {"pair_id": pair.pair_id, "change_score": None,
                    "model_name": name, "error": str(exc)}

    records = _pool_map(cli.threads, one, pairs)
    _write_jsonl(cli.resolve(out_path), records)
    failures = sum(1 for r in records if r.get("error"))
    click.echo(f"wrote {len(records)} records ({failures} errors)")
    if failures:
        sys.exit(1)


@main.command()
@click.option("--candidates", "candidates_path", required=True,
              help="Manifest of candidate pairs with similarities.")
@click.option("--total", required=True, type=int)
@click.option("--bins", default=5, show_default=True, type=int)
@click.option("--out", "out_path", required=True)
@click.pass_obj
def select(cli, candidates_path, total, bins, out_path):
    """Stratified selection of study pairs across similarity bins."""
    candidates = _load_manifest_or_die(cli.resolve(candidates_path))
    try:
        picked = study_mod.stratified_select(candidates, total, bins=bins)
    except ValueError as exc:
        _fail2(exc)
    study_mod.save_manifest(picked, cli.resolve(out_path))
    click.echo(f"selected {len(picked)} of {len(candidates)} candidates")


@main.command()
@click.option("--events", "events_path", required=True)
@click.option("--manifest", "manifest_path", default="manifest.jsonl",
              show_default=True)
@click.option("--out", "out_path", required=True)
@click.pass_obj
def aggregate(cli, events_path, manifest_path, out_path):
    """Aggregate annotation events into per-pair fidelity scores."""
    events = cli.resolve(events_path)
    if not events.is_file():
        _fail2(f"events file {events} not found")
    try:
        store = study_mod.StudyStore(
            cli.data_dir,
            manifest_path=cli.resolve(manifest_path),
            events_path=events,
        )
    except (ParseError, OSError) as exc:
        _fail2(exc)
    try:
        scores = store.aggregate_scores()
        excluded = [s.annotator_id for s in store.annotator_statuses()
                    if s.excluded]
    finally:
        store.close()
    study_mod.save_scores(scores, cli.resolve(out_path))
    click.echo(
        f"aggregated {len(scores)} pairs "
        f"({sum(1 for s in scores if s.final)} final, "
        f"{len(excluded)} annotators excluded)"
    )


@main.command()
@click.option("--scores", "scores_path", required=True)
@click.option("--fraction", default=0.8, show_default=True, type=float,
              help="Training fraction.")
@click.option("--seed", "seed_override", default=None, type=int)
@click.option("--manifest", "manifest_path", default="manifest.jsonl",
              show_default=True)
@click.option("--out", "out_path", default=None,
              help="Output manifest; defaults to rewriting --manifest.")
@click.pass_obj
def split(cli, scores_path, fraction, seed_override, manifest_path, out_path):
    """Assign train/test splits, stratified per SR model."""
    seed = cli.seed if seed_override is None else seed_override
    pairs = _load_manifest_or_die(cli.resolve(manifest_path))
    scores = _load_scores_or_die(cli.resolve(scores_path))
    try:
        updated = study_mod.split_dataset(
            pairs, scores, train_fraction=fraction, seed=seed
        )
    except (StateError, ValueError) as exc:
        _fail2(exc)
    out = cli.resolve(out_path) if out_path else cli.resolve(manifest_path)
    study_mod.save_manifest(updated, out)
    counts = {"train": 0, "test": 0, "unassigned": 0}
    for p in updated:
        counts[p.split] += 1
    click.echo(
        f"split {counts['train']} train / {counts['test']} test "
        f"({counts['unassigned']} unassigned)"
    )


@main.command()
@click.option("--scores", "scores_path", required=True,
              help="Aggregated fidelity scores (JSON-lines).")
@click.option("--series", "series_paths", required=True,
              help="Comma-separated scorer record files.")
@click.option("--split", "split_name", default="all", show_default=True,
              type=click.Choice(["all", "train", "test"]))
@click.option("--manifest", "manifest_path", default="manifest.jsonl",
              show_default=True, help="Needed for train/test splits.")
@click.option("--out", "out_path", default=None, help="Report JSON destination.")
@click.pass_obj
def correlate(cli, scores_path, series_paths, split_name, manifest_path, out_path):
    """Benchmark scorer series against human fidelity scores."""
    fidelity = _load_scores_or_die(cli.resolve(scores_path))
    series = []
    for part in series_paths.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            series.extend(correlate_mod.load_series_auto(cli.resolve(part)))
        except (ParseError, ConflictError, OSError) as exc:
            _fail2(f"{part}: {exc}")
    assignment = None
    if split_name != "all":
        pairs = _load_manifest_or_die(cli.resolve(manifest_path))
        assignment = {p.pair_id: p.split for p in pairs}
    report = correlate_mod.benchmark(
        fidelity, series, split=split_name, split_assignment=assignment
    )
    if out_path:
        out = cli.resolve(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(correlate_mod.report_to_json(report) + "\n")
    click.echo(correlate_mod.render_table(report))
    if any(r.error for r in report.rows):
        sys.exit(1)


@main.command()
@click.option("--scores", "scores_path", required=True)
@click.option("--buckets", default=10, show_default=True, type=int)
@click.option("--manifest", "manifest_path", default=None,
              help="When given, histograms are grouped per SR model.")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def report(cli, scores_path, buckets, manifest_path, out_path):
    """Score-distribution histograms as JSON."""
    scores = _load_scores_or_die(cli.resolve(scores_path))
    pair_models = None
    if manifest_path:
        pairs = _load_manifest_or_die(cli.resolve(manifest_path))
        pair_models = {p.pair_id: p.model_name for p in pairs if not p.is_trap}
    try:
        doc = study_mod.distribution_report(scores, buckets, pair_models)
    except ValueError as exc:
        _fail2(exc)
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out_path:
        out = cli.resolve(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    else:
        click.echo(text)


@main.command()
@click.option("--config", "config_path", required=True)
@click.pass_obj
def serve(cli, config_path):
    """Run the annotation service until interrupted."""
    try:
        config = load_service_config(cli.resolve(config_path))
    except ValueError as exc:
        _fail2(exc)
    run_service(config)


if __name__ == "__main__":
    main()
