"""The multi-seed protocol: splits, training, evaluation, and result files."""

from __future__ import annotations

import csv
import json
import logging
import re
from pathlib import Path

from ..data import Dataset, SplitSpec, make_splits
from .checkpoint import Checkpoint, save_checkpoint
from .metrics import summarize_metrics
from .records import RunRecord

log = logging.getLogger(__name__)

MIN_SUMMARY_SEEDS = 4
_RUN_FILE = re.compile(r"run_(?P<model>[a-z-]+)_(?P<seed>\d+)\.json$")


def run_path(out: Path, model_id: str, seed: int) -> Path:
    return out / f"run_{model_id}_{seed}.json"


def checkpoint_path(out: Path, model_id: str, seed: int) -> Path:
    return out / f"ckpt_{model_id}_{seed}.qbc"


def manifest_path(out: Path, model_id: str, seed: int) -> Path:
    return out / f"split_{model_id}_{seed}.json"


def run_seed(model_id: str, ds: Dataset, seed: int, fixture: bool = False,
             epochs: int | None = None, batch: int | None = None):
    """Train and evaluate one seed; returns (record, model, splits)."""
    from ..models import REFERENCE_CONFIGS, build_model, train_model

    if model_id not in REFERENCE_CONFIGS:
        raise ValueError(f"unknown model id {model_id!r}; choose from {', '.join(REFERENCE_CONFIGS)}")
    cfg = REFERENCE_CONFIGS[model_id].with_overrides(epochs=epochs, batch_size=batch, seed=seed)
    model = build_model(model_id, seed)
    splits = make_splits(ds, SplitSpec.for_regime(seed, model.regime, fixture), model.regime)
    rec = train_model(model, cfg, splits.scaled(cfg.preprocessing))
    rec.extra["split_sizes"] = {k: len(getattr(splits, k)) for k in ("train", "val", "test")}
    rec.extra["fixture"] = fixture
    return rec, model, splits


def run_experiment(model_id: str, ds: Dataset, seeds, out_dir, fixture: bool = False,
                   epochs: int | None = None, batch: int | None = None, plots: bool = True) -> list[RunRecord]:
    """Every seed writes its record, checkpoint and split manifest as soon as
    it finishes, so an interrupted run keeps the completed seeds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for seed in seeds:
        rec, model, splits = run_seed(model_id, ds, seed, fixture, epochs, batch)
        rec.save(run_path(out, model_id, seed))
        save_checkpoint(Checkpoint.from_model(model, seed, rec.epochs, {"config": rec.config}),
                        checkpoint_path(out, model_id, seed))
        splits.write_manifest(manifest_path(out, model_id, seed))
        log.info("%s seed %d: f1=%.4f auc=%.4f (%.1fs)", model_id, seed, rec.metrics.f1, rec.metrics.auc, rec.duration_s)
        records.append(rec)
    write_model_outputs(out, model_id, records, plots=plots)
    return records


def build_summary(model_id: str, records: list[RunRecord]) -> dict:
    records = sorted(records, key=lambda r: r.seed)
    seeds = [r.seed for r in records]
    per_seed = {r.seed: r.metrics.to_dict() for r in records}
    if len(records) >= MIN_SUMMARY_SEEDS:
        doc = summarize_metrics(model_id, [r.metrics for r in records], seeds)
    else:
        doc = {"schema": "qubrain.summary/1", "model": model_id, "seeds": seeds, "metrics": None,
               "note": f"boxplot statistics need at least {MIN_SUMMARY_SEEDS} seeds"}
    doc["per_seed"] = {str(k): v for k, v in per_seed.items()}
    return doc


def write_curves(path: Path, records: list[RunRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "seed", "phase", "train_loss", "val_loss"])
        for r in sorted(records, key=lambda r: r.seed):
            for e, (tl, vl) in enumerate(zip(r.train_loss, r.val_loss)):
                w.writerow([e + 1, r.seed, r.phases[e] if r.phases else "", repr(tl), repr(vl)])


def write_model_outputs(out: Path, model_id: str, records: list[RunRecord], plots: bool = True) -> dict:
    summary = build_summary(model_id, records)
    (out / f"summary_{model_id}.json").write_text(json.dumps(summary, indent=1))
    write_curves(out / f"curves_{model_id}.csv", records)
    if plots:
        from .plots import plot_boxplots, plot_curves

        plot_curves(records, out / f"curves_{model_id}.png", title=model_id)
        if summary["metrics"] is not None:
            plot_boxplots({model_id: records}, out / f"boxplot_{model_id}.png")
    return summary


def collect_runs(in_dir) -> dict[str, list[RunRecord]]:
    by_model: dict[str, list[RunRecord]] = {}
    for p in sorted(Path(in_dir).glob("run_*.json")):
        if _RUN_FILE.search(p.name):
            rec = RunRecord.load(p)
            by_model.setdefault(rec.model_id, []).append(rec)
    return by_model


def summarize(in_dir, plots: bool = True) -> dict[str, dict]:
    """Rebuild per-model summaries and curves from the run records in a directory,
    plus a cross-model table and comparison figures."""
    out = Path(in_dir)
    by_model = collect_runs(out)
    if not by_model:
        raise FileNotFoundError(f"no run_<model>_<seed>.json records in {out}")
    summaries = {m: write_model_outputs(out, m, recs, plots=plots) for m, recs in by_model.items()}
    with open(out / "summary_all.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "metric", "median", "q1", "q3", "whisker_low", "whisker_high", "n_outliers", "n"])
        for m, doc in summaries.items():
            for name, st in (doc["metrics"] or {}).items():
                w.writerow([m, name, st["median"], st["q1"], st["q3"], st["whisker_low"],
                            st["whisker_high"], len(st["outliers"]), st["n"]])
    if plots:
        from .plots import plot_metric_comparison

        ready = {m: recs for m, recs in by_model.items() if summaries[m]["metrics"] is not None}
        if ready:
            plot_metric_comparison(ready, out)
    return summaries
