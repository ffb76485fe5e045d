"""Command line entry point: ``qubrain run|summarize|gradcheck|paramcount``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

DATA_ENV = "QUBRAIN_DATA"


def parse_seeds(text: str) -> list[int]:
    """``"0..9"`` (inclusive), ``"1,4,7"`` or a mix such as ``"0..2,8"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            seeds.extend(range(lo_i, hi_i + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    if any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError("seeds must be non-negative")
    return seeds


def _seeds_arg(text: str) -> list[int]:
    try:
        return parse_seeds(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}: {e}") from None


def build_parser() -> argparse.ArgumentParser:
    from ..models import MODEL_IDS

    p = argparse.ArgumentParser(prog="qubrain", description="Quantum/spiking fraud-detection benchmark")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train and evaluate one model over several seeds")
    r.add_argument("--model", required=True, choices=MODEL_IDS)
    r.add_argument("--data", default=None, help=f"credit-card CSV (default: ${DATA_ENV})")
    r.add_argument("--seeds", type=_seeds_arg, default=list(range(10)), help="e.g. 0..9 or 0,3,5 (default 0..9)")
    r.add_argument("--out", default="results", help="output directory")
    r.add_argument("--fixture", action="store_true", help="use the small synthetic dataset and fixture-sized splits")
    r.add_argument("--epochs", type=int, default=None, help="override the configured epoch count")
    r.add_argument("--batch", type=int, default=None, help="override the configured batch size")
    r.add_argument("--no-plots", action="store_true", help="skip PNG rendering")

    s = sub.add_parser("summarize", help="rebuild summaries, curves and figures from run records")
    s.add_argument("--in", dest="in_dir", required=True)
    s.add_argument("--no-plots", action="store_true")

    g = sub.add_parser("gradcheck", help="finite-difference and parameter-shift gradient checks")
    g.add_argument("--module", choices=("autodiff", "qsim", "nn", "models"), default=None)
    g.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("paramcount", help="trainable parameter count against the expected figure")
    c.add_argument("--model", required=True, choices=MODEL_IDS + ("all",))
    return p


def _load_data(args):
    from ..data import load_csv, make_fixture

    if args.fixture and not args.data:
        return make_fixture()
    path = args.data or os.environ.get(DATA_ENV)
    if not path:
        raise SystemExit(f"error: no data; pass --data, set ${DATA_ENV}, or use --fixture")
    return load_csv(path)


def cmd_run(args) -> int:
    from .runner import run_experiment

    for name in ("epochs", "batch"):
        v = getattr(args, name)
        if v is not None and v < 1:
            raise SystemExit(f"error: --{name} must be >= 1")
    ds = _load_data(args)
    recs = run_experiment(args.model, ds, args.seeds, args.out, fixture=args.fixture,
                          epochs=args.epochs, batch=args.batch, plots=not args.no_plots)
    print("seed   f1      auc     recall  precision  epochs  seconds")
    for r in recs:
        m = r.metrics
        print(f"{r.seed:<6} {m.f1:.4f}  {m.auc:.4f}  {m.recall:.4f}  {m.precision:.4f}     {r.epochs:<7} {r.duration_s:.1f}")
    print(f"wrote {len(recs)} run records to {Path(args.out).resolve()}")
    return 0


def cmd_summarize(args) -> int:
    from .runner import summarize

    summaries = summarize(args.in_dir, plots=not args.no_plots)
    for model, doc in summaries.items():
        if doc["metrics"] is None:
            print(f"{model}: {len(doc['seeds'])} seeds ({doc['note']})")
            continue
        parts = [f"{k} {v['median']:.4f} [{v['q1']:.4f}, {v['q3']:.4f}]" for k, v in doc["metrics"].items()]
        print(f"{model}: " + "  ".join(parts))
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_suites

    checks = run_suites([args.module] if args.module else None, seed=args.seed)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def cmd_paramcount(args) -> int:
    from ..models import MODEL_IDS, EXPECTED_PARAM_COUNTS, build_model

    ids = MODEL_IDS if args.model == "all" else (args.model,)
    ok = True
    for mid in ids:
        n = build_model(mid).num_parameters()
        want = EXPECTED_PARAM_COUNTS[mid]
        ok &= n == want
        print(f"{mid:<11} {n:>6}  expected {want:>6}  {'ok' if n == want else 'MISMATCH'}")
    return 0 if ok else 1


COMMANDS = {"run": cmd_run, "summarize": cmd_summarize, "gradcheck": cmd_gradcheck, "paramcount": cmd_paramcount}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
