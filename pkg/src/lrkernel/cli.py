"""Command line entry point: ``lrkernel <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataset import SbmConfig, generate_sbm, load_dataset, summary
from .harness import (
    TRUNC_GRID, ExperimentPlan, GridPoint, Harness, SpectralCache, ablate_kernel,
    ablate_representation, ablate_truncation, aggregate_rows, audit_splits, emit_report,
    format_cell, read_results, write_manifest, write_results,
)
from .representation import build_representation, repr_kind
from .filters import GAMMA_GRID, kernel_kind
from .model import HIDDEN_GRID, model_kind
from .spectral import decompose, save_cache, truncate
from .splits import generate_splits, load_splits, save_splits
from .training import LR_GRID, WD_GRID

log = logging.getLogger("lrkernel")


def open_dataset(spec: str):
    """A dataset directory, or ``sbm:SIZES:P:Q[:DIM[:SEED]]`` for a synthetic graph."""
    if spec.startswith("sbm:"):
        parts = spec.split(":")[1:]
        sizes = [int(s) for s in parts[0].split(",")]
        cfg = SbmConfig(block_sizes=sizes, intra_p=float(parts[1]), inter_q=float(parts[2]),
                        feature_mode="block-means",
                        feature_dim=int(parts[3]) if len(parts) > 3 else 16,
                        seed=int(parts[4]) if len(parts) > 4 else 0, name="sbm")
        return generate_sbm(cfg)
    return load_dataset(spec)


def _floats(text):
    return tuple(float(t) for t in text.split(","))


def parse_ints(text):
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _strs(convert):
    return lambda text: tuple(convert(t) for t in text.split(","))


def _grid_args(p: argparse.ArgumentParser, single: bool) -> None:
    """Hyperparameter flags; comma-separated lists are accepted unless ``single``."""
    fl = float if single else _floats
    p.add_argument("--model", type=model_kind, default="kernel")
    p.add_argument("--repr", type=repr_kind if single else _strs(repr_kind),
                   default="adjacency" if single else ("adjacency",))
    p.add_argument("--kernel", type=kernel_kind if single else _strs(kernel_kind),
                   default="identity" if single else ("identity",))
    p.add_argument("--gamma", type=fl, default=1.0 if single else GAMMA_GRID)
    p.add_argument("--trunc", type=fl, default=0.0 if single else (0.0,))
    p.add_argument("--beta", type=fl, default=0.0 if single else (0.0,))
    p.add_argument("--lr", type=fl, default=1e-2 if single else LR_GRID)
    p.add_argument("--wd", type=fl, default=0.0 if single else WD_GRID)
    p.add_argument("--hidden", type=int if single else parse_ints, default=64 if single else HIDDEN_GRID)
    p.add_argument("--epochs", type=int, default=1000)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset directory or sbm:SIZES:P:Q[:DIM[:SEED]]")
    p.add_argument("--split", default="balanced", choices=["sparse", "public", "dense", "balanced"])
    p.add_argument("--splits-file", help="splits JSON to use instead of generating splits")
    p.add_argument("--out", default="results.csv", help="results CSV (rows are appended)")
    p.add_argument("--cache-dir", help="directory for spectral cache files")
    p.add_argument("--manifest", help="write a run manifest JSON here")
    p.add_argument("--row-normalize", action="store_true", help="row-normalise features")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrkernel", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="one configuration, one or more seeds")
    _common(p)
    _grid_args(p, single=True)
    p.add_argument("--seed", type=parse_ints, default=(0,), help="seed or list, e.g. 0-9")

    p = sub.add_parser("validate", help="grid search with validation-mean selection")
    _common(p)
    _grid_args(p, single=False)
    p.add_argument("--seeds", type=parse_ints, default=tuple(range(10)))

    p = sub.add_parser("ablate", help="kernel, representation or truncation ablation")
    p.add_argument("which", choices=["kernel", "repr", "trunc"])
    _common(p)
    _grid_args(p, single=False)
    p.add_argument("--seeds", type=parse_ints, default=tuple(range(10)))
    p.add_argument("--factors", type=_floats, default=TRUNC_GRID)

    p = sub.add_parser("audit-splits", help="XW / AXW probes under each split convention")
    p.add_argument("--data", required=True, nargs="+")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--seeds", type=parse_ints, default=tuple(range(10)))
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--manifest")
    p.add_argument("--row-normalize", action="store_true")

    p = sub.add_parser("splits", help="split utilities")
    ssub = p.add_subparsers(dest="splits_cmd", required=True)
    g = ssub.add_parser("gen", help="generate a splits JSON file")
    g.add_argument("--data", required=True)
    g.add_argument("--kind", default="balanced", choices=["sparse", "public", "dense", "balanced"])
    g.add_argument("--seeds", type=parse_ints, default=tuple(range(10)))
    g.add_argument("--out", required=True)

    p = sub.add_parser("spectral", help="spectral utilities")
    ssub = p.add_subparsers(dest="spectral_cmd", required=True)
    c = ssub.add_parser("cache", help="decompose a representation and write a cache file")
    c.add_argument("--data", required=True)
    c.add_argument("--repr", type=repr_kind, default="adjacency")
    c.add_argument("--trunc", type=float, default=0.0)
    c.add_argument("--out", required=True)

    p = sub.add_parser("report", help="tables from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--format", choices=["csv", "markdown"], default="markdown")
    p.add_argument("--group-by", default="dataset,model")
    p.add_argument("--out")

    p = sub.add_parser("summary", help="print dataset statistics")
    p.add_argument("--data", required=True)
    return ap


def _plan(args, ds, model=None) -> ExperimentPlan:
    return ExperimentPlan(
        dataset=ds.name, model=model or args.model, reprs=args.repr, kernels=args.kernel,
        gammas=args.gamma, truncs=args.trunc, betas=args.beta, lrs=args.lr, wds=args.wd,
        hiddens=args.hidden, split=args.split, seeds=args.seeds, epochs=args.epochs)


def _harness(args) -> Harness:
    return Harness(cache=SpectralCache(getattr(args, "cache_dir", None)),
                   normalize_features=args.row_normalize)


def _splits(args, ds, seeds):
    if args.splits_file:
        wanted = set(seeds)
        return [s for s in load_splits(args.splits_file, ds) if s.seed in wanted]
    return generate_splits(ds, args.split, seeds)


def _finish(args, harness, rows, plan=None) -> None:
    write_results(rows, args.out, append=True)
    if args.manifest:
        write_manifest(harness, args.manifest, plan)


def cmd_train(args) -> None:
    ds = open_dataset(args.data)
    kernel = args.kernel
    point = GridPoint(
        repr=args.repr if args.model in ("prop_linear", "kernel", "lr_kernel") else None,
        kernel=kernel if args.model in ("kernel", "lr_kernel") else None,
        gamma=args.gamma if args.model in ("kernel", "lr_kernel")
        and kernel in ("sobolev_unbounded", "gaussian_rbf") else None,
        trunc=(args.trunc if args.model == "lr_kernel" else 0.0)
        if args.model in ("kernel", "lr_kernel") else None,
        beta=args.beta if args.model in ("kernel", "lr_kernel") else None,
        lr=args.lr, wd=args.wd, hidden=args.hidden if args.model == "mlp2" else None)
    harness = _harness(args)
    rows = harness.run_point(ds, args.model, point, _splits(args, ds, args.seed), args.epochs)
    for r in rows:
        print(f"seed={r['seed']} val={r['val_acc']:.4f} test={r['test_acc']:.4f} "
              f"epoch={r['best_epoch']}")
    _finish(args, harness, rows)


def cmd_validate(args) -> None:
    ds = open_dataset(args.data)
    plan = _plan(args, ds)
    harness = _harness(args)
    rows = harness.run_plan(plan, ds, _splits(args, ds, plan.seeds))
    best = aggregate_rows(rows)[0]
    print(f"{ds.name} {plan.model}: {format_cell(best.mean_test, best.std_test)} "
          f"over {best.seeds} seeds at {best.point}")
    _finish(args, harness, rows, plan)


def cmd_ablate(args) -> None:
    ds = open_dataset(args.data)
    harness = _harness(args)
    if args.which == "kernel":
        plan = _plan(args, ds, "kernel")
        table, rows = ablate_kernel(plan, ds, harness)
        for r in table:
            mark = " *" if r.selected else ""
            print(f"{r.key[2]:>18}: {format_cell(r.mean_test, r.std_test)}{mark}")
    elif args.which == "repr":
        plan = _plan(args, ds, "kernel")
        reprs = args.repr if len(args.repr) == 2 else ("adjacency", "laplacian")
        table, rows = ablate_representation(plan, ds, harness, reprs=reprs)
        for d, diff in table.items():
            print(f"{d}: {reprs[0]} - {reprs[1]} = {100 * diff:+.1f} pp")
    else:
        plan = _plan(args, ds, "lr_kernel")
        table, rows = ablate_truncation(plan, ds, harness, factors=args.factors)
        for d, curve in table.items():
            for f, ratio in curve.items():
                print(f"{d} trunc={f:.2f} relative={ratio:.3f}")
    _finish(args, harness, rows, plan)


def cmd_audit(args) -> None:
    datasets = [open_dataset(d) for d in args.data]
    harness = Harness(normalize_features=args.row_normalize)
    table, rows = audit_splits(datasets, harness=harness, seeds=args.seeds, epochs=args.epochs)
    for t in table:
        print(f"{t['dataset']:>10} {t['split']:>8} {t['probe']:>12}: "
              f"{format_cell(t['mean'], t['std'])}{' *' if t['best'] else ''}")
    _finish(args, harness, rows)


def cmd_splits(args) -> None:
    ds = open_dataset(args.data)
    splits = generate_splits(ds, args.kind, args.seeds)
    save_splits(splits, args.out, ds.name)
    print(f"wrote {len(splits)} {args.kind} splits for {ds.name} to {args.out}")


def cmd_spectral(args) -> None:
    ds = open_dataset(args.data)
    sys_ = truncate(decompose(build_representation(ds, args.repr)), args.trunc)
    save_cache(sys_, args.out)
    print(f"wrote rank-{sys_.r} {args.repr} system of {ds.name} to {args.out}")


def cmd_report(args) -> None:
    rows = read_results(args.results)
    text = emit_report(rows, args.format, args.out, group_by=tuple(args.group_by.split(",")))
    if not args.out:
        sys.stdout.write(text)


def cmd_summary(args) -> None:
    print(json.dumps(summary(open_dataset(args.data))))


COMMANDS = {"train": cmd_train, "validate": cmd_validate, "ablate": cmd_ablate,
            "audit-splits": cmd_audit, "splits": cmd_splits, "spectral": cmd_spectral,
            "report": cmd_report, "summary": cmd_summary}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    COMMANDS[args.command](args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
