"""Shared argument handling for the experiment scripts."""

import argparse
import os
from pathlib import Path

from lrkernel.cli import open_dataset, parse_ints
from lrkernel.dataset import BENCHMARK_STATS
from lrkernel.harness import Harness, SpectralCache


def parser(doc):
    ap = argparse.ArgumentParser(description=doc, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--data-root", type=Path, default=Path(os.environ.get("LRKERNEL_DATA", "data")))
    ap.add_argument("--datasets", nargs="+", default=list(BENCHMARK_STATS),
                    help="dataset names under --data-root, or sbm:... specs")
    ap.add_argument("--seeds", default="0-9")
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--quick", action="store_true", help="shrink every grid to one lr and wd")
    return ap


def datasets(args):
    """Yield the requested datasets that are present, announcing the ones that are not."""
    for name in args.datasets:
        if name.startswith("sbm:"):
            yield open_dataset(name)
        elif (args.data_root / name / "meta.json").exists():
            yield open_dataset(str(args.data_root / name))
        else:
            print(f"skip {name}: not found under {args.data_root}")


def harness(args):
    args.out.mkdir(parents=True, exist_ok=True)
    return Harness(cache=SpectralCache(args.out / "cache"))


def grid_overrides(args):
    kw = dict(seeds=tuple(parse_ints(args.seeds)), epochs=args.epochs)
    if args.quick:
        kw.update(lrs=(1e-2,), wds=(5e-4,))
    return kw
