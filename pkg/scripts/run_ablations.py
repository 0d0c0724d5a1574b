"""Kernel, representation and truncation ablations on every available benchmark.

    python scripts/run_ablations.py --which kernel,repr,trunc --out results/ablations
"""

import sys

from _common import datasets, grid_overrides, harness, parser
from lrkernel.filters import KERNELS
from lrkernel.harness import (
    TRUNC_GRID, ExperimentPlan, ablate_kernel, ablate_representation, ablate_truncation,
    format_cell, write_manifest, write_results,
)


def main(argv=None):
    ap = parser(__doc__)
    ap.add_argument("--which", default="kernel,repr,trunc")
    ap.add_argument("--factors", default=",".join(map(str, TRUNC_GRID)))
    args = ap.parse_args(argv)
    which = set(args.which.split(","))
    factors = tuple(float(f) for f in args.factors.split(","))
    h = harness(args)
    for ds in datasets(args):
        base = grid_overrides(args)
        rows = []
        if "kernel" in which:
            table, new = ablate_kernel(ExperimentPlan(ds.name, "kernel", **base), ds, h)
            rows += new
            for r in table:
                mark = "*" if r.selected else ""
                print(f"{ds.name:10s} kernel={r.key[2]:18s} {format_cell(r.mean_test, r.std_test)}{mark}")
        if "repr" in which:
            plan = ExperimentPlan(ds.name, "kernel", kernels=KERNELS, **base)
            diff, new = ablate_representation(plan, ds, h)
            rows += new
            print(f"{ds.name:10s} adjacency - laplacian: {100 * diff.get(ds.name, float('nan')):+.1f} pp")
        if "trunc" in which:
            plan = ExperimentPlan(ds.name, "lr_kernel", kernels=KERNELS, **base)
            curve, new = ablate_truncation(plan, ds, h, factors=factors)
            rows += new
            for f, rel in curve.get(ds.name, {}).items():
                print(f"{ds.name:10s} trunc={f:.2f} relative accuracy {rel:.3f}")
        write_results(rows, args.out / "results.csv", append=True)
    write_manifest(h, args.out / "manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
