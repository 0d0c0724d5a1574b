"""Validated accuracy of every model family on every available benchmark.

Each (dataset, model) pair is grid searched over its hyperparameters with selection by
mean validation accuracy; the report shows mean(std) test accuracy over the seeds.

    python scripts/reproduce_headline.py --data-root data --out results/headline
    python scripts/reproduce_headline.py --datasets sbm:60,60,60:0.2:0.02:16 --epochs 100 --quick
"""

import sys

from _common import datasets, grid_overrides, harness, parser
from lrkernel.filters import KERNELS
from lrkernel.harness import ExperimentPlan, emit_report, run_validation, write_manifest, write_results
from lrkernel.representation import KINDS

MODELS = {
    "linear": {},
    "mlp2": {},
    "prop_linear": dict(reprs=KINDS),
    "kernel": dict(reprs=("adjacency", "laplacian"), kernels=KERNELS, betas=(0.0, 1.0)),
    "lr_kernel": dict(reprs=("adjacency", "laplacian"), kernels=KERNELS, truncs=(0.5, 0.9)),
}


def main(argv=None):
    ap = parser(__doc__)
    ap.add_argument("--models", default=",".join(MODELS))
    args = ap.parse_args(argv)
    h = harness(args)
    rows = []
    for ds in datasets(args):
        for model in args.models.split(","):
            plan = ExperimentPlan(ds.name, model, **MODELS[model], **grid_overrides(args))
            agg, new = run_validation(plan, ds, h)
            print(f"{ds.name:10s} {model:12s} {100 * agg.mean_test:5.1f} +- {100 * agg.std_test:4.1f}")
            rows.extend(new)
            write_results(new, args.out / "results.csv", append=True)
    if rows:
        print(emit_report(rows, "markdown", args.out / "headline.md"))
        write_manifest(h, args.out / "manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
