"""Fixed-hyperparameter XW and AXW probes under each split convention.

    python scripts/audit_splits.py --out results/audit
"""

import sys

from _common import datasets, harness, parser
from lrkernel.cli import parse_ints
from lrkernel.harness import audit_splits, format_cell, write_manifest, write_results


def main(argv=None):
    args = parser(__doc__).parse_args(argv)
    h = harness(args)
    table, rows = audit_splits(list(datasets(args)), harness=h, seeds=parse_ints(args.seeds),
                               epochs=args.epochs)
    for t in table:
        mark = "*" if t["best"] else " "
        print(f"{t['dataset']:10s} {t['split']:9s} {t['probe']:12s} {format_cell(t['mean'], t['std'])}{mark}")
    write_results(rows, args.out / "results.csv", append=True)
    write_manifest(h, args.out / "manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
