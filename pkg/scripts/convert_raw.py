"""Convert public raw graph files into the loader's directory format.

Two raw layouts are understood:

* ``geom``: ``out1_node_feature_label.txt`` (tab separated ``id``, comma separated
  features, ``label``) plus ``out1_graph_edges.txt`` (tab separated ``src``, ``dst``).
  Used for chameleon, squirrel, actor (``film``), cornell, texas and wisconsin.
* ``planetoid``: the pickled ``ind.<name>.{x,tx,allx,y,ty,ally,graph}`` files plus
  ``ind.<name>.test.index``. Used for cora, citeseer and pubmed.

    python scripts/convert_raw.py geom RAW_DIR data/chameleon --name chameleon
    python scripts/convert_raw.py planetoid RAW_DIR data/cora --name cora
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from lrkernel.dataset import DIRECTED, make_dataset, summary, write_dataset


def read_geom(raw: Path, name: str, directed: bool):
    rows = (raw / "out1_node_feature_label.txt").read_text().splitlines()[1:]
    ids, feats, labels = [], [], []
    for ln in rows:
        i, f, y = ln.split("\t")
        ids.append(int(i))
        labels.append(int(y))
        feats.append([float(v) for v in f.split(",")])
    order = np.argsort(ids)
    if not np.array_equal(np.asarray(ids)[order], np.arange(len(ids))):
        raise ValueError("node ids must be 0..n-1")
    feats = [feats[k] for k in order]
    y = np.asarray(labels)[order]
    # actor lists the indices of its nonzero binary features instead of dense rows
    if name == "actor" or len({len(f) for f in feats}) > 1:
        X = _index_features(feats)
    else:
        X = np.asarray(feats)
    edges = np.loadtxt(raw / "out1_graph_edges.txt", skiprows=1, dtype=np.int64, ndmin=2)
    return make_dataset(name, X, y, edges, directed=directed)


def _index_features(rows):
    d = int(max(max(r) for r in rows if r)) + 1
    X = np.zeros((len(rows), d))
    for i, r in enumerate(rows):
        X[i, np.asarray(r, dtype=np.int64)] = 1.0
    return X


def _unpickle(path: Path):
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def read_planetoid(raw: Path, name: str):
    part = {k: _unpickle(raw / f"ind.{name}.{k}") for k in ("x", "tx", "allx", "y", "ty", "ally", "graph")}
    test_idx = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64, ndmin=1)
    allx, ally = sp.csr_matrix(part["allx"]), np.asarray(part["ally"])
    n = max(allx.shape[0], int(test_idx.max()) + 1)
    # row i of tx/ty belongs to node test_idx[i]; nodes missing from both blocks
    # (isolated citeseer test nodes) keep zero features and class 0
    X = np.zeros((n, allx.shape[1]))
    Y = np.zeros((n, ally.shape[1]))
    X[:allx.shape[0]] = allx.toarray()
    Y[:ally.shape[0]] = ally
    X[test_idx] = sp.csr_matrix(part["tx"]).toarray()
    Y[test_idx] = np.asarray(part["ty"])
    y = Y.argmax(1)
    edges = [(s, t) for s, nbrs in part["graph"].items() for t in nbrs if s < n and t < n]
    return make_dataset(name, X, y, edges, directed=False)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("layout", choices=("geom", "planetoid"))
    ap.add_argument("raw", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--name", required=True)
    ap.add_argument("--directed", action=argparse.BooleanOptionalAction, default=None,
                    help="override the default directedness for NAME")
    args = ap.parse_args(argv)
    directed = args.name in DIRECTED if args.directed is None else args.directed
    if args.layout == "geom":
        ds = read_geom(args.raw, args.name, directed)
    else:
        ds = read_planetoid(args.raw, args.name)
    write_dataset(ds, args.out)
    print(summary(ds))
    return 0


if __name__ == "__main__":
    sys.exit(main())
