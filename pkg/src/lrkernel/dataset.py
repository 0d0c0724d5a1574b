"""Graph datasets: on-disk TSV/JSON format, validation, and SBM generation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# nodes, edges, features, classes
BENCHMARK_STATS = {
    "cora": (2708, 5429, 1433, 7),
    "citeseer": (3327, 4732, 3703, 6),
    "pubmed": (19717, 44338, 500, 3),
    "chameleon": (2277, 36101, 2325, 5),
    "squirrel": (5201, 217073, 2089, 5),
    "actor": (7600, 33544, 931, 5),
    "cornell": (183, 295, 1703, 5),
    "texas": (183, 309, 1703, 5),
    "wisconsin": (251, 499, 1703, 5),
}

DIRECTED = {"chameleon", "squirrel", "actor"}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    name: str
    n: int
    d: int
    C: int
    directed: bool
    features: np.ndarray
    labels: np.ndarray
    edges: np.ndarray  # (m, 2) int64, canonical

    def __post_init__(self):
        self.features.setflags(write=False)
        self.labels.setflags(write=False)
        self.edges.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])


def canonical_edges(edges, directed: bool) -> np.ndarray:
    """Dedupe edges; undirected pairs are stored once as (min, max). Rows sorted."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if not directed:
        e = np.sort(e, axis=1)
    if e.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(e, axis=0)


def make_dataset(name, features, labels, edges, directed=False, C=None) -> Dataset:
    """Validate raw arrays and build an immutable Dataset."""
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DatasetError("features must be a 2-D array")
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, d = X.shape
    if y.shape[0] != n:
        raise DatasetError(f"labels has {y.shape[0]} entries, expected {n}")
    if C is None:
        C = int(y.max()) + 1 if n else 0
    if n and (y.min() < 0 or y.max() >= C):
        raise DatasetError(f"label out of range [0, {C})")
    e = canonical_edges(edges, directed)
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise DatasetError(f"edge {tuple(int(v) for v in bad)} out of range for n={n}")
    return Dataset(name=name, n=n, d=d, C=int(C), directed=bool(directed),
                   features=X, labels=y, edges=e)


def _read_lines(path: Path) -> list[str]:
    if not path.exists():
        raise DatasetError(f"missing file: {path}")
    return [ln for ln in path.read_text().splitlines() if ln.strip()]


def load_dataset(directory) -> Dataset:
    """Load meta.json, features.tsv, labels.tsv, edges.tsv from ``directory``."""
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise DatasetError(f"missing file: {meta_path}")
    meta = json.loads(meta_path.read_text())
    n, d, C = int(meta["n"]), int(meta["d"]), int(meta["C"])

    feat_lines = _read_lines(directory / "features.tsv")
    if len(feat_lines) != n:
        raise DatasetError(f"features.tsv has {len(feat_lines)} rows, meta says n={n}")
    X = np.zeros((n, d))
    for i, ln in enumerate(feat_lines):
        row = ln.split("\t")
        if len(row) != d:
            raise DatasetError(f"features.tsv row {i} has {len(row)} columns, meta says d={d}")
        X[i] = [float(v) for v in row]

    lab_lines = _read_lines(directory / "labels.tsv")
    if len(lab_lines) != n:
        raise DatasetError(f"labels.tsv has {len(lab_lines)} rows, meta says n={n}")
    y = np.array([int(v) for v in lab_lines], dtype=np.int64)

    edge_lines = _read_lines(directory / "edges.tsv")
    edges = np.array([[int(t) for t in ln.split()] for ln in edge_lines],
                     dtype=np.int64).reshape(-1, 2)
    return make_dataset(meta["name"], X, y, edges, directed=bool(meta["directed"]), C=C)


def _fmt(v: float) -> str:
    return repr(float(v)) if math.isfinite(v) else str(v)


def write_dataset(ds: Dataset, directory) -> None:
    """Write ``ds`` in canonical form (sorted canonical edges, shortest round-trip floats)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {"name": ds.name, "n": ds.n, "d": ds.d, "C": ds.C, "directed": ds.directed}
    (directory / "meta.json").write_text(json.dumps(meta) + "\n")
    with open(directory / "features.tsv", "w") as f:
        for row in ds.features:
            f.write("\t".join(_fmt(v) for v in row) + "\n")
    with open(directory / "labels.tsv", "w") as f:
        f.writelines(f"{int(v)}\n" for v in ds.labels)
    with open(directory / "edges.tsv", "w") as f:
        f.writelines(f"{int(s)}\t{int(t)}\n" for s, t in ds.edges)


def summary(ds: Dataset) -> dict:
    """Summary statistics; undirected edges are counted once."""
    return {"nodes": ds.n, "edges": ds.num_edges, "features": ds.d, "classes": ds.C}


@dataclass
class SbmConfig:
    block_sizes: list[int]
    intra_p: float
    inter_q: float
    feature_mode: str = "noise"  # noise | block-means
    feature_dim: int = 8
    seed: int = 0
    name: str = field(default="sbm")

    def __post_init__(self):
        if not self.block_sizes or any(b <= 0 for b in self.block_sizes):
            raise ValueError("block sizes must be positive")
        if not 0.0 <= self.inter_q <= self.intra_p <= 1.0:
            raise ValueError("need 0 <= inter_q <= intra_p <= 1")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.feature_mode not in ("noise", "block-means"):
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")


def generate_sbm(cfg: SbmConfig) -> Dataset:
    """Undirected stochastic block model; labels are block memberships."""
    rng = np.random.default_rng(cfg.seed)
    labels = np.repeat(np.arange(len(cfg.block_sizes)), cfg.block_sizes)
    n = labels.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], cfg.intra_p, cfg.inter_q)
    keep = rng.random(iu.shape[0]) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    noise = rng.standard_normal((n, cfg.feature_dim))
    if cfg.feature_mode == "block-means":
        means = rng.standard_normal((len(cfg.block_sizes), cfg.feature_dim))
        X = means[labels] + noise
    else:
        X = noise
    return make_dataset(cfg.name, X, labels, edges, directed=False,
                        C=len(cfg.block_sizes))
