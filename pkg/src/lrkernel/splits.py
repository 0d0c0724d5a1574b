"""Train/validation/test split conventions: sparse, public, dense, balanced."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset

SPLIT_KINDS = ("sparse", "public", "dense", "balanced")
SPARSE_PER_CLASS = 20
SPARSE_TEST = 1000
PUBLIC_VAL = 500
DEFAULT_SEEDS = tuple(range(10))


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSet:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    kind: str
    seed: int

    def __post_init__(self):
        for name in ("train", "val", "test"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.int64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, SplitSet):
            return NotImplemented
        return (self.kind == other.kind and self.seed == other.seed
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("train", "val", "test")))

    def validate(self, n: int) -> None:
        parts = [self.train, self.val, self.test]
        allidx = np.concatenate(parts)
        if allidx.size and (allidx.min() < 0 or allidx.max() >= n):
            raise SplitError(f"split index out of range for n={n}")
        if np.unique(allidx).size != allidx.size:
            raise SplitError("train/val/test overlap")


def split_fractions(m: int) -> tuple[int, int, int]:
    """60/20/20 with floors on train and val; remainder goes to test."""
    n_train = (6 * m) // 10
    n_val = (2 * m) // 10
    return n_train, n_val, m - n_train - n_val


def _class_members(ds: Dataset) -> list[np.ndarray]:
    return [np.flatnonzero(ds.labels == c) for c in range(ds.C)]


def make_sparse(ds: Dataset, seed: int, with_val: bool = False, kind: str = "sparse") -> SplitSet:
    """20 train nodes per class, 1000 test nodes, and optionally 500 validation nodes."""
    rng = np.random.default_rng(seed)
    members = _class_members(ds)
    for c, idx in enumerate(members):
        if idx.size < SPARSE_PER_CLASS:
            raise SplitError(f"class {c} has {idx.size} nodes, need {SPARSE_PER_CLASS}")
    need = SPARSE_PER_CLASS * ds.C + SPARSE_TEST + (PUBLIC_VAL if with_val else 0)
    if ds.n < need:
        raise SplitError(f"n={ds.n} is smaller than the {need} nodes the split needs")
    train = np.concatenate([rng.choice(idx, SPARSE_PER_CLASS, replace=False) for idx in members])
    rest = rng.permutation(np.setdiff1d(np.arange(ds.n), train))
    test = rest[:SPARSE_TEST]
    val = rest[SPARSE_TEST:SPARSE_TEST + PUBLIC_VAL] if with_val else np.zeros(0, np.int64)
    return SplitSet(train, val, test, kind, seed)


def make_public(ds: Dataset) -> SplitSet:
    """Sparse split with 500 validation nodes, pinned to seed 0."""
    return make_sparse(ds, 0, with_val=True, kind="public")


def make_dense(ds: Dataset, seed: int) -> SplitSet:
    if ds.n < 5:
        raise SplitError("dense split needs n >= 5")
    perm = np.random.default_rng(seed).permutation(ds.n)
    n_train, n_val, _ = split_fractions(ds.n)
    return SplitSet(perm[:n_train], perm[n_train:n_train + n_val],
                    perm[n_train + n_val:], "dense", seed)


def make_balanced(ds: Dataset, seed: int) -> SplitSet:
    """Per-class 60/20/20 partitions, collected across classes."""
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for c, idx in enumerate(_class_members(ds)):
        if idx.size < 5:
            raise SplitError(f"class {c} has {idx.size} nodes, need >= 5")
        perm = rng.permutation(idx)
        n_train, n_val, _ = split_fractions(idx.size)
        parts[0].append(perm[:n_train])
        parts[1].append(perm[n_train:n_train + n_val])
        parts[2].append(perm[n_train + n_val:])
    return SplitSet(*(np.concatenate(p) for p in parts), "balanced", seed)


def make_split(ds: Dataset, kind: str, seed: int) -> SplitSet:
    if kind == "sparse":
        return make_sparse(ds, seed)
    if kind == "public":
        return make_public(ds)
    if kind == "dense":
        return make_dense(ds, seed)
    if kind == "balanced":
        return make_balanced(ds, seed)
    raise ValueError(f"unknown split kind {kind!r}")


def generate_splits(ds: Dataset, kind: str, seeds=DEFAULT_SEEDS) -> list[SplitSet]:
    if kind == "public":
        return [make_public(ds)]
    return [make_split(ds, kind, s) for s in seeds]


def save_splits(splits: list[SplitSet], path, dataset: str) -> None:
    kinds = {s.kind for s in splits}
    if len(kinds) > 1:
        raise SplitError(f"mixed split kinds {sorted(kinds)}")
    doc = {
        "dataset": dataset,
        "kind": kinds.pop() if kinds else "",
        "seeds": [{"seed": s.seed, "train": s.train.tolist(), "val": s.val.tolist(),
                   "test": s.test.tolist()} for s in splits],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_splits(path, ds: Dataset | None = None) -> list[SplitSet]:
    """Read a splits JSON file; with ``ds`` given, indices are checked against it."""
    try:
        doc = json.loads(Path(path).read_text())
        kind = doc["kind"]
        splits = [SplitSet(np.asarray(e["train"], dtype=np.int64),
                           np.asarray(e["val"], dtype=np.int64),
                           np.asarray(e["test"], dtype=np.int64), kind, int(e["seed"]))
                  for e in doc["seeds"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SplitError(f"malformed splits file {path}: {exc}") from exc
    if ds is not None:
        for s in splits:
            s.validate(ds.n)
    return splits


def load_mask_files(directory, ds: Dataset | None = None, kind: str = "public") -> SplitSet:
    """Load externally provided train.txt / val.txt / test.txt (one index per line)."""
    directory = Path(directory)
    arrays = []
    for name in ("train", "val", "test"):
        path = directory / f"{name}.txt"
        if not path.exists():
            raise SplitError(f"missing mask file {path}")
        arrays.append(np.array([int(t) for t in path.read_text().split()], dtype=np.int64))
    split = SplitSet(*arrays, kind=kind, seed=0)
    if ds is not None:
        split.validate(ds.n)
    return split
