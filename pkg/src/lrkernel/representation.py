"""Dense matrix representations of a graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

KINDS = ("adjacency", "laplacian", "norm_adjacency", "norm_laplacian")
ALIASES = {"adj": "adjacency", "lap": "laplacian",
           "nadj": "norm_adjacency", "nlap": "norm_laplacian"}


def repr_kind(tag: str) -> str:
    kind = ALIASES.get(tag, tag)
    if kind not in KINDS:
        raise ValueError(f"unknown representation {tag!r}")
    return kind


@dataclass(frozen=True)
class GraphMatrix:
    values: np.ndarray
    symmetric: bool
    kind: str


def adjacency_matrix(ds: Dataset) -> np.ndarray:
    # row = destination, so (A @ X)[i] sums features over in-neighbours of i
    A = np.zeros((ds.n, ds.n))
    if ds.num_edges:
        src, dst = ds.edges[:, 0], ds.edges[:, 1]
        A[dst, src] = 1.0
        if not ds.directed:
            A[src, dst] = 1.0
    return A


def _inv_sqrt(deg: np.ndarray) -> np.ndarray:
    out = np.zeros_like(deg)
    pos = deg > 0
    out[pos] = 1.0 / np.sqrt(deg[pos])
    return out


def build_representation(ds: Dataset, kind: str) -> GraphMatrix:
    kind = repr_kind(kind)
    A = adjacency_matrix(ds)
    deg = A.sum(axis=0)  # column sums
    if kind == "adjacency":
        M = A
    elif kind == "laplacian":
        M = np.diag(deg) - A
    else:
        s = _inv_sqrt(deg)
        M = s[:, None] * A * s[None, :]
        if kind == "norm_laplacian":
            M = np.eye(ds.n) - M
    M.setflags(write=False)
    return GraphMatrix(values=M, symmetric=not ds.directed, kind=kind)
