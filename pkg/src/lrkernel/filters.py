"""Kernels over spectral values and the propagation operators built from them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralSystem

KERNELS = ("identity", "linear", "sobolev_compact", "sobolev_unbounded", "gaussian_rbf")
ALIASES = {"id": "identity", "lin": "linear", "sobc": "sobolev_compact",
           "sobu": "sobolev_unbounded", "rbf": "gaussian_rbf"}
BANDWIDTH_KERNELS = ("sobolev_unbounded", "gaussian_rbf")
GAMMA_GRID = (0.01, 0.1, 1.0, 10.0)


def kernel_kind(tag: str) -> str:
    kind = ALIASES.get(tag, tag)
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel {tag!r}")
    return kind


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", kernel_kind(self.kind))
        if self.kind in BANDWIDTH_KERNELS:
            if self.gamma is None or not self.gamma > 0:
                raise ValueError(f"{self.kind} needs a positive gamma")
        elif self.gamma is not None:
            raise ValueError(f"{self.kind} takes no gamma")


@dataclass(frozen=True)
class KernelMatrix:
    K: np.ndarray
    spec: KernelSpec
    values_used: np.ndarray

    @property
    def r(self) -> int:
        return self.K.shape[0]


def _pairwise(spec: KernelSpec, s, t):
    if spec.kind == "linear":
        return s * t
    if spec.kind == "sobolev_compact":
        return np.minimum(s, t)
    if spec.kind == "sobolev_unbounded":
        return np.exp(-spec.gamma * np.abs(s - t))
    if spec.kind == "gaussian_rbf":
        return np.exp(-spec.gamma * (s - t) ** 2)
    raise ValueError("identity kernel is defined on indices, not values")


def kernel_eval(spec: KernelSpec, s: float, t: float) -> float:
    return float(_pairwise(spec, float(s), float(t)))


def kernel_matrix(spec: KernelSpec, values) -> KernelMatrix:
    v = np.asarray(values, dtype=np.float64)
    if spec.kind == "identity":
        K = np.eye(v.shape[0])
    else:
        K = _pairwise(spec, v[:, None], v[None, :])
    K.setflags(write=False)
    return KernelMatrix(K=K, spec=spec, values_used=v)


def filter_values(K: KernelMatrix, alpha) -> np.ndarray:
    """Spectral response h = K @ alpha."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (K.r,):
        raise ValueError(f"alpha has shape {alpha.shape}, kernel is {K.r}x{K.r}")
    return K.K @ alpha


def build_propagation(sys: SpectralSystem, K: KernelMatrix, alpha) -> np.ndarray:
    """Dense U diag(K alpha) V^T. Training never calls this; it is the reference path."""
    if K.r != sys.r:
        raise ValueError(f"kernel rank {K.r} does not match system rank {sys.r}")
    h = filter_values(K, alpha)
    return (sys.U * h) @ sys.V.T


def regularize(P: np.ndarray, beta: float) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    out = P.copy()
    out[np.diag_indices_from(out)] += beta
    return out
