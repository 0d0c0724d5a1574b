"""One-layer linear and spectral-kernel predictors, plus the MLP2 baseline.

All kernel-kind forwards run in factored order, ``U (diag(h) (V^T (X W))) + beta X W``,
so no n x n matrix is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .filters import KernelMatrix, filter_values
from .spectral import SpectralSystem

MODEL_KINDS = ("linear", "prop_linear", "kernel", "lr_kernel", "mlp2")
ALIASES = {"plin": "prop_linear", "lrkernel": "lr_kernel"}
HIDDEN_GRID = (16, 64, 256)
ALPHA_RIDGE = 1e-6


def model_kind(tag: str) -> str:
    kind = ALIASES.get(tag, tag)
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model {tag!r}")
    return kind


@dataclass
class ModelParams:
    W: np.ndarray | None = None
    alpha: np.ndarray | None = None
    W1: np.ndarray | None = None
    b1: np.ndarray | None = None
    W2: np.ndarray | None = None
    b2: np.ndarray | None = None

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)
                if getattr(self, f.name) is not None}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.arrays().items()})


@dataclass
class ForwardContext:
    X: np.ndarray
    P: np.ndarray | None = None
    system: SpectralSystem | None = None
    kernel: KernelMatrix | None = None
    beta: float = 0.0
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.system is not None and self.system.n != self.X.shape[0]:
            raise ValueError("system and features disagree on n")
        if self.kernel is not None and self.system is not None and self.kernel.r != self.system.r:
            raise ValueError("kernel rank does not match system rank")
        if self.P is not None and self.P.shape != (self.X.shape[0],) * 2:
            raise ValueError("P must be n x n")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def projected_features(self) -> np.ndarray:
        """V^T X (r x d), reused every step since V and X are constant."""
        if "VtX" not in self.cache:
            self.cache["VtX"] = self.system.V.T @ self.X
        return self.cache["VtX"]

    def propagated_features(self) -> np.ndarray:
        if "PX" not in self.cache:
            self.cache["PX"] = self.P @ self.X
        return self.cache["PX"]


def _check(kind: str, params: ModelParams, ctx: ForwardContext) -> None:
    d = ctx.X.shape[1]
    if kind == "mlp2":
        if params.W1 is None or params.W1.shape[0] != d:
            raise ValueError("W1 must be d x h")
        return
    if params.W is None or params.W.shape[0] != d:
        raise ValueError(f"W must have {d} rows")
    if kind == "prop_linear" and ctx.P is None:
        raise ValueError("prop_linear needs a propagation matrix")
    if kind in ("kernel", "lr_kernel"):
        if ctx.system is None or ctx.kernel is None:
            raise ValueError(f"{kind} needs a spectral system and kernel matrix")
        if params.alpha is None or params.alpha.shape != (ctx.system.r,):
            raise ValueError("alpha length must equal the retained rank")


def forward(kind: str, params: ModelParams, ctx: ForwardContext) -> np.ndarray:
    kind = model_kind(kind)
    _check(kind, params, ctx)
    X = ctx.X
    if kind == "linear":
        return X @ params.W
    if kind == "prop_linear":
        return ctx.propagated_features() @ params.W
    if kind == "mlp2":
        H = np.maximum(X @ params.W1 + params.b1, 0.0)
        return H @ params.W2 + params.b2
    h = filter_values(ctx.kernel, params.alpha)
    T = ctx.projected_features() @ params.W  # r x C
    out = ctx.system.U @ (h[:, None] * T)
    if ctx.beta:
        out = out + ctx.beta * (X @ params.W)
    return out


def backward(kind: str, params: ModelParams, ctx: ForwardContext, G: np.ndarray) -> dict:
    """Gradients of a loss w.r.t. parameters given G = dLoss/dlogits."""
    kind = model_kind(kind)
    _check(kind, params, ctx)
    X = ctx.X
    G = np.asarray(G, dtype=np.float64)
    if G.shape[0] != ctx.n:
        raise ValueError(f"G has {G.shape[0]} rows, expected {ctx.n}")
    if kind == "linear":
        return {"W": X.T @ G}
    if kind == "prop_linear":
        return {"W": ctx.propagated_features().T @ G}
    if kind == "mlp2":
        pre = X @ params.W1 + params.b1
        H = np.maximum(pre, 0.0)
        dH = (G @ params.W2.T) * (pre > 0)
        return {"W1": X.T @ dH, "b1": dH.sum(axis=0),
                "W2": H.T @ G, "b2": G.sum(axis=0)}
    K = ctx.kernel.K
    h = K @ params.alpha
    VtX = ctx.projected_features()
    UtG = ctx.system.U.T @ G  # r x C
    d_h = np.einsum("ic,ic->i", UtG, VtX @ params.W)
    dW = VtX.T @ (h[:, None] * UtG)
    if ctx.beta:
        dW = dW + ctx.beta * (X.T @ G)
    return {"W": dW, "alpha": K.T @ d_h}


def init_params(kind: str, d: int, C: int, seed: int, *, hidden: int = 64,
                system: SpectralSystem | None = None,
                kernel: KernelMatrix | None = None) -> ModelParams:
    """Uniform(+-1/sqrt(fan_in)) weights; alpha starts where K alpha reproduces the spectrum."""
    kind = model_kind(kind)
    rng = np.random.default_rng(seed)

    def uniform(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    if kind == "mlp2":
        return ModelParams(W1=uniform(d, (d, hidden)), b1=np.zeros(hidden),
                           W2=uniform(hidden, (hidden, C)), b2=np.zeros(C))
    params = ModelParams(W=uniform(d, (d, C)))
    if kind in ("kernel", "lr_kernel"):
        if kernel is None:
            raise ValueError(f"{kind} needs a kernel matrix to initialise alpha")
        params.alpha = init_alpha(kernel)
    return params


def init_alpha(kernel: KernelMatrix) -> np.ndarray:
    vals = kernel.values_used
    if kernel.spec.kind == "identity":
        return vals.copy()
    K = kernel.K
    return np.linalg.solve(K.T @ K + ALPHA_RIDGE * np.eye(K.shape[0]), K.T @ vals)


def sensing_form(system: SpectralSystem, kernel: KernelMatrix, alpha, weights, X, j: int) -> float:
    """Prediction at node j written as <sum_i k_i^j x_i^T, alpha weights^T>_F.

    k_i^j = U[j, i] K e_i and x_i = X^T v_i. Only defined for scalar outputs.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim == 2:
        if weights.shape[1] != 1:
            raise ValueError("sensing form needs a single output column (C = 1)")
        weights = weights[:, 0]
    elif weights.ndim != 1:
        raise ValueError("weights must be a vector")
    alpha = np.asarray(alpha, dtype=np.float64)
    K = kernel.K
    k_tilde = K * system.U[j][None, :]          # column i is U[j, i] K e_i
    x_tilde = np.asarray(X, dtype=np.float64).T @ system.V  # column i is X^T v_i
    measurement = k_tilde @ x_tilde.T           # r x d
    return float(np.sum(measurement * np.outer(alpha, weights)))
