"""Ordered eigen/singular systems, truncation, and the binary cache format.

Cache layout (little endian)::

    b"SPECSYS1" | u64 n | u64 r | u8 symmetric | f64 values[r] | f64 U[n, r] | f64 V[n, r] | u64 checksum

The checksum is an 8-byte BLAKE2b digest of every byte between the magic and
the checksum itself.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .representation import GraphMatrix

MAGIC = b"SPECSYS1"
_HEADER = struct.Struct("<QQB")


class SpectralError(RuntimeError):
    pass


class CacheError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralSystem:
    U: np.ndarray
    values: np.ndarray
    V: np.ndarray
    symmetric: bool
    source_kind: str | None = None
    factor: float = 0.0

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.values) @ self.V.T


def order_indices(values: np.ndarray) -> np.ndarray:
    """Magnitude-descending order; ties by descending signed value, then index."""
    values = np.asarray(values, dtype=np.float64)
    scale = np.abs(values).max() if values.size else 0.0
    if scale == 0.0:
        return np.arange(values.size)
    # quantise so that rounding noise does not split genuine ties
    mag = np.round(np.abs(values) / scale, 10)
    sig = np.round(values / scale, 10)
    return np.lexsort((np.arange(values.size), -sig, -mag))


def canonicalize_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flip column pairs so the largest-|.| entry of each U column is nonnegative."""
    if U.shape[1] == 0:
        return U, V
    rows = np.argmax(np.abs(U), axis=0)
    flip = np.where(U[rows, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    return U * flip, V * flip


def _finish(U, vals, V, symmetric, kind) -> SpectralSystem:
    idx = order_indices(vals)
    U, vals = U[:, idx], vals[idx]
    V = U if symmetric else V[:, idx]
    U, V = canonicalize_signs(U, V)
    if symmetric:
        V = U
    for a in (U, vals, V):
        a.setflags(write=False)
    return SpectralSystem(U=U, values=vals, V=V, symmetric=symmetric, source_kind=kind)


def decompose(M: GraphMatrix | np.ndarray, symmetric: bool | None = None) -> SpectralSystem:
    """Full dense decomposition: ``eigh`` for symmetric input, SVD otherwise."""
    if isinstance(M, GraphMatrix):
        A, kind = np.asarray(M.values, dtype=np.float64), M.kind
        symmetric = M.symmetric if symmetric is None else symmetric
    else:
        A, kind = np.asarray(M, dtype=np.float64), None
        if symmetric is None:
            symmetric = bool(np.array_equal(A, A.T))
    if not np.all(np.isfinite(A)):
        raise SpectralError("matrix has non-finite entries")
    try:
        if symmetric:
            vals, U = np.linalg.eigh(A)
            return _finish(U, vals, U, True, kind)
        U, s, Vt = scipy.linalg.svd(A, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"decomposition did not converge: {exc}") from exc
    return _finish(U, s, Vt.T.copy(), False, kind)


def decompose_top(M: GraphMatrix, r: int) -> SpectralSystem:
    """Iterative top-``r`` decomposition (ARPACK). Only worth it for small ``r``."""
    A = np.asarray(M.values, dtype=np.float64)
    n = A.shape[0]
    if r >= n - 1:
        return truncate_rank(decompose(M), r)
    # one extra mode so a tie straddling the boundary can be resolved by the
    # ordering rule
    k = min(r + 1, n - 1)
    try:
        if M.symmetric:
            vals, U = scipy.sparse.linalg.eigsh(A, k=k, which="LM", tol=1e-12)
            sys = _finish(U, vals, U, True, M.kind)
        else:
            U, s, Vt = scipy.sparse.linalg.svds(A, k=k, tol=1e-12)
            sys = _finish(U, s, Vt.T.copy(), False, M.kind)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise SpectralError(f"iterative solver did not converge: {exc}") from exc
    return truncate_rank(sys, r)


def retained_rank(n: int, factor: float) -> int:
    """r = n - floor(factor * n); the epsilon absorbs binary error in grid values like 0.35."""
    return n - math.floor(factor * n + 1e-9)


def truncate_rank(sys: SpectralSystem, r: int, factor: float | None = None) -> SpectralSystem:
    if r > sys.r:
        raise ValueError(f"cannot keep {r} modes of a rank-{sys.r} system")
    U = sys.U[:, :r]
    V = U if sys.symmetric else sys.V[:, :r]
    return replace(sys, U=U, values=sys.values[:r], V=V,
                   factor=sys.factor if factor is None else factor)


def truncate(sys: SpectralSystem, factor: float) -> SpectralSystem:
    """Drop the ``floor(factor * n)`` smallest-magnitude modes."""
    if not 0.0 <= factor < 1.0:
        raise ValueError(f"truncation factor {factor} outside [0, 1)")
    if factor < sys.factor:
        raise ValueError(f"system already truncated at {sys.factor}; cannot widen to {factor}")
    if factor == sys.factor:
        return sys
    return truncate_rank(sys, retained_rank(sys.n, factor), factor)


def _payload(sys: SpectralSystem) -> bytes:
    le = np.dtype("<f8")
    V = sys.U if sys.symmetric else sys.V
    return b"".join([
        _HEADER.pack(sys.n, sys.r, int(sys.symmetric)),
        np.ascontiguousarray(sys.values, dtype=le).tobytes(),
        np.ascontiguousarray(sys.U, dtype=le).tobytes(),
        np.ascontiguousarray(V, dtype=le).tobytes(),
    ])


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def save_cache(sys: SpectralSystem, path) -> None:
    payload = _payload(sys)
    Path(path).write_bytes(MAGIC + payload + _checksum(payload))


def load_cache(path, factor: float = 0.0, source_kind: str | None = None) -> SpectralSystem:
    """Read a cache file; ``factor`` > 0 truncates after loading."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + _HEADER.size + 8:
        raise CacheError("cache file truncated")
    magic = raw[: len(MAGIC)]
    if magic != MAGIC:
        if magic[:7] == MAGIC[:7]:
            raise CacheError(f"unsupported cache version {magic[7:]!r}")
        raise CacheError("not a spectral cache file")
    payload, digest = raw[len(MAGIC):-8], raw[-8:]
    if _checksum(payload) != digest:
        raise CacheError("checksum mismatch")
    n, r, sym = _HEADER.unpack_from(payload)
    expected = _HEADER.size + 8 * (r + 2 * n * r)
    if len(payload) != expected:
        raise CacheError(f"payload is {len(payload)} bytes, header implies {expected}")
    off = _HEADER.size
    values = np.frombuffer(payload, "<f8", r, off).astype(np.float64)
    off += 8 * r
    U = np.frombuffer(payload, "<f8", n * r, off).astype(np.float64).reshape(n, r)
    off += 8 * n * r
    V = np.frombuffer(payload, "<f8", n * r, off).astype(np.float64).reshape(n, r)
    symmetric = bool(sym)
    if symmetric:
        V = U
    for a in (U, values, V):
        a.setflags(write=False)
    sys = SpectralSystem(U=U, values=values, V=V, symmetric=symmetric,
                         source_kind=source_kind,
                         factor=0.0 if r == n else (n - r) / n)
    return truncate(sys, factor) if factor > sys.factor else sys
