"""Dense matrix/vector primitives: sign and Metzler splits, diagonally
weighted l-inf norms and matrix measures.

Everything is plain float64 numpy. Networks of interest are small (n up
to a few thousand) and every operation here is O(n^2) dense, so there is
no sparse path.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, NonSquareError

__all__ = [
    "as_matrix",
    "as_vector",
    "as_weights",
    "positive_part",
    "negative_part",
    "metzler_part",
    "non_metzler_part",
    "weighted_linf_norm",
    "weighted_linf_opnorm",
    "weighted_linf_measure",
    "embedded_measure_identity_check",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a finite 2-D float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Validate and return `a` as a finite 1-D float64 array."""
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or Inf")
    return v


def as_weights(a, name: str = "eta") -> np.ndarray:
    """Validate a strictly positive weight vector."""
    v = as_vector(a, name)
    if not np.all(v > 0):
        raise ValueError(f"{name} entries must be strictly positive")
    return v


def _square(a, name: str = "matrix") -> np.ndarray:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise NonSquareError(f"{name} must be square, got shape {m.shape}")
    return m


def positive_part(m) -> np.ndarray:
    """Entrywise max(M, 0)."""
    return np.maximum(as_matrix(m), 0.0)


def negative_part(m) -> np.ndarray:
    """Entrywise min(M, 0); positive_part + negative_part == M exactly."""
    return np.minimum(as_matrix(m), 0.0)


def metzler_part(a) -> np.ndarray:
    """Keep the diagonal and the nonnegative off-diagonal entries of A.

    The result is a Metzler matrix (all off-diagonal entries >= 0).
    """
    m = _square(a, "A")
    keep = (m >= 0) | np.eye(m.shape[0], dtype=bool)
    return np.where(keep, m, 0.0)


def non_metzler_part(a) -> np.ndarray:
    """A minus its Metzler part: entrywise <= 0 with zero diagonal."""
    m = _square(a, "A")
    return m - metzler_part(m)


def weighted_linf_norm(v, eta) -> float:
    """max_i |v_i| / eta_i."""
    x = as_vector(v, "v")
    w = as_weights(eta)
    if x.shape != w.shape:
        raise DimensionMismatchError(f"v has dim {x.shape[0]}, eta has dim {w.shape[0]}")
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x) / w))


def weighted_linf_opnorm(m, row_weights=None, col_weights=None) -> float:
    """Operator norm of M mapping (l-inf, col_weights) to (l-inf, row_weights).

    Weights scale as diag(w)^-1 norms: ||x|| = max |x_i|/w_i. With both
    weights absent this is the plain max-row-sum norm.
    """
    a = np.abs(as_matrix(m, "M"))
    if col_weights is not None:
        cw = as_weights(col_weights, "col_weights")
        if cw.shape[0] != a.shape[1]:
            raise DimensionMismatchError("col_weights length must match column count")
        a = a * cw[None, :]
    if row_weights is not None:
        rw = as_weights(row_weights, "row_weights")
        if rw.shape[0] != a.shape[0]:
            raise DimensionMismatchError("row_weights length must match row count")
        a = a / rw[:, None]
    if a.size == 0:
        return 0.0
    return float(np.max(a.sum(axis=1)))


def weighted_linf_measure(a, eta) -> float:
    """Diagonally weighted l-inf matrix measure.

    mu(A) = max_i [ A_ii + sum_{j != i} (eta_j / eta_i) |A_ij| ].

    Reduces to the standard l-inf measure (logarithmic norm) for eta = 1.
    """
    m = _square(a, "A")
    w = as_weights(eta)
    if w.shape[0] != m.shape[0]:
        raise DimensionMismatchError(f"A is {m.shape[0]}x{m.shape[0]}, eta has dim {w.shape[0]}")
    scaled = np.abs(m) * (w[None, :] / w[:, None])
    np.fill_diagonal(scaled, 0.0)
    return float(np.max(np.diagonal(m) + scaled.sum(axis=1)))


def embedded_measure_identity_check(a, eta, tol: float = 1e-12) -> bool:
    """Check mu(A) against the measure of the doubled Metzler-split block matrix.

    The 2n x 2n matrix [[up, low], [low, up]] built from the Metzler split
    (up = metzler_part(A), low = non_metzler_part(A)), measured with the
    duplicated weight (eta, eta), has the same measure as A itself. Returns
    True when the two agree within `tol`.
    """
    m = _square(a, "A")
    w = as_weights(eta)
    up = metzler_part(m)
    low = m - up
    block = np.block([[up, low], [low, up]])
    eta2 = np.concatenate([w, w])
    return abs(weighted_linf_measure(m, w) - weighted_linf_measure(block, eta2)) <= tol
