"""Box reachability through the embedded network.

Doubling the state to an ordered pair (x_lower, x_upper) and splitting A
into its Metzler and non-Metzler parts gives a monotone embedding of the
original fixed-point map: each bound is fed the favorable combination of
bounds,

    x_lower = phi(Mz x_lower + Nz x_upper + B+ u_lower + B- u_upper + b)
    x_upper = phi(Mz x_upper + Nz x_lower + B+ u_upper + B- u_lower + b)

with Mz = metzler_part(A), Nz = non_metzler_part(A). The stacked map is a
contraction in the duplicated weighted norm whenever the original network
is well posed, and its fixed point brackets every fixed point reachable
from the input box. The cost is two forward passes worth of arithmetic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .errors import DimensionMismatchError, NotWellPosedError
from .network import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ImplicitNetwork,
    SolveDiagnostics,
    _averaged_iteration,
    _resolve_alpha,
    check_well_posedness,
)

__all__ = [
    "IntervalVector",
    "EmbeddedFixedPoint",
    "decomposition_function",
    "verify_kamke",
    "embedded_solve",
    "reach_box",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntervalVector:
    """An axis-aligned box: ordered pair of equal-length vectors."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = linalg.as_vector(self.lower, "lower")
        hi = linalg.as_vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise DimensionMismatchError("lower and upper must have equal dims")
        if not np.all(lo <= hi):
            raise ValueError("interval requires lower <= upper componentwise")
        for name, arr in (("lower", lo), ("upper", hi)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def ball(cls, center, radius: float) -> "IntervalVector":
        """The l-inf ball of the given radius around `center`."""
        if radius < 0:
            raise ValueError("radius must be >= 0")
        c = linalg.as_vector(center, "center")
        return cls(c - radius, c + radius)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, v, tol: float = 0.0) -> bool:
        x = linalg.as_vector(v, "v")
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def contains_box(self, other: "IntervalVector", tol: float = 0.0) -> bool:
        return bool(
            np.all(other.lower >= self.lower - tol) and np.all(other.upper <= self.upper + tol)
        )

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


@dataclass
class EmbeddedFixedPoint:
    """Bracketing state pair and the output box it induces."""

    x_lower: np.ndarray
    x_upper: np.ndarray
    y_box: IntervalVector
    diag: SolveDiagnostics

    def __post_init__(self):
        if not np.all(self.x_lower <= self.x_upper):
            raise ValueError("embedded fixed point must satisfy x_lower <= x_upper")


def decomposition_function(net: ImplicitNetwork, x, x_hat, u, u_hat) -> np.ndarray:
    """One block of the embedded map.

    Evaluates phi(Mz x + Nz x_hat + B+ u + B- u_hat + b). On the diagonal
    (x = x_hat, u = u_hat) this reduces exactly to the forward map
    phi(Ax + Bu + b); off the diagonal it is monotone increasing in (x, u)
    and decreasing in (x_hat, u_hat).
    """
    xv = linalg.as_vector(x, "x")
    xh = linalg.as_vector(x_hat, "x_hat")
    uv = linalg.as_vector(u, "u")
    uh = linalg.as_vector(u_hat, "u_hat")
    if xv.shape[0] != net.n or xh.shape[0] != net.n:
        raise DimensionMismatchError(f"state args must have dim {net.n}")
    if uv.shape[0] != net.r or uh.shape[0] != net.r:
        raise DimensionMismatchError(f"input args must have dim {net.r}")
    mz = linalg.metzler_part(net.A)
    nz = net.A - mz
    bp = linalg.positive_part(net.B)
    bm = net.B - bp
    return net.activation(mz @ xv + nz @ xh + bp @ uv + bm @ uh + net.b)


def verify_kamke(
    net: ImplicitNetwork,
    samples: int = 1000,
    seed: int = 0,
    decomposition: Callable[..., np.ndarray] | None = None,
) -> bool:
    """Spot-check the mixed monotonicity conditions by random sampling.

    Checks, over `samples` random tuples: agreement with the forward map on
    the diagonal (within 1e-12), monotone increase in x (off-component) and
    in u, and monotone decrease in x_hat and u_hat, using ordered random
    pairs. Returns False and logs the first counterexample found.
    `decomposition` overrides the map under test (used to verify that the
    check catches corrupted embeddings).
    """
    d = decomposition if decomposition is not None else decomposition_function
    rng = np.random.default_rng(seed)
    n, r = net.n, net.r
    slack = 1e-12
    for trial in range(samples):
        x = rng.normal(size=n) * 2.0
        x_hat = rng.normal(size=n) * 2.0
        u = rng.normal(size=r) * 2.0
        u_hat = rng.normal(size=r) * 2.0
        base = d(net, x, x_hat, u, u_hat)

        diag_val = d(net, x, x, u, u)
        fwd = net.activation(net.A @ x + net.B @ u + net.b)
        if not np.allclose(diag_val, fwd, rtol=0.0, atol=1e-12):
            log.warning("kamke violation (diagonal) at trial %d: %s vs %s", trial, diag_val, fwd)
            return False

        j = int(rng.integers(n))
        x_up = x.copy()
        x_up[j] += float(rng.uniform(0.1, 2.0))
        bumped = d(net, x_up, x_hat, u, u_hat)
        mask = np.arange(n) != j
        if np.any(bumped[mask] < base[mask] - slack):
            log.warning("kamke violation (x monotonicity) at trial %d, coord %d", trial, j)
            return False

        u_up = u + rng.uniform(0.0, 2.0, size=r)
        if np.any(d(net, x, x_hat, u_up, u_hat) < base - slack):
            log.warning("kamke violation (u monotonicity) at trial %d", trial)
            return False

        xh_up = x_hat + rng.uniform(0.0, 2.0, size=n)
        if np.any(d(net, x, xh_up, u, u_hat) > base + slack):
            log.warning("kamke violation (x_hat antitonicity) at trial %d", trial)
            return False

        uh_up = u_hat + rng.uniform(0.0, 2.0, size=r)
        if np.any(d(net, x, x_hat, u, uh_up) > base + slack):
            log.warning("kamke violation (u_hat antitonicity) at trial %d", trial)
            return False
    return True


def _solve_stacked(
    net: ImplicitNetwork,
    same_block: np.ndarray,
    cross_block: np.ndarray,
    input_box: IntervalVector,
    tol: float,
    max_iter: int,
    alpha: float | None,
    record_steps: bool,
) -> EmbeddedFixedPoint:
    """Shared engine for the embedded and IBP solvers.

    Iterates the stacked pair with the given state splitting (same-block
    feeds each bound its own block, cross-block the opposite one) from
    (0, 0), stopping on the duplicated weighted norm. The output box is
    assembled through the sign split of C.
    """
    report = check_well_posedness(net)
    if not report.well_posed:
        raise NotWellPosedError(f"measure {report.measure:.6g} >= 1")
    if input_box.dim != net.r:
        raise DimensionMismatchError(f"input box must have dim {net.r}, got {input_box.dim}")
    a = _resolve_alpha(report, alpha)

    n = net.n
    bp = linalg.positive_part(net.B)
    bm = net.B - bp
    w_lo = bp @ input_box.lower + bm @ input_box.upper + net.b
    w_hi = bp @ input_box.upper + bm @ input_box.lower + net.b
    eta2 = np.concatenate([net.weights(), net.weights()])
    phi = net.activation

    # Both blocks are evaluated with identical expression structure so a
    # degenerate box (w_lo == w_hi) keeps them bit-identical; a fused
    # (2n)x(2n) matvec would sum the blocks' terms in different orders and
    # let the pair drift apart at float precision.
    def step(z: np.ndarray) -> np.ndarray:
        lo, hi = z[:n], z[n:]
        return np.concatenate([
            phi(same_block @ lo + cross_block @ hi + w_lo),
            phi(same_block @ hi + cross_block @ lo + w_hi),
        ])

    z, diag = _averaged_iteration(step, np.zeros(2 * n), a, eta2, tol, max_iter, record_steps)
    x_lo, x_hi = z[:n], z[n:]
    gap = x_hi - x_lo
    cp = linalg.positive_part(net.C)
    cm = net.C - cp
    # Same real values as splitting C against (x_lo, x_hi) directly, but
    # adding a nonpositive and a nonnegative correction to a shared base
    # keeps the output box ordered even under last-ulp rounding.
    base = net.C @ x_lo + net.c
    y_box = IntervalVector(base + cm @ gap, base + cp @ gap)
    return EmbeddedFixedPoint(x_lower=x_lo, x_upper=x_hi, y_box=y_box, diag=diag)


def embedded_solve(
    net: ImplicitNetwork,
    input_box: IntervalVector,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
    record_steps: bool = False,
) -> EmbeddedFixedPoint:
    """Solve the embedded network for an input box.

    Returns the ordered bracketing pair (x_lower, x_upper) and the output
    box. Every output y(v) for v in the input box lies in that box, up to
    solver tolerance; no outward rounding is applied, so callers that need
    enclosures robust to float rounding should inflate by a margin of
    their own.
    """
    mz = linalg.metzler_part(net.A)
    return _solve_stacked(net, mz, net.A - mz, input_box, tol, max_iter, alpha, record_steps)


def reach_box(
    net: ImplicitNetwork,
    u,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
    record_steps: bool = False,
) -> EmbeddedFixedPoint:
    """embedded_solve over the l-inf ball of radius epsilon around u."""
    return embedded_solve(
        net, IntervalVector.ball(u, epsilon), tol, max_iter, alpha, record_steps
    )
