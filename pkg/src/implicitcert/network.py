"""The implicit network model x = phi(Ax + Bu + b), y = Cx + c.

A network is well posed whenever the diagonally weighted l-inf matrix
measure of A is below one. In that regime the damped Picard iteration

    x^{k+1} = (1 - alpha) x^k + alpha * phi(A x^k + B u + b)

is a contraction for every alpha in (0, alpha*], where

    alpha* = 1 / (1 - min_i min(A_ii, 0))

and the contraction factor at alpha* is

    rho = 1 - (1 - max(mu, 0)) / (1 - min_i min(A_ii, 0)).

`forward_solve` runs that iteration; the same engine drives the stacked
box solvers in `embedding` and `certify`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatchError,
    MaxIterExceededError,
    NotWellPosedError,
)

__all__ = [
    "ActivationSpec",
    "ImplicitNetwork",
    "WellPosednessReport",
    "SolveDiagnostics",
    "apply_activation",
    "check_well_posedness",
    "build_wellposed_weights",
    "forward_solve",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000

# Residual growth past this level means the iteration is diverging;
# bail out instead of burning the full iteration budget.
DIVERGENCE_LIMIT = 1e12

_ACTIVATION_KINDS = ("relu", "identity", "tanh", "leaky_relu", "saturation")


@dataclass(frozen=True)
class ActivationSpec:
    """Scalar activation applied elementwise.

    Every supported kind is weakly increasing with difference quotients in
    [0, 1], which is what the contraction argument needs.
    """

    kind: str
    slope: float | None = None  # leaky_relu only
    lo: float | None = None  # saturation only
    hi: float | None = None  # saturation only

    def __post_init__(self):
        if self.kind not in _ACTIVATION_KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "leaky_relu":
            if self.slope is None or not 0.0 <= self.slope <= 1.0:
                raise ValueError("leaky_relu slope must lie in [0, 1]")
        elif self.kind == "saturation":
            if self.lo is None or self.hi is None or not self.lo <= self.hi:
                raise ValueError("saturation needs lo <= hi")

    @classmethod
    def relu(cls) -> "ActivationSpec":
        return cls("relu")

    @classmethod
    def identity(cls) -> "ActivationSpec":
        return cls("identity")

    @classmethod
    def tanh(cls) -> "ActivationSpec":
        return cls("tanh")

    @classmethod
    def leaky_relu(cls, slope: float) -> "ActivationSpec":
        return cls("leaky_relu", slope=slope)

    @classmethod
    def saturation(cls, lo: float, hi: float) -> "ActivationSpec":
        return cls("saturation", lo=lo, hi=hi)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "relu":
            return np.maximum(z, 0.0)
        if self.kind == "identity":
            return np.asarray(z, dtype=np.float64)
        if self.kind == "tanh":
            return np.tanh(z)
        if self.kind == "leaky_relu":
            return np.where(z >= 0, z, self.slope * z)
        return np.clip(z, self.lo, self.hi)


def apply_activation(spec: ActivationSpec, v) -> np.ndarray:
    """Apply the activation elementwise to a vector."""
    return spec(linalg.as_vector(v, "v"))


@dataclass(frozen=True)
class ImplicitNetwork:
    """Weights (A, B, C), biases (b, c), activation and optional weight
    vector eta for the norm in which contraction is measured.

    Shapes: A is n x n, B is n x r, C is q x n, b has dim n, c has dim q.
    When eta is omitted all measures use the unweighted l-inf norm.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    b: np.ndarray
    c: np.ndarray
    activation: ActivationSpec = field(default_factory=ActivationSpec.relu)
    eta: np.ndarray | None = None

    def __post_init__(self):
        A = linalg.as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatchError(f"A must be square, got {A.shape}")
        n = A.shape[0]
        B = linalg.as_matrix(self.B, "B")
        C = linalg.as_matrix(self.C, "C")
        b = linalg.as_vector(self.b, "b")
        c = linalg.as_vector(self.c, "c")
        if B.shape[0] != n:
            raise DimensionMismatchError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionMismatchError(f"C must have {n} columns, got {C.shape}")
        if b.shape[0] != n:
            raise DimensionMismatchError(f"b must have dim {n}, got {b.shape[0]}")
        if c.shape[0] != C.shape[0]:
            raise DimensionMismatchError(f"c must have dim {C.shape[0]}, got {c.shape[0]}")
        eta = self.eta
        if eta is not None:
            eta = linalg.as_weights(eta)
            if eta.shape[0] != n:
                raise DimensionMismatchError(f"eta must have dim {n}, got {eta.shape[0]}")
        for name, arr in (("A", A), ("B", B), ("C", C), ("b", b), ("c", c), ("eta", eta)):
            if arr is not None:
                arr = arr.copy()
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    def weights(self) -> np.ndarray:
        """eta, or the all-ones vector when eta is absent."""
        return np.ones(self.n) if self.eta is None else self.eta


@dataclass
class WellPosednessReport:
    measure: float
    alpha_star: float
    contraction_factor: float
    well_posed: bool


@dataclass
class SolveDiagnostics:
    iterations: int
    final_residual: float
    converged: bool
    # per-iteration step norms, kept only when a solver is asked to record them
    step_norms: list[float] | None = None


def check_well_posedness(net: ImplicitNetwork) -> WellPosednessReport:
    """Measure mu(A) in the network's weighted norm and report the damping
    step alpha* and the contraction factor it yields.

    alpha* and the factor are well-defined formulas even for measure >= 1,
    so they are reported either way; only `well_posed` gates the solvers.
    """
    mu = linalg.weighted_linf_measure(net.A, net.weights())
    min_diag = float(np.min(np.minimum(np.diagonal(net.A), 0.0))) if net.n else 0.0
    alpha_star = 1.0 / (1.0 - min_diag)
    factor = 1.0 - (1.0 - max(mu, 0.0)) * alpha_star
    return WellPosednessReport(
        measure=mu,
        alpha_star=alpha_star,
        contraction_factor=factor,
        well_posed=mu < 1.0,
    )


def build_wellposed_weights(t, eta) -> np.ndarray:
    """Map an unconstrained square matrix T to weights A with mu(A) <= 0.

    A = [eta] T [eta]^-1 - diag(|T| 1). Conjugating by [eta] makes the
    weighted measure of A equal the unweighted measure of T - diag(|T| 1),
    whose i-th row contributes T_ii - |T_ii| <= 0. Any T is admissible, so
    this parametrizes a family of certifiably well-posed networks.
    """
    T = linalg.as_matrix(t, "T")
    if T.shape[0] != T.shape[1]:
        raise DimensionMismatchError(f"T must be square, got {T.shape}")
    w = linalg.as_weights(eta)
    if w.shape[0] != T.shape[0]:
        raise DimensionMismatchError("eta dim must match T")
    conj = T * (w[:, None] / w[None, :])
    return conj - np.diag(np.abs(T).sum(axis=1))


def _averaged_iteration(
    step: Callable[[np.ndarray], np.ndarray],
    z0: np.ndarray,
    alpha: float,
    res_weights: np.ndarray,
    tol: float,
    max_iter: int,
    record_steps: bool,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Run z <- (1-alpha) z + alpha step(z) until the weighted step norm
    drops to tol. Raises MaxIterExceededError on budget exhaustion or
    blow-up (residual past DIVERGENCE_LIMIT or non-finite)."""
    z = np.array(z0, dtype=np.float64)
    steps: list[float] | None = [] if record_steps else None
    residual = np.inf
    for k in range(1, max_iter + 1):
        z_next = (1.0 - alpha) * z + alpha * step(z)
        diff = z_next - z
        residual = float(np.max(np.abs(diff) / res_weights)) if z.size else 0.0
        if steps is not None:
            steps.append(residual)
        z = z_next
        if residual <= tol:
            return z, SolveDiagnostics(k, residual, True, steps)
        if not np.isfinite(residual) or residual > DIVERGENCE_LIMIT:
            raise MaxIterExceededError(
                f"iteration diverged after {k} steps (residual {residual:.3e})",
                iterations=k,
                final_residual=residual,
            )
    raise MaxIterExceededError(
        f"no convergence within {max_iter} iterations (residual {residual:.3e})",
        iterations=max_iter,
        final_residual=residual,
    )


def _resolve_alpha(report: WellPosednessReport, alpha: float | None) -> float:
    if alpha is None:
        return report.alpha_star
    if not 0.0 < alpha <= report.alpha_star + 1e-15:
        raise ValueError(f"alpha must lie in (0, {report.alpha_star}], got {alpha}")
    return float(alpha)


def forward_solve(
    net: ImplicitNetwork,
    u,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
    x0=None,
    record_steps: bool = False,
) -> tuple[np.ndarray, np.ndarray, SolveDiagnostics]:
    """Solve x = phi(Ax + Bu + b) by the damped iteration and return
    (x*, y = C x* + c, diagnostics).

    Starts from x0 (zeros by default) and stops when the weighted l-inf
    norm of a step is <= tol; the contraction guarantees the returned
    point moves by at most tol under one further iteration. Raises
    NotWellPosedError when mu(A) >= 1 rather than iterating without a
    convergence guarantee.
    """
    report = check_well_posedness(net)
    if not report.well_posed:
        raise NotWellPosedError(f"measure {report.measure:.6g} >= 1")
    uu = linalg.as_vector(u, "u")
    if uu.shape[0] != net.r:
        raise DimensionMismatchError(f"u must have dim {net.r}, got {uu.shape[0]}")
    a = _resolve_alpha(report, alpha)
    w_in = net.B @ uu + net.b
    phi = net.activation
    A = net.A

    z0 = np.zeros(net.n) if x0 is None else linalg.as_vector(x0, "x0")
    if z0.shape[0] != net.n:
        raise DimensionMismatchError(f"x0 must have dim {net.n}")
    x, diag = _averaged_iteration(
        lambda x_: phi(A @ x_ + w_in), z0, a, net.weights(), tol, max_iter, record_steps
    )
    return x, net.C @ x + net.c, diag


def _forward_solve_batch(
    net: ImplicitNetwork,
    U: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the fixed point for many inputs at once (columns of U).

    One matrix iteration replaces per-input python loops; the Monte-Carlo
    oracles lean on this. Stops when the largest weighted step over all
    columns is <= tol, so every column ends at least as converged as a
    standalone solve. Returns (X, Y) with one column per input.
    """
    report = check_well_posedness(net)
    if not report.well_posed:
        raise NotWellPosedError(f"measure {report.measure:.6g} >= 1")
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != net.r:
        raise DimensionMismatchError(f"U must be ({net.r}, m), got {U.shape}")
    a = _resolve_alpha(report, alpha)
    W = net.B @ U + net.b[:, None]
    phi = net.activation
    A = net.A
    eta = net.weights()[:, None]
    X = np.zeros((net.n, U.shape[1]))
    residual = np.inf
    for k in range(1, max_iter + 1):
        X_next = (1.0 - a) * X + a * phi(A @ X + W)
        residual = float(np.max(np.abs(X_next - X) / eta)) if X.size else 0.0
        X = X_next
        if residual <= tol:
            return X, net.C @ X + net.c[:, None]
        if not np.isfinite(residual) or residual > DIVERGENCE_LIMIT:
            raise MaxIterExceededError(
                f"batch iteration diverged after {k} steps", k, residual
            )
    raise MaxIterExceededError(
        f"no convergence within {max_iter} iterations (residual {residual:.3e})",
        iterations=max_iter,
        final_residual=residual,
    )
