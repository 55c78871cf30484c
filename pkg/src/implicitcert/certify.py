"""Classification robustness certificates for well-posed implicit networks.

Four sufficient conditions are implemented, each producing a margin-like
value delta; delta > 0 certifies that every input in the l-inf ball of
radius epsilon keeps the given label.

* lip   - clean margin minus 2 * (input-output Lipschitz bound) * epsilon.
* ibp   - margin of the output box from the sign-split fixed point
          (positive/negative parts of A feed the bounds). The sign split
          generally has a worse contraction structure than the Metzler
          split, so this iteration may legitimately fail to converge even
          for well-posed networks; nonconvergence is reported per input,
          never fatal to a batch.
* mm    - margin of the output box from the embedded (Metzler split)
          fixed point: y_lower[label] - max of other y_upper entries.
* mm_c  - lower bound on the relative classifier variable
          z(v) = y(v)[label] - y(v)[other]; certifying min z_lower > 0 is
          never weaker than mm and is often strictly stronger.

All four are one-sided: each delta is a lower bound on the worst-case
margin over the ball, so any certificate must stay below the empirically
sampled margin (`empirical_margin_oracle`).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import linalg
from .embedding import EmbeddedFixedPoint, IntervalVector, _solve_stacked, embedded_solve
from .errors import (
    DimensionMismatchError,
    InvalidLabelError,
    MaxIterExceededError,
    NotWellPosedError,
)
from .network import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ImplicitNetwork,
    SolveDiagnostics,
    _forward_solve_batch,
    check_well_posedness,
    forward_solve,
)

__all__ = [
    "LabeledInput",
    "CertMethod",
    "CertificationResult",
    "RelativeClassifierMatrix",
    "build_T",
    "z_lower",
    "output_margin",
    "lipschitz_bound",
    "ibp_solve",
    "delta_lip",
    "delta_ibp",
    "delta_mm",
    "delta_mm_c",
    "certified_radius",
    "certified_fraction_curve",
    "empirical_margin_oracle",
]

NONCONVERGENT = "nonconvergent"


@dataclass(frozen=True)
class LabeledInput:
    u: np.ndarray
    label: int

    def __post_init__(self):
        object.__setattr__(self, "u", linalg.as_vector(self.u, "u"))
        if self.label < 0:
            raise InvalidLabelError(f"label must be >= 0, got {self.label}")


class CertMethod(Enum):
    LIP = "lip"
    IBP = "ibp"
    MM = "mm"
    MM_C = "mm_c"

    def __str__(self) -> str:  # CSV-friendly
        return self.value


@dataclass
class CertificationResult:
    method: CertMethod
    epsilon: float
    delta_value: float
    certified: bool
    diagnostics: SolveDiagnostics | None = None
    flags: str = ""


@dataclass(frozen=True)
class RelativeClassifierMatrix:
    """Linear map T with (T y)_k = y[label] - y[k-th other class].

    Entries lie in {-1, 0, 1}; each row carries one +1 in the label column
    and one -1 in the column of a competitor class, enumerated in
    increasing index order.
    """

    entries: np.ndarray
    label: int


def build_T(label: int, q: int) -> RelativeClassifierMatrix:
    """Build the (q-1) x q relative classifier map for the given label."""
    if q < 2:
        raise InvalidLabelError(f"need at least 2 classes, got q={q}")
    if not 0 <= label < q:
        raise InvalidLabelError(f"label {label} out of range for q={q}")
    t = np.zeros((q - 1, q))
    others = [j for j in range(q) if j != label]
    for k, j in enumerate(others):
        t[k, label] = 1.0
        t[k, j] = -1.0
    return RelativeClassifierMatrix(entries=t, label=label)


def z_lower(net: ImplicitNetwork, T: RelativeClassifierMatrix, efp: EmbeddedFixedPoint) -> np.ndarray:
    """Componentwise lower bound on T y(v) over the box behind `efp`.

    Splitting the composite map TC by sign before applying the state
    bounds keeps cancellations between C rows, which is what makes this
    bound tighter than comparing y-box endpoints:

        z_lower = (TC)+ x_lower + (TC)- x_upper + T c.
    """
    tc = T.entries @ net.C
    if efp.x_lower.shape[0] != net.n:
        raise DimensionMismatchError("embedded fixed point does not match network size")
    tcp = np.maximum(tc, 0.0)
    tcm = tc - tcp
    return tcp @ efp.x_lower + tcm @ efp.x_upper + T.entries @ net.c


def output_margin(y, label: int) -> float:
    """y[label] - max_{j != label} y[j]; positive iff label is the strict argmax."""
    yv = linalg.as_vector(y, "y")
    if not 0 <= label < yv.shape[0]:
        raise InvalidLabelError(f"label {label} out of range for q={yv.shape[0]}")
    if yv.shape[0] < 2:
        raise InvalidLabelError("margin needs at least 2 classes")
    others = np.delete(yv, label)
    return float(yv[label] - np.max(others))


def lipschitz_bound(net: ImplicitNetwork) -> float:
    """Upper bound on the l-inf input-output Lipschitz constant.

    ||B|| * ||C|| / (1 - max(mu(A), 0)) with the operator norms taken
    between the plain l-inf norm on inputs/outputs and the eta-weighted
    norm on the hidden state. For eta = 1 both norms are max-row-sum.
    """
    report = check_well_posedness(net)
    if not report.well_posed:
        raise NotWellPosedError(f"measure {report.measure:.6g} >= 1")
    eta = net.weights()
    b_norm = linalg.weighted_linf_opnorm(net.B, row_weights=eta)
    c_norm = linalg.weighted_linf_opnorm(net.C, col_weights=eta)
    return b_norm * c_norm / (1.0 - max(report.measure, 0.0))


def ibp_solve(
    net: ImplicitNetwork,
    input_box: IntervalVector,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
    record_steps: bool = False,
) -> EmbeddedFixedPoint:
    """Interval-bound-propagation baseline: the stacked fixed point using
    the sign split of A (positive part feeds each bound its own block,
    negative part the opposite block) instead of the Metzler split.

    The sign split moves negative diagonal mass into the cross coupling,
    so well-posedness of the network does not make this stacked map a
    contraction; expect MaxIterExceededError on some inputs and treat it
    as an answer ("no certificate"), not as a failure of the solver.
    """
    ap = linalg.positive_part(net.A)
    return _solve_stacked(net, ap, net.A - ap, input_box, tol, max_iter, alpha, record_steps)


def delta_lip(
    net: ImplicitNetwork,
    inp: LabeledInput,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
) -> CertificationResult:
    """Lipschitz certificate: clean margin minus 2 * Lip * epsilon."""
    _, y, _ = forward_solve(net, inp.u, tol=tol, max_iter=max_iter, alpha=alpha)
    delta = output_margin(y, inp.label) - 2.0 * lipschitz_bound(net) * epsilon
    return CertificationResult(CertMethod.LIP, epsilon, delta, delta > 0)


def delta_ibp(
    net: ImplicitNetwork,
    inp: LabeledInput,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
) -> CertificationResult:
    """Sign-split box certificate; nonconvergence flags the input uncertified."""
    try:
        efp = ibp_solve(net, IntervalVector.ball(inp.u, epsilon), tol=tol,
                        max_iter=max_iter, alpha=alpha)
    except MaxIterExceededError as exc:
        diag = SolveDiagnostics(exc.iterations, exc.final_residual, False)
        return CertificationResult(CertMethod.IBP, epsilon, float("nan"), False, diag, NONCONVERGENT)
    delta = float(efp.y_box.lower[inp.label] - _max_other(efp.y_box.upper, inp.label))
    return CertificationResult(CertMethod.IBP, epsilon, delta, delta > 0, efp.diag)


def delta_mm(
    net: ImplicitNetwork,
    inp: LabeledInput,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
) -> CertificationResult:
    """Embedded-box certificate: y_lower[label] - max other y_upper."""
    efp = embedded_solve(net, IntervalVector.ball(inp.u, epsilon), tol=tol,
                         max_iter=max_iter, alpha=alpha)
    return _delta_mm_from_efp(net, inp, epsilon, efp)


def delta_mm_c(
    net: ImplicitNetwork,
    inp: LabeledInput,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
) -> CertificationResult:
    """Relative classifier certificate: min component of z_lower."""
    efp = embedded_solve(net, IntervalVector.ball(inp.u, epsilon), tol=tol,
                         max_iter=max_iter, alpha=alpha)
    return _delta_mm_c_from_efp(net, inp, epsilon, efp)


def _max_other(y: np.ndarray, label: int) -> float:
    if y.shape[0] < 2:
        raise InvalidLabelError("margin needs at least 2 classes")
    return float(np.max(np.delete(y, label)))


def _delta_mm_from_efp(net, inp, epsilon, efp) -> CertificationResult:
    delta = float(efp.y_box.lower[inp.label] - _max_other(efp.y_box.upper, inp.label))
    return CertificationResult(CertMethod.MM, epsilon, delta, delta > 0, efp.diag)


def _delta_mm_c_from_efp(net, inp, epsilon, efp) -> CertificationResult:
    T = build_T(inp.label, net.q)
    delta = float(np.min(z_lower(net, T, efp)))
    return CertificationResult(CertMethod.MM_C, epsilon, delta, delta > 0, efp.diag)


def evaluate_methods(
    net: ImplicitNetwork,
    inp: LabeledInput,
    epsilon: float,
    methods: list[CertMethod],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
    lip_constant: float | None = None,
    clean_margin: float | None = None,
) -> dict[CertMethod, CertificationResult]:
    """Evaluate several methods on one (input, epsilon), sharing solves.

    mm and mm_c reuse a single embedded solve; lip reuses a precomputed
    Lipschitz constant and clean margin when the caller loops over a grid.
    Per-method solver errors are folded into an uncertified result with an
    error flag so batch runs never abort on one bad input.
    """
    out: dict[CertMethod, CertificationResult] = {}
    if CertMethod.LIP in methods:
        if lip_constant is None:
            lip_constant = lipschitz_bound(net)
        if clean_margin is None:
            _, y, _ = forward_solve(net, inp.u, tol=tol, max_iter=max_iter, alpha=alpha)
            clean_margin = output_margin(y, inp.label)
        delta = clean_margin - 2.0 * lip_constant * epsilon
        out[CertMethod.LIP] = CertificationResult(CertMethod.LIP, epsilon, delta, delta > 0)
    if CertMethod.IBP in methods:
        out[CertMethod.IBP] = delta_ibp(net, inp, epsilon, tol=tol, max_iter=max_iter, alpha=alpha)
    if CertMethod.MM in methods or CertMethod.MM_C in methods:
        try:
            efp = embedded_solve(net, IntervalVector.ball(inp.u, epsilon), tol=tol,
                                 max_iter=max_iter, alpha=alpha)
        except MaxIterExceededError as exc:
            diag = SolveDiagnostics(exc.iterations, exc.final_residual, False)
            for m in (CertMethod.MM, CertMethod.MM_C):
                if m in methods:
                    out[m] = CertificationResult(m, epsilon, float("nan"), False, diag, NONCONVERGENT)
        else:
            if CertMethod.MM in methods:
                out[CertMethod.MM] = _delta_mm_from_efp(net, inp, epsilon, efp)
            if CertMethod.MM_C in methods:
                out[CertMethod.MM_C] = _delta_mm_c_from_efp(net, inp, epsilon, efp)
    return out


_DELTA_FUNCS = {
    CertMethod.LIP: delta_lip,
    CertMethod.IBP: delta_ibp,
    CertMethod.MM: delta_mm,
    CertMethod.MM_C: delta_mm_c,
}


def certified_radius(
    net: ImplicitNetwork,
    inp: LabeledInput,
    method: CertMethod,
    eps_max: float = 1.0,
    tol_eps: float = 1e-4,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
) -> float:
    """Largest certified radius in [0, eps_max], located by bisection.

    Valid because every delta is nonincreasing in epsilon (affine for lip,
    nested boxes otherwise; nonconvergence counts as uncertified). Returns
    0 when the clean input is not certified, eps_max when even eps_max is.
    """
    delta = _DELTA_FUNCS[method]
    if not delta(net, inp, 0.0, tol=tol, max_iter=max_iter, alpha=alpha).certified:
        return 0.0
    if delta(net, inp, eps_max, tol=tol, max_iter=max_iter, alpha=alpha).certified:
        return eps_max
    lo, hi = 0.0, eps_max
    while hi - lo > tol_eps:
        mid = 0.5 * (lo + hi)
        if delta(net, inp, mid, tol=tol, max_iter=max_iter, alpha=alpha).certified:
            lo = mid
        else:
            hi = mid
    return lo


def certified_fraction_curve(
    net: ImplicitNetwork,
    dataset: list[LabeledInput],
    methods: list[CertMethod],
    eps_grid: list[float],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
) -> list[tuple[CertMethod, float, float]]:
    """Fraction of dataset inputs certified per (method, epsilon).

    Rows come out grouped by method (in the order given) with epsilon
    ascending inside each group. Per-input solver errors count the input
    as uncertified. Empty datasets produce an empty table.
    """
    if sorted(eps_grid) != list(eps_grid):
        raise ValueError("eps_grid must be sorted ascending")
    if not dataset:
        return []
    counts = {(m, e): 0 for m in methods for e in eps_grid}
    lip_constant = lipschitz_bound(net) if CertMethod.LIP in methods else None
    for inp in dataset:
        clean_margin = None
        if CertMethod.LIP in methods:
            try:
                _, y, _ = forward_solve(net, inp.u, tol=tol, max_iter=max_iter, alpha=alpha)
                clean_margin = output_margin(y, inp.label)
            except MaxIterExceededError:
                clean_margin = float("nan")  # nan margin certifies nothing
        for eps in eps_grid:
            results = evaluate_methods(
                net, inp, eps, methods, tol=tol, max_iter=max_iter, alpha=alpha,
                lip_constant=lip_constant, clean_margin=clean_margin,
            )
            for m in methods:
                if m in results and results[m].certified:
                    counts[(m, eps)] += 1
    total = len(dataset)
    return [(m, e, counts[(m, e)] / total) for m in methods for e in eps_grid]


def empirical_margin_oracle(
    net: ImplicitNetwork,
    inp: LabeledInput,
    epsilon: float,
    samples: int = 1000,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    alpha: float | None = None,
) -> float:
    """Sampled worst-case margin over the epsilon-ball around the input.

    Evaluates the network at the nominal input (always first), at the box
    corners when 2^r fits in the sample budget, and at uniform draws from
    the box for the remainder. Being a sampled minimum it upper-bounds the
    true worst case, so every sound certificate delta must stay <= this
    value; the reverse direction carries no guarantee.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    points = [inp.u]
    if epsilon > 0 and samples > 1:
        r = inp.u.shape[0]
        if r <= 20 and 2**r <= samples - 1:
            for signs in itertools.product((-1.0, 1.0), repeat=r):
                points.append(inp.u + epsilon * np.array(signs))
        box = IntervalVector.ball(inp.u, epsilon)
        while len(points) < samples:
            points.append(box.sample(rng))
    _, Y = _forward_solve_batch(net, np.stack(points, axis=1), tol=tol,
                                max_iter=max_iter, alpha=alpha)
    others = np.delete(Y, inp.label, axis=0)
    return float(np.min(Y[inp.label] - others.max(axis=0)))
