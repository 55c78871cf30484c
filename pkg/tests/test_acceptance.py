"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s`. The random-suite criteria
share a session-scoped bundle of 100 synthesized networks so the heavy
solves happen once.
"""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
import pytest

from conftest import (
    EXAMPLE_BOX_LOWER,
    EXAMPLE_BOX_UPPER,
    EXAMPLE_MM_LOWER,
    EXAMPLE_MM_UPPER,
    EXAMPLE_NOMINAL_U,
)
from implicitcert import certify as ct
from implicitcert import cli, linalg
from implicitcert.certify import CertMethod, LabeledInput
from implicitcert.embedding import IntervalVector, embedded_solve, reach_box
from implicitcert.modelio import load_model, save_dataset
from implicitcert.network import (
    ImplicitNetwork,
    SolveDiagnostics,
    _forward_solve_batch,
    build_wellposed_weights,
    check_well_posedness,
    forward_solve,
)

RATE_TOL = 1e-8  # solver tolerance for the step-ratio criterion; ratios of
# steps much below this drown in float rounding of the matvecs


@contextmanager
def criterion(num: int, desc: str):
    try:
        yield
    except BaseException:
        print(f"\ncriterion {num:02d} [FAIL] {desc}")
        raise
    print(f"\ncriterion {num:02d} [PASS] {desc}")


@dataclass
class SuiteEntry:
    net: ImplicitNetwork
    report: object
    inp: LabeledInput
    eps: float
    efp: object                     # embedded fixed point, tol 1e-10
    deltas: dict                    # CertMethod -> CertificationResult
    oracle: float                   # 1000-sample empirical margin
    samples_X: np.ndarray           # fixed points of sampled box inputs
    samples_Y: np.ndarray
    fwd_steps: SolveDiagnostics     # recorded at RATE_TOL
    emb_steps: SolveDiagnostics


@dataclass
class Suite:
    entries: list[SuiteEntry] = field(default_factory=list)


@pytest.fixture(scope="session")
def suite(tmp_path_factory) -> Suite:
    """100 random well-posed networks written and reloaded through cmd_synth,
    each with one labeled input, one radius, solves, deltas and oracles."""
    model_dir = tmp_path_factory.mktemp("synth_models")
    rng = np.random.default_rng(20260810)
    out = Suite()
    for k in range(100):
        n = int(rng.integers(1, 11))
        r = int(rng.integers(1, 6))
        q = int(rng.integers(2, 5))
        path = model_dir / f"net_{k:03d}.json"
        assert cli.main(["synth", "--n", str(n), "--r", str(r), "--q", str(q),
                         "--seed", str(k), "--out", str(path)]) == 0
        net = load_model(path)
        report = check_well_posedness(net)
        u = rng.normal(size=net.r)
        eps = float(rng.uniform(0.02, 0.3))
        _, y, _ = forward_solve(net, u)
        inp = LabeledInput(u, int(np.argmax(y)))

        efp = reach_box(net, u, eps, tol=1e-10)
        deltas = ct.evaluate_methods(net, inp, eps, list(CertMethod), tol=1e-10)
        oracle = ct.empirical_margin_oracle(net, inp, eps, samples=1000, seed=k, tol=1e-10)

        V = rng.uniform(u - eps, u + eps, size=(1000, net.r)).T
        X, Y = _forward_solve_batch(net, V, tol=1e-10)

        _, _, fwd = forward_solve(net, u, tol=RATE_TOL, record_steps=True)
        emb = reach_box(net, u, eps, tol=RATE_TOL, record_steps=True)
        out.entries.append(SuiteEntry(net, report, inp, eps, efp, deltas, oracle,
                                      X, Y, fwd, emb.diag))
    return out


@pytest.fixture(scope="session")
def example_net51():
    from conftest import EXAMPLE_MODEL

    return load_model(EXAMPLE_MODEL)


@pytest.fixture(scope="session")
def big_run(tmp_path_factory):
    """The synthetic robustness-curve experiment, run twice with identical
    configuration; criteria 12 and 13 both consume it."""
    d = tmp_path_factory.mktemp("bigrun")
    model = d / "model.json"
    data = d / "data.jsonl"
    assert cli.main(["synth", "--n", "100", "--r", "20", "--q", "10",
                     "--seed", "424242", "--out", str(model)]) == 0
    net = load_model(model)
    rng = np.random.default_rng(31337)
    U = rng.normal(size=(20, 200))
    _, Y = _forward_solve_batch(net, U)
    records = [LabeledInput(U[:, i], int(np.argmax(Y[:, i]))) for i in range(200)]
    save_dataset(20, 10, records, data)

    grid = ",".join(f"{v:.12g}" for v in np.linspace(0.0, 0.15, 10))
    argv = ["curve", str(model), str(data), "--eps-grid", grid, "--out"]
    t0 = time.perf_counter()
    assert cli.main(argv + [str(d / "curve1.csv")]) == 0
    elapsed = time.perf_counter() - t0
    assert cli.main(argv + [str(d / "curve2.csv")]) == 0
    return {
        "elapsed": elapsed,
        "csv1": (d / "curve1.csv").read_bytes(),
        "csv2": (d / "curve2.csv").read_bytes(),
    }


def test_criterion_01_lipschitz_golden(example_net51):
    with criterion(1, "Lipschitz bound on the 2-d example equals 3 (1e-9), < 1 ms"):
        ct.lipschitz_bound(example_net51)  # warmup
        t0 = time.perf_counter()
        lip = ct.lipschitz_bound(example_net51)
        elapsed = time.perf_counter() - t0
        assert lip == pytest.approx(3.0, abs=1e-9)
        assert elapsed < 1e-3


def test_criterion_02_mm_box_golden(example_net51):
    with criterion(2, "embedded box on the 2-d example matches golden values (5e-4), < 10 ms"):
        box = IntervalVector(EXAMPLE_BOX_LOWER, EXAMPLE_BOX_UPPER)
        embedded_solve(example_net51, box)  # warmup
        t0 = time.perf_counter()
        efp = embedded_solve(example_net51, box)
        elapsed = time.perf_counter() - t0
        assert efp.y_box.lower == pytest.approx(EXAMPLE_MM_LOWER, abs=5e-4)
        assert efp.y_box.upper == pytest.approx(EXAMPLE_MM_UPPER, abs=5e-4)
        assert elapsed < 1e-2


def test_criterion_03_ibp_box_golden(example_net51):
    # Known-red: the reference values for this box were produced by a
    # sign-split variant that also keeps the negative diagonal inside the
    # same-block term (double-counting it). That variant is unsound as an
    # enclosure and contradicts the degenerate-box and dominance contracts
    # of ibp_solve, so ibp_solve implements the plain sign split and this
    # criterion records the discrepancy instead of matching it.
    with criterion(3, "sign-split (IBP) box matches quoted reference values (5e-4), < 10 ms"):
        box = IntervalVector(EXAMPLE_BOX_LOWER, EXAMPLE_BOX_UPPER)
        ct.ibp_solve(example_net51, box)  # warmup
        t0 = time.perf_counter()
        efp = ct.ibp_solve(example_net51, box)
        elapsed = time.perf_counter() - t0
        assert elapsed < 1e-2
        assert efp.y_box.lower == pytest.approx([0.0342, 0.0], abs=5e-4)
        assert efp.y_box.upper == pytest.approx([1.7265, 2.1026], abs=5e-4)


def test_criterion_04_box_nesting(example_net51):
    # Known-red on the middle leg, for the same reason as criterion 3: the
    # sound sign-split box is wider than the double-counting variant the
    # reference nesting was eyeballed from, and it need not fit inside the
    # Lipschitz box.
    with criterion(4, "example boxes nest: MM inside IBP inside Lipschitz (1e-9)"):
        box = IntervalVector(EXAMPLE_BOX_LOWER, EXAMPLE_BOX_UPPER)
        mm = embedded_solve(example_net51, box)
        ibp = ct.ibp_solve(example_net51, box)
        _, y_u, _ = forward_solve(example_net51, EXAMPLE_NOMINAL_U)
        radius = float(max(np.max(EXAMPLE_BOX_UPPER - EXAMPLE_NOMINAL_U),
                           np.max(EXAMPLE_NOMINAL_U - EXAMPLE_BOX_LOWER)))
        lip = ct.lipschitz_bound(example_net51)
        lip_box = IntervalVector(y_u - lip * radius, y_u + lip * radius)
        assert ibp.y_box.contains_box(mm.y_box, tol=1e-9)
        assert lip_box.contains_box(ibp.y_box, tol=1e-9)


def test_criterion_05_measure_identity():
    with criterion(5, "doubled-system measure identity on 1000 random (A, eta) pairs (1e-12)"):
        rng = np.random.default_rng(55)
        for _ in range(1000):
            n = int(rng.integers(1, 21))
            a = rng.standard_normal((n, n))
            eta = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=n))
            assert linalg.embedded_measure_identity_check(a, eta, tol=1e-12)


def test_criterion_06_soundness_monte_carlo(suite):
    with criterion(6, "100 synth nets x 1000 samples: outputs inside MM box, deltas below empirical margins (1e-8)"):
        for e in suite.entries:
            lo, hi = e.efp.y_box.lower, e.efp.y_box.upper
            assert np.all(e.samples_Y >= lo[:, None] - 1e-8)
            assert np.all(e.samples_Y <= hi[:, None] + 1e-8)
            for method, res in e.deltas.items():
                if np.isnan(res.delta_value):
                    assert method is CertMethod.IBP  # nonconvergent: no certificate issued
                    continue
                assert res.delta_value <= e.oracle + 1e-8, (method, res.delta_value, e.oracle)


def test_criterion_07_contraction_rates(suite):
    with criterion(7, "step-norm ratios bounded by the contraction factor (1e-8) on all 100 nets"):
        for e in suite.entries:
            bound = e.report.contraction_factor + 1e-8
            for diag in (e.fwd_steps, e.emb_steps):
                s = diag.step_norms
                for i in range(1, len(s)):
                    if s[i - 1] > 0:
                        assert s[i] / s[i - 1] <= bound


def test_criterion_08_ordering(suite):
    with criterion(8, "embedded pairs ordered and interior fixed points bracketed (1e-8)"):
        for e in suite.entries:
            assert np.all(e.efp.x_lower <= e.efp.x_upper)
            assert np.all(e.samples_X >= e.efp.x_lower[:, None] - 1e-8)
            assert np.all(e.samples_X <= e.efp.x_upper[:, None] + 1e-8)


def test_criterion_09_relative_classifier_dominance(suite):
    with criterion(9, "relative-classifier delta dominates box delta (1e-12); strict case exhibited"):
        converse = 0
        for e in suite.entries:
            mm = e.deltas[CertMethod.MM].delta_value
            mmc = e.deltas[CertMethod.MM_C].delta_value
            assert mmc >= mm - 1e-12
            if mm <= 0 < mmc:
                converse += 1
        assert converse >= 1


def _feedforward_interval_oracle(weights, biases, lo, hi):
    """Layerwise interval propagation through ReLU layers, final layer affine."""
    for i, (w, b) in enumerate(zip(weights, biases)):
        wp, wm = np.maximum(w, 0.0), np.minimum(w, 0.0)
        lo, hi = wp @ lo + wm @ hi + b, wp @ hi + wm @ lo + b
        if i < len(weights) - 1:
            lo, hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
    return lo, hi


def test_criterion_10_feedforward_equivalence():
    with criterion(10, "layered ReLU net encoded implicitly matches layerwise interval propagation (1e-9)"):
        rng = np.random.default_rng(99)
        for _ in range(20):
            r, h1, h2, q = (int(rng.integers(1, 9)) for _ in range(4))
            q = max(q, 2)
            W1, b1 = rng.normal(size=(h1, r)), rng.normal(size=h1)
            W2, b2 = rng.normal(size=(h2, h1)), rng.normal(size=h2)
            W3, b3 = rng.normal(size=(q, h2)), rng.normal(size=q)

            # state (layer2, layer1): block strictly upper triangular A
            n = h1 + h2
            A = np.zeros((n, n))
            A[:h2, h2:] = W2
            B = np.vstack([np.zeros((h2, r)), W1])
            C = np.hstack([W3, np.zeros((q, h1))])
            beta = 0.9 / max(1.0, float(np.max(np.abs(W2).sum(axis=1))))
            eta = np.concatenate([np.ones(h2), beta * np.ones(h1)])
            net = ImplicitNetwork(A=A, B=B, C=C, b=np.concatenate([b2, b1]), c=b3, eta=eta)
            assert check_well_posedness(net).well_posed

            u = rng.normal(size=r)
            box = IntervalVector.ball(u, 0.1)
            efp = embedded_solve(net, box, tol=1e-12)
            lo, hi = _feedforward_interval_oracle(
                [W1, W2, W3], [b1, b2, b3], box.lower, box.upper)
            assert efp.y_box.lower == pytest.approx(lo, abs=1e-9)
            assert efp.y_box.upper == pytest.approx(hi, abs=1e-9)


def test_criterion_11_parametrization_guarantee():
    with criterion(11, "1000 random (T, eta): parametrized weights have measure <= 1e-12"):
        rng = np.random.default_rng(1111)
        for _ in range(1000):
            n = int(rng.integers(1, 21))
            t = rng.standard_normal((n, n)) * float(rng.uniform(0.2, 3.0))
            eta = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=n))
            a = build_wellposed_weights(t, eta)
            assert linalg.weighted_linf_measure(a, eta) <= 1e-12


def _parse_curves(csv_bytes: bytes):
    frac = {}
    lines = csv_bytes.decode().strip().splitlines()
    assert lines[0] == "method,epsilon,fraction"
    for ln in lines[1:]:
        m, e, f = ln.split(",")
        frac.setdefault(m, []).append((float(e), float(f)))
    return frac


def test_criterion_12_synthetic_curve_experiment(big_run):
    with criterion(12, "n=100 synthetic curve run: < 60 s, nonincreasing, mm_c >= mm >= ibp"):
        assert big_run["elapsed"] < 60.0
        frac = _parse_curves(big_run["csv1"])
        for m, pts in frac.items():
            fs = [f for _, f in pts]
            assert all(a >= b for a, b in zip(fs, fs[1:])), m
        by_eps = {m: dict(pts) for m, pts in frac.items()}
        for e in by_eps["mm"]:
            assert by_eps["mm_c"][e] >= by_eps["mm"][e] >= by_eps["ibp"][e]


def test_criterion_13_determinism(big_run):
    with criterion(13, "repeating the synthetic curve run yields byte-identical CSV"):
        assert big_run["csv1"] == big_run["csv2"]
