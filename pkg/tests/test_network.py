import numpy as np
import pytest

from conftest import EXAMPLE_MM_LOWER, EXAMPLE_MM_UPPER, EXAMPLE_NOMINAL_U, random_wellposed_net, tiny_net
from implicitcert import linalg
from implicitcert.errors import DimensionMismatchError, MaxIterExceededError, NotWellPosedError
from implicitcert.network import (
    ActivationSpec,
    ImplicitNetwork,
    apply_activation,
    build_wellposed_weights,
    check_well_posedness,
    forward_solve,
)

ALL_ACTIVATIONS = [
    ActivationSpec.relu(),
    ActivationSpec.identity(),
    ActivationSpec.tanh(),
    ActivationSpec.leaky_relu(0.0),
    ActivationSpec.leaky_relu(0.3),
    ActivationSpec.leaky_relu(1.0),
    ActivationSpec.saturation(0.0, 1.0),
    ActivationSpec.saturation(-2.5, 3.0),
]


def test_apply_activation_examples():
    assert np.array_equal(apply_activation(ActivationSpec.relu(), [-1.0, 2.0]), [0.0, 2.0])
    v = np.array([0.3, -4.0, 2.0])
    assert np.array_equal(apply_activation(ActivationSpec.identity(), v), v)
    sat = ActivationSpec.saturation(0.0, 1.0)
    assert np.array_equal(apply_activation(sat, [-0.5, 0.3, 7.0]), [0.0, 0.3, 1.0])


def test_activation_validation():
    with pytest.raises(ValueError):
        ActivationSpec("softmax")
    with pytest.raises(ValueError):
        ActivationSpec.leaky_relu(1.5)
    with pytest.raises(ValueError):
        ActivationSpec.saturation(2.0, 1.0)


@pytest.mark.parametrize("spec", ALL_ACTIVATIONS, ids=lambda s: f"{s.kind}")
def test_activation_slope_in_unit_interval(spec):
    # difference quotients over 10^4 sampled pairs; pairs are kept at least
    # 1e-3 apart so the quotient itself is numerically trustworthy
    rng = np.random.default_rng(42)
    x = rng.uniform(-10, 10, size=10_000)
    y = x + rng.uniform(1e-3, 5.0, size=10_000) * rng.choice([-1.0, 1.0], size=10_000)
    q = (spec(x) - spec(y)) / (x - y)
    assert np.all(q >= -1e-12)
    assert np.all(q <= 1.0 + 1e-12)


def test_network_validation():
    good = dict(A=np.zeros((2, 2)), B=np.zeros((2, 1)), C=np.zeros((1, 2)),
                b=np.zeros(2), c=np.zeros(1))
    ImplicitNetwork(**good)
    with pytest.raises(ValueError):
        ImplicitNetwork(**{**good, "A": np.array([[np.nan, 0], [0, 0]])})
    with pytest.raises(DimensionMismatchError):
        ImplicitNetwork(**{**good, "B": np.zeros((3, 1))})
    with pytest.raises(DimensionMismatchError):
        ImplicitNetwork(**{**good, "c": np.zeros(2)})
    with pytest.raises(ValueError):
        ImplicitNetwork(**good, eta=np.array([1.0, 0.0]))
    net = ImplicitNetwork(**good)
    with pytest.raises(ValueError):
        net.A[0, 0] = 1.0  # frozen storage


def test_well_posedness_example(example_net):
    rep = check_well_posedness(example_net)
    assert rep.measure == pytest.approx(0.5, abs=1e-15)
    assert rep.alpha_star == pytest.approx(0.8, abs=1e-15)
    assert rep.contraction_factor == pytest.approx(0.6, abs=1e-15)
    assert rep.well_posed


def test_well_posedness_edge_cases():
    z = tiny_net(0.0)
    rep = check_well_posedness(ImplicitNetwork(A=np.zeros((2, 2)), B=np.zeros((2, 1)),
                                               C=np.eye(2), b=np.zeros(2), c=np.zeros(2)))
    assert (rep.measure, rep.alpha_star, rep.contraction_factor) == (0.0, 1.0, 0.0)
    assert rep.well_posed
    rep2 = check_well_posedness(ImplicitNetwork(A=2 * np.eye(2), B=np.zeros((2, 1)),
                                                C=np.eye(2), b=np.zeros(2), c=np.zeros(2)))
    assert rep2.measure == 2.0
    assert not rep2.well_posed
    assert check_well_posedness(z).well_posed


def test_build_wellposed_weights_examples():
    assert np.array_equal(build_wellposed_weights(np.zeros((3, 3)), np.ones(3)), np.zeros((3, 3)))
    assert np.array_equal(build_wellposed_weights(np.eye(2), np.ones(2)), np.zeros((2, 2)))


def test_build_wellposed_weights_measure_guarantee():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        t = rng.standard_normal((n, n))
        eta = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=n))
        a = build_wellposed_weights(t, eta)
        assert linalg.weighted_linf_measure(a, eta) <= 1e-12


def test_forward_solve_example_in_mm_box(example_net):
    x, y, diag = forward_solve(example_net, EXAMPLE_NOMINAL_U)
    assert diag.converged
    assert np.all(y >= EXAMPLE_MM_LOWER - 5e-4)
    assert np.all(y <= EXAMPLE_MM_UPPER + 5e-4)
    # closed form on the all-active branch: x = (I - A)^-1 B u
    expected = np.linalg.solve(np.eye(2) - example_net.A, example_net.B @ EXAMPLE_NOMINAL_U)
    assert y == pytest.approx(expected, abs=1e-9)


def test_forward_solve_trivial_cases():
    net = ImplicitNetwork(A=np.array([[-0.5, 0.2], [0.1, -0.4]]), B=np.zeros((2, 2)),
                          C=np.eye(2), b=np.zeros(2), c=np.array([3.0, -1.0]))
    x, y, _ = forward_solve(net, np.zeros(2))
    assert np.array_equal(x, np.zeros(2))
    assert np.array_equal(y, net.c)

    net2 = ImplicitNetwork(A=np.zeros((2, 2)), B=np.eye(2), C=np.eye(2),
                           b=np.array([0.5, -9.0]), c=np.zeros(2))
    u = np.array([1.0, 2.0])
    x2, _, d2 = forward_solve(net2, u)
    assert np.array_equal(x2, np.maximum(u + net2.b, 0.0))
    assert d2.iterations <= 2


def test_forward_solve_errors(example_net):
    bad = ImplicitNetwork(A=2 * np.eye(1), B=np.ones((1, 1)), C=np.ones((1, 1)),
                          b=np.zeros(1), c=np.zeros(1))
    with pytest.raises(NotWellPosedError):
        forward_solve(bad, np.ones(1))
    with pytest.raises(DimensionMismatchError):
        forward_solve(example_net, np.ones(3))
    slow = tiny_net(0.999999, activation=ActivationSpec.identity())
    with pytest.raises(MaxIterExceededError) as exc:
        forward_solve(slow, np.ones(1), tol=1e-12, max_iter=5)
    assert exc.value.iterations == 5
    assert exc.value.final_residual > 1e-12


def test_alpha_override(example_net):
    x1, _, _ = forward_solve(example_net, EXAMPLE_NOMINAL_U)
    x2, _, d2 = forward_solve(example_net, EXAMPLE_NOMINAL_U, alpha=0.5)
    assert x1 == pytest.approx(x2, abs=1e-8)
    with pytest.raises(ValueError):
        forward_solve(example_net, EXAMPLE_NOMINAL_U, alpha=0.81)
    with pytest.raises(ValueError):
        forward_solve(example_net, EXAMPLE_NOMINAL_U, alpha=0.0)


def test_fixed_point_unique_across_starts():
    rng = np.random.default_rng(11)
    for k in range(20):
        net = random_wellposed_net(rng, n=int(rng.integers(1, 9)), r=3, q=2,
                                   weighted=bool(k % 2))
        u = rng.normal(size=3)
        tol = 1e-10
        xa, _, _ = forward_solve(net, u, tol=tol)
        xb, _, _ = forward_solve(net, u, tol=tol, x0=rng.normal(size=net.n) * 5)
        assert linalg.weighted_linf_norm(xa - xb, net.weights()) <= 10 * tol


def test_contraction_rate_bound():
    rng = np.random.default_rng(12)
    for k in range(25):
        net = random_wellposed_net(rng, n=int(rng.integers(1, 9)), r=2, q=2,
                                   weighted=bool(k % 2))
        rep = check_well_posedness(net)
        _, _, diag = forward_solve(net, rng.normal(size=2), tol=1e-8, record_steps=True)
        s = diag.step_norms
        ratios = [s[i] / s[i - 1] for i in range(1, len(s)) if s[i - 1] > 0]
        assert all(r <= rep.contraction_factor + 1e-8 for r in ratios)
