from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from implicitcert import ActivationSpec, ImplicitNetwork
from implicitcert.modelio import load_model

REPO_ROOT = Path(__file__).resolve().parents[1]
EXAMPLE_MODEL = REPO_ROOT / "models" / "example_5_1.json"

# Golden values for the shipped 2-d example network with input box
# [(0, 1), (1/3, 2)] and nominal input (1/4, 3/2).
EXAMPLE_BOX_LOWER = np.array([0.0, 1.0])
EXAMPLE_BOX_UPPER = np.array([1.0 / 3.0, 2.0])
EXAMPLE_NOMINAL_U = np.array([0.25, 1.5])
EXAMPLE_MM_LOWER = np.array([0.3939, 0.6364])
EXAMPLE_MM_UPPER = np.array([1.6061, 2.0303])
EXAMPLE_LIP = 3.0


@pytest.fixture(scope="session")
def example_net() -> ImplicitNetwork:
    return load_model(EXAMPLE_MODEL)


def tiny_net(a: float, b: float = 1.0, c_rows=((1.0,),), bias: float = 0.0,
             activation: ActivationSpec | None = None) -> ImplicitNetwork:
    """1-state network, handy for closed-form checks."""
    c = np.asarray(c_rows, dtype=float)
    return ImplicitNetwork(
        A=np.array([[a]]),
        B=np.array([[b]]),
        C=c,
        b=np.array([bias]),
        c=np.zeros(c.shape[0]),
        activation=activation or ActivationSpec.relu(),
    )


def random_wellposed_net(rng: np.random.Generator, n: int, r: int, q: int,
                         weighted: bool = False,
                         activation: ActivationSpec | None = None) -> ImplicitNetwork:
    """Well-posed by construction via the mu <= 0 parametrization."""
    from implicitcert.network import build_wellposed_weights

    eta = np.exp(rng.uniform(np.log(0.2), np.log(5.0), size=n)) if weighted else None
    T = rng.standard_normal((n, n)) / np.sqrt(n)
    A = build_wellposed_weights(T, eta if eta is not None else np.ones(n))
    return ImplicitNetwork(
        A=A,
        B=rng.standard_normal((n, r)) / np.sqrt(r),
        C=rng.standard_normal((q, n)) / np.sqrt(n),
        b=0.1 * rng.standard_normal(n),
        c=0.1 * rng.standard_normal(q),
        activation=activation or ActivationSpec.relu(),
        eta=eta,
    )
