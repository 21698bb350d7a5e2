import numpy as np
import pytest
import sympy as sp

from diffeo1d.jets import Jet


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def sympy_jet(expr, var, x0: float, r: int) -> Jet:
    """Jet of a sympy expression, the oracle for jet arithmetic."""
    coeffs = []
    d = expr
    for k in range(r + 1):
        coeffs.append(float(d.subs(var, x0)))
        d = sp.diff(d, var)
    return Jet(float(x0), r, tuple(coeffs))


def richardson_derivative(f, x: float, h: float = 1e-3) -> float:
    """Fourth-order central difference of a scalar callable."""
    return (8 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12 * h)


def assert_jets_close(a: Jet, b: Jet, tol: float = 1e-9):
    assert a.order == b.order
    for u, v in zip(a.coeffs, b.coeffs):
        assert abs(u - v) <= tol * max(1.0, abs(u), abs(v))
