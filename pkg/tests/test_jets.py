"""Jet arithmetic against symbolic differentiation oracles."""

import math

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from diffeo1d.jets import (
    Jet,
    JetError,
    jet_add,
    jet_compose,
    jet_exp,
    jet_invert,
    jet_log,
    jet_mul,
    jet_reciprocal,
    jet_scale,
)

from conftest import assert_jets_close, sympy_jet

x = sp.Symbol("x")


def test_jet_validates_shape():
    with pytest.raises(JetError):
        Jet(0.0, 2, (1.0, 2.0))
    with pytest.raises(JetError):
        Jet(0.0, 1, (1.0, float("nan")))


def test_add_zero_identity():
    a = sympy_jet(sp.sin(x), x, 0.4, 3)
    z = Jet.constant(0.4, 0.0, 3)
    assert_jets_close(jet_add(a, z), a)


def test_add_constant_sum():
    a = sympy_jet(x, x, 0.3, 2)
    b = sympy_jet(1 - x, x, 0.3, 2)
    assert jet_add(a, b).coeffs == (1.0, 0.0, 0.0)


def test_add_sin_cos_oracle():
    a = sympy_jet(sp.sin(x), x, 0.5, 3)
    b = sympy_jet(sp.cos(x), x, 0.5, 3)
    assert_jets_close(jet_add(a, b), sympy_jet(sp.sin(x) + sp.cos(x), x, 0.5, 3))


def test_mul_unit_identity():
    a = sympy_jet(sp.exp(x), x, 0.2, 4)
    one = Jet.constant(0.2, 1.0, 4)
    assert_jets_close(jet_mul(a, one), a)


def test_mul_x_squared():
    a = sympy_jet(x, x, 1.0, 2)
    assert jet_mul(a, a).coeffs == (1.0, 2.0, 2.0)


def test_mul_polynomial_oracle(rng):
    for _ in range(10):
        ca = rng.uniform(-2, 2, 4)
        cb = rng.uniform(-2, 2, 4)
        pa = sum(c * x**k for k, c in enumerate(ca))
        pb = sum(c * x**k for k, c in enumerate(cb))
        x0 = float(rng.uniform(-1, 1))
        got = jet_mul(sympy_jet(pa, x, x0, 4), sympy_jet(pb, x, x0, 4))
        assert_jets_close(got, sympy_jet(pa * pb, x, x0, 4), tol=1e-12)


def test_compose_identity():
    f = sympy_jet(sp.tanh(x), x, 0.3, 4)
    ident = Jet.identity(f.value, 4)
    assert_jets_close(jet_compose(ident, f), f)


def test_compose_self_composition_oracle():
    f = x + x**2
    inner = sympy_jet(f, x, 0.0, 4)
    outer = sympy_jet(f, x, 0.0, 4)  # f(0) = 0, same base point
    got = jet_compose(outer, inner)
    assert got.coeffs == (0.0, 1.0, 4.0, 12.0, 24.0)


def test_compose_linear():
    inner = Jet(0.0, 1, (0.0, 3.0))
    outer = Jet(0.0, 1, (0.0, 2.0))
    assert jet_compose(outer, inner).coeffs == (0.0, 6.0)


def test_invert_identity():
    ident = Jet.identity(0.7, 3)
    assert_jets_close(jet_invert(ident), ident)


def test_invert_linear():
    a = Jet(0.0, 2, (0.0, 2.0, 0.0))
    assert jet_invert(a).coeffs == (0.0, 0.5, 0.0)


def test_invert_series_reversion():
    # inverse series of x + x^2 is x - x^2 + 2x^3 - ...
    a = sympy_jet(x + x**2, x, 0.0, 3)
    assert_jets_close(jet_invert(a), Jet(0.0, 3, (0.0, 1.0, -2.0, 12.0)),
                      tol=1e-12)


def test_reciprocal_unit():
    one = Jet.constant(0.1, 1.0, 3)
    assert_jets_close(jet_reciprocal(one), one)


def test_reciprocal_geometric():
    a = sympy_jet(1 + x, x, 0.0, 2)
    assert jet_reciprocal(a).coeffs == (1.0, -1.0, 2.0)


def test_reciprocal_cubic_oracle(rng):
    for _ in range(10):
        c = rng.uniform(-1, 1, 4)
        c[0] = 2.0 + rng.uniform(0, 1)  # keep it away from zero
        p = sum(v * x**k for k, v in enumerate(c))
        x0 = float(rng.uniform(-0.5, 0.5))
        got = jet_reciprocal(sympy_jet(p, x, x0, 3))
        assert_jets_close(got, sympy_jet(1 / p, x, x0, 3), tol=1e-11)


def test_exp_log_oracle():
    a = sympy_jet(0.3 + sp.sin(x) / 3, x, 0.2, 4)
    assert_jets_close(jet_exp(a), sympy_jet(sp.exp(0.3 + sp.sin(x) / 3), x, 0.2, 4))
    assert_jets_close(jet_log(a), sympy_jet(sp.log(0.3 + sp.sin(x) / 3), x, 0.2, 4))


@st.composite
def diffeo_jets(draw):
    """Jets with d1 bounded away from 0, as produced by diffeomorphisms."""
    d1 = draw(st.floats(0.5, 2.0))
    higher = draw(st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2))
    return Jet(0.0, 3, (0.0, d1, *higher))


@given(diffeo_jets())
@settings(max_examples=60, deadline=None)
def test_invert_roundtrip_property(a):
    back = jet_compose(jet_invert(a), a)
    assert_jets_close(back, Jet.identity(0.0, 3), tol=1e-8)


@given(diffeo_jets(), st.floats(-0.9, 0.9))
@settings(max_examples=60, deadline=None)
def test_scale_linearity_property(a, s):
    assert_jets_close(jet_add(jet_scale(a, s), jet_scale(a, 1.0 - s)), a,
                      tol=1e-12)
