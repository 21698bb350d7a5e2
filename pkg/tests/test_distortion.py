"""Commutator curvature, word certificates and flow-root bookkeeping.

The five-pair certificate of the acceptance run takes ~45 s; here only a
two-pair version is built so every structural claim still gets exercised.
"""

import numpy as np
import pytest

from diffeo1d.diffeos import Compose, FlowMap, Identity
from diffeo1d.distortion import (
    C0_LINE,
    CertificateError,
    build_interval_certificate,
    certificate_algebra,
    commutator_curvature,
    distortion_report,
    epsilon_schedule,
    flow_root_decomposition,
    word_to_diffeo,
)
from diffeo1d.fields import BumpField, PolynomialField, ScaledField


def bump(lo, a, b, hi, amp):
    return ScaledField(BumpField(lo, a, b, hi), amp)


def test_curvature_analytic_example():
    # X = x, Y = x^2: 2(DX Y - DY X) = 2(x^2 - 2x^2) = -2x^2
    X = PolynomialField([0.0, 1.0])
    Y = PolynomialField([0.0, 0.0, 1.0])
    out = commutator_curvature(X, Y, 0.25)
    assert abs(out["analytic"] - (-0.125)) < 1e-12
    assert out["error"] < 1e-6
    # the error is quadratic in the step
    assert 3.0 < out["error_2h"] / out["error"] < 5.0


def test_curvature_antisymmetry():
    X = bump(0.1, 0.3, 0.5, 0.7, 0.8)
    Y = PolynomialField([0.2, -0.3, 0.5])
    a = commutator_curvature(X, Y, 0.4)["analytic"]
    b = commutator_curvature(Y, X, 0.4)["analytic"]
    assert abs(a + b) < 1e-12


def test_curvature_disjoint_supports_vanish():
    X = bump(0.1, 0.15, 0.25, 0.3, 1.0)
    Y = bump(0.6, 0.65, 0.75, 0.8, 1.0)
    out = commutator_curvature(X, Y, 0.7)
    assert out["analytic"] == 0.0
    assert abs(out["finite_difference"]) < 1e-6


def test_word_to_diffeo_merges_flows():
    f = FlowMap(PolynomialField([0.0, 1.0, -1.0], zeros=(0.0, 1.0)), 0.3)
    w = word_to_diffeo([f], [(0, 1), (0, 1), (0, -1)])
    assert isinstance(w, Compose) and len(w.maps) == 1
    assert w.maps[0].t == 0.3
    assert isinstance(word_to_diffeo([f], [(0, 1), (0, -1)]), Identity)
    assert isinstance(word_to_diffeo([f], []), Identity)


@pytest.fixture(scope="module")
def small_certificate():
    pairs = []
    for n in range(2):
        amp = 2e-3 / (n + 1)
        pairs.append((FlowMap(bump(0.40, 0.45, 0.50, 0.55, amp), 1.0),
                      FlowMap(bump(0.45, 0.50, 0.55, 0.60, amp), 1.0)))
    return build_interval_certificate(pairs, (0.4, 0.6), (0.0, 1.0), 0.15)


def test_certificate_lengths_and_residuals(small_certificate):
    cert = small_certificate
    for n, w in enumerate(cert.words):
        assert w["claimed_length"] == 14 * n + 14
        assert len(w["letters"]) == w["claimed_length"]
    for v in cert.verification:
        assert v["residual_c0"] < 1e-6
        assert v["length_check"]
    assert cert.labels == ["h", "h_prime", "F", "F_prime"]


def test_certificate_json_roundtrip_shape(small_certificate):
    blob = small_certificate.to_json()
    assert set(blob) == {"generators", "words", "verification", "intervals"}
    assert blob["words"][1]["claimed_length"] == 28


def test_certificate_rejects_unsupported_pair():
    leaky = FlowMap(bump(0.1, 0.2, 0.3, 0.4, 1e-3), 1.0)  # support outside J
    with pytest.raises(CertificateError):
        build_interval_certificate([(leaky, leaky)], (0.4, 0.6), (0.0, 1.0),
                                   0.15)


def test_epsilon_schedule_decreasing(small_certificate):
    h = small_certificate.generators[0]
    jp = small_certificate.intervals["J_prime"]
    eps = epsilon_schedule(jp, h, 2)
    assert len(eps) == 2
    assert eps[0] > eps[1] > 0


def test_flow_root_decomposition():
    X1 = PolynomialField([0.0, 1.0, -2.0, 1.0], zeros=(0.0, 1.0))
    X2 = PolynomialField([0.0, 0.0, 1.0, -1.0], zeros=(0.0, 1.0))
    f = Compose(FlowMap(X1, 1.0), FlowMap(X2, 1.0))
    rec = flow_root_decomposition(f, eta=0.05)
    assert rec.C == C0_LINE
    assert len(rec.generating_set) == 2
    assert rec.recorded_A_upper == len(rec.word)
    assert rec.residual_c0 < 1e-8
    # every root really is eta-small: re-run at a looser eta gives fewer
    # letters
    rec2 = flow_root_decomposition(f, eta=0.5)
    assert rec2.recorded_A_upper <= rec.recorded_A_upper


def test_flow_root_identity_empty():
    rec = flow_root_decomposition(Identity(), eta=0.1)
    assert rec.word == [] and rec.recorded_A_upper == 0


def test_flow_root_rejects_generic_input():
    from diffeo1d.diffeos import Moebius
    with pytest.raises(CertificateError):
        flow_root_decomposition(Moebius(2, 0, 1, 1), eta=0.1)


def test_certificate_algebra_bounds():
    X = PolynomialField([0.0, 1.0, -2.0, 1.0], zeros=(0.0, 1.0))
    a = flow_root_decomposition(FlowMap(X, 1.0), eta=0.1)
    prod = certificate_algebra("product", a, a)
    assert prod.recorded_A_upper == 2 * a.recorded_A_upper
    assert prod.C == 2 * a.C
    pw = certificate_algebra("power", a, n=3)
    assert pw.recorded_A_upper == 3 * a.recorded_A_upper
    cj = certificate_algebra("conjugate", a, pw)
    assert cj.recorded_A_upper == a.recorded_A_upper + 2 * pw.recorded_A_upper
    with pytest.raises(CertificateError):
        certificate_algebra("power", a, n=0)
    with pytest.raises(CertificateError):
        certificate_algebra("frobnicate", a)


def test_distortion_report_baumslag_solitar_decay():
    X = PolynomialField([0.0, 1.0, -2.0, 1.0], zeros=(0.0, 1.0))
    f = FlowMap(X, 1.0)
    conj = flow_root_decomposition(FlowMap(X, 0.5), eta=0.1)
    out = distortion_report(f, [1, 2, 3, 4], 0.1, conjugacy_record=conj)
    ratios = [row["ratio"] for row in out["rows"]]
    assert all(r == ratios[0] for r in ratios)  # powers of one word
    bs = [row["bs_ratio"] for row in out["rows"]]
    assert all(b2 < b1 for b1, b2 in zip(bs, bs[1:]))
