import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limitexec.errors import InvalidArgumentError, OutOfRangeError
from limitexec.hamiltonian import (ConstrainedContext, QuoteContext, constrained_hamiltonian,
                                   constrained_quote, hamiltonian_closed_form, hamiltonian_value,
                                   inverse_hamiltonian, limit_hamiltonian, limit_optimal_quote,
                                   optimal_quote)
from limitexec.intensity import ExponentialIntensity, figure1_tilde

A, K, G, D = 0.1, 0.3, 0.001, 50.0
CTX = QuoteContext(G, D, ExponentialIntensity(A, K))
TILDE_CTX = QuoteContext(G, D, figure1_tilde())


def test_exponential_quote_is_shift_of_p():
    p = np.linspace(-5, 20, 26)
    np.testing.assert_allclose(optimal_quote(CTX, p), p + math.log1p(G * D / K) / (G * D),
                               rtol=0, atol=1e-12)


def test_exponential_hamiltonian_closed_form():
    p = np.linspace(-5, 20, 26)
    c = G * D
    want = (c / K) * (1 + c / K) ** (-1 - K / c) * A * np.exp(-K * p)
    np.testing.assert_allclose(hamiltonian_value(CTX, p), want, rtol=1e-12)


@pytest.mark.parametrize("ctx", [CTX, TILDE_CTX], ids=["exp", "tilde"])
def test_quote_solves_quote_equation(ctx):
    p = np.linspace(-4, 15, 40)
    d = optimal_quote(ctx, p)
    np.testing.assert_allclose(ctx.quote_equation(d), p, atol=1e-10)


@pytest.mark.parametrize("ctx", [CTX, TILDE_CTX], ids=["exp", "tilde"])
def test_two_hamiltonian_forms_agree(ctx):
    p = np.linspace(-4, 15, 40)
    np.testing.assert_allclose(hamiltonian_closed_form(ctx, p), hamiltonian_value(ctx, p), rtol=1e-10)


@pytest.mark.parametrize("ctx", [CTX, TILDE_CTX], ids=["exp", "tilde"])
def test_quote_beats_nearby_offsets(ctx):
    p = np.linspace(-3, 12, 16)
    d = optimal_quote(ctx, p)
    best = ctx.objective(p, d)
    for eps in (-0.05, 0.05):
        assert np.all(ctx.objective(p, d + eps) <= best + 1e-15)


def test_envelope_derivative_matches_finite_difference():
    p = np.linspace(-2, 8, 11)
    h = 1e-5
    fd = (hamiltonian_value(TILDE_CTX, p + h) - hamiltonian_value(TILDE_CTX, p - h)) / (2 * h)
    d = optimal_quote(TILDE_CTX, p)
    lam = TILDE_CTX.intensity(d)
    env = -TILDE_CTX.c * lam * np.exp(-TILDE_CTX.c * (d - p))
    np.testing.assert_allclose(fd, env, rtol=1e-6)


def test_limit_quote_and_hamiltonian_exponential():
    base = ExponentialIntensity(A * D, K)
    p = np.linspace(-3, 10, 14)
    np.testing.assert_allclose(limit_optimal_quote(base, p), p + 1 / K, atol=1e-12)
    np.testing.assert_allclose(limit_hamiltonian(base, G, p),
                               G * A * D * np.exp(-K * p - 1) / K, rtol=1e-12)
    with pytest.raises(InvalidArgumentError):
        limit_hamiltonian(base, 0.0, p)


def test_inverse_hamiltonian_example():
    p = inverse_hamiltonian(CTX, 7.2e-3)
    assert math.isclose(hamiltonian_value(CTX, p), 7.2e-3, rel_tol=1e-10)
    assert abs(p - (-0.7994)) < 1e-3


def test_inverse_hamiltonian_rejects_nonpositive():
    with pytest.raises(OutOfRangeError):
        inverse_hamiltonian(CTX, 0.0)


def test_constrained_floor_and_continuity():
    cc = ConstrainedContext(CTX, 0.0)
    p = np.linspace(-6, 4, 41)
    q = constrained_quote(cc, p)
    assert np.all(q >= 0.0)
    free = hamiltonian_value(CTX, p)
    hc = constrained_hamiltonian(cc, p)
    assert np.all(hc <= free + 1e-15)
    eps = 1e-7
    a, b = constrained_hamiltonian(cc, cc.p_min - eps), constrained_hamiltonian(cc, cc.p_min + eps)
    assert abs(a - b) < 1e-8


def test_context_validates_arguments():
    with pytest.raises(InvalidArgumentError):
        QuoteContext(0.0, D, CTX.intensity)
    with pytest.raises(InvalidArgumentError):
        QuoteContext(G, -1.0, CTX.intensity)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 15), st.floats(1e-4, 0.2))
def test_round_trip_property(p, c_over_k):
    ctx = QuoteContext(c_over_k * K / D, D, figure1_tilde())
    d = optimal_quote(ctx, p)
    assert abs(ctx.quote_equation(d) - p) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 15), st.floats(0.01, 5.0))
def test_hamiltonian_decreasing_property(p, gap):
    assert hamiltonian_value(TILDE_CTX, p + gap) < hamiltonian_value(TILDE_CTX, p)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1.0))
def test_inverse_round_trip_property(y):
    p = inverse_hamiltonian(CTX, y)
    assert math.isclose(hamiltonian_value(CTX, p), y, rel_tol=1e-9)


def test_documented_examples():
    assert optimal_quote(CTX, 0.0) == pytest.approx(20 * math.log(7 / 6), abs=1e-10)
    assert optimal_quote(CTX, 1.0) == pytest.approx(1 + 20 * math.log(7 / 6), abs=1e-10)
    h0 = hamiltonian_value(CTX, 0.0)
    assert h0 == pytest.approx((1 / 6) * (7 / 6) ** -7 * 0.1, rel=1e-12)
    assert h0 == pytest.approx(5.665e-3, rel=1e-3)
    assert hamiltonian_value(CTX, 1.0) == pytest.approx(h0 * math.exp(-0.3), rel=1e-12)
    base = CTX.intensity
    assert limit_optimal_quote(base, 0.0) == pytest.approx(1 / 0.3, abs=1e-10)
    assert limit_optimal_quote(base, -3.0) == pytest.approx(1 / 0.3 - 3, abs=1e-10)
    assert limit_hamiltonian(base, G, 0.0) == pytest.approx(1.2263e-4, rel=1e-4)
    assert limit_hamiltonian(base, 2 * G, 0.0) == pytest.approx(2 * limit_hamiltonian(base, G, 0.0))
    cc = ConstrainedContext(CTX, 0.0)
    assert cc.p_min == pytest.approx(-20 * math.log(7 / 6), abs=1e-10)
    assert constrained_hamiltonian(cc, cc.p_min + 1) == hamiltonian_value(CTX, cc.p_min + 1)
    assert inverse_hamiltonian(CTX, h0) == pytest.approx(0.0, abs=1e-9)


def test_quote_increases_toward_limit_as_lots_shrink():
    base = ExponentialIntensity(A * D, K)
    prev = -math.inf
    for d in (50.0, 25.0, 12.5, 6.25):
        q = optimal_quote(QuoteContext(G, d, base.scaled(1 / d)), 0.5)
        assert q > prev
        prev = q
    assert prev < limit_optimal_quote(base, 0.5)


def test_scan_mode_finds_global_maximum():
    from limitexec.intensity import TabulatedIntensity
    bumpy = TabulatedIntensity([(0.0, 1.0), (1.0, 0.9), (2.0, 0.05), (3.0, 0.045), (4.0, 0.002)])
    assert not bumpy.curvature_ok
    ctx = QuoteContext(G, D, bumpy)
    for p in (-1.0, 0.0, 1.0, 2.5):
        d = optimal_quote(ctx, p)
        grid = np.linspace(p, p + 40, 400001)
        assert ctx.objective(p, d) >= ctx.objective(p, grid).max() - 1e-12
