import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstacle_walk import constants, ruin

from _oracles import centered_diff, centered_diff2, ruin_law_oracle


@pytest.mark.parametrize("t", [3, 4, 5, 6, 8])
def test_matches_transfer_matrix_oracle(t):
    o0, o1 = ruin_law_oracle(t, 60)
    for n in range(1, 61):
        assert ruin.q0(t, n) == pytest.approx(o0[n - 1], abs=1e-12)
        assert ruin.q1(t, n) == pytest.approx(o1[n - 1], abs=1e-12)
        assert ruin.q(t, n) == pytest.approx(o0[n - 1] + 2 * o1[n - 1], abs=1e-12)


def test_spot_values():
    assert ruin.q0(3, 2) == pytest.approx(0.5, abs=1e-15)
    assert ruin.q1(3, 3) == pytest.approx(1 / 8, abs=1e-15)
    assert ruin.q(3, 4) == pytest.approx(1 / 8, abs=1e-15)
    assert ruin.q1(4, 4) == pytest.approx(1 / 16, abs=1e-15)
    for t in range(3, 9):
        # single straight path 0 -> t
        assert ruin.q1(t, t) == pytest.approx(2.0**-t, rel=1e-12)


def test_domain_errors():
    for bad in (2, 1, 0, -3, 2.5):
        with pytest.raises(ValueError):
            ruin.q(bad, 4)
        with pytest.raises(ValueError):
            ruin.g(bad)


def test_g_values():
    assert ruin.g(3) == pytest.approx(math.log(2), rel=1e-15)
    assert ruin.g(4) == pytest.approx(0.5 * math.log(2), rel=1e-15)
    t = 1000
    assert ruin.g(t) * 2 * t**2 / math.pi**2 == pytest.approx(1.0, abs=1e-4)
    # strictly decreasing in t
    gs = [ruin.g(t) for t in range(3, 51)]
    assert all(a > b for a, b in zip(gs, gs[1:]))


@given(st.integers(3, 40), st.integers(1, 200))
def test_parity_support(t, n):
    if n % 2 == 1:
        assert ruin.q0(t, n) == 0.0
    if (n - t) % 2 == 1 or n < t:
        assert ruin.q1(t, n) == 0.0
    assert 0.0 <= ruin.q(t, n) <= 1.0


@pytest.mark.parametrize("t", [3, 5, 12, 41])
def test_log_arrays_match_scalars(t):
    l0 = ruin.log_q0_array(t, 200)
    l1 = ruin.log_q1_array(t, 200)
    lq = ruin.log_q_array(t, 200)
    for n in range(1, 201):
        assert np.exp(l0[n - 1]) == pytest.approx(ruin.q0(t, n), abs=1e-14)
        assert np.exp(l1[n - 1]) == pytest.approx(ruin.q1(t, n), abs=1e-14)
        assert np.exp(lq[n - 1]) == pytest.approx(ruin.q(t, n), abs=1e-14)


def test_log_array_decay_rate():
    # for n >> t^2 the law decays at exactly g(t) per step
    t = 5
    lq = ruin.log_q_array(t, 20000)
    slope = (lq[19999] - lq[9999]) / 10000.0
    assert slope == pytest.approx(-ruin.g(t), rel=1e-6)


def test_law_sums_to_one():
    # q(t, .) is a probability law on n >= 1
    t = 5
    lq = ruin.log_q_array(t, 10**4)
    total = np.exp(lq[np.isfinite(lq)]).sum()
    assert total == pytest.approx(1.0, abs=1e-8)


def test_partial_sums_match_qhat():
    t, f = 7, 0.4 * ruin.g(7)
    n = np.arange(1, 4001)
    lq = ruin.log_q_array(t, 4000)
    part = np.exp(lq + f * n)[np.isfinite(lq)].sum()
    assert part == pytest.approx(ruin.qhat(t, f), rel=1e-10)
    l0 = ruin.log_q0_array(t, 4000)
    part0 = np.exp(l0 + f * n)[np.isfinite(l0)].sum()
    assert part0 == pytest.approx(ruin.qhat0(t, f), rel=1e-10)
    l1 = ruin.log_q1_array(t, 4000)
    part1 = np.exp(l1 + f * n)[np.isfinite(l1)].sum()
    assert part1 == pytest.approx(ruin.qhat1(t, f), rel=1e-10)


def test_delta_angle():
    assert ruin.delta_angle(0.5 * math.log(2)) == pytest.approx(math.pi / 4, rel=1e-15)
    # cos(Delta) = e^{-f}
    for f in (0.01, 0.3, 1.7):
        assert math.cos(ruin.delta_angle(f)) == pytest.approx(math.exp(-f), rel=1e-14)


def test_qhat0_inf():
    assert ruin.qhat0_inf(0.0) == 1.0
    assert ruin.qhat0_inf(-0.5) == pytest.approx(1 - math.sqrt(1 - math.exp(-1)), rel=1e-14)
    with pytest.raises(ValueError):
        ruin.qhat0_inf(0.1)


@given(st.integers(3, 60), st.floats(0.02, 0.98))
@settings(max_examples=60)
def test_qhat_linearity(t, u):
    f = u * ruin.g(t)
    assert ruin.qhat(t, f) == pytest.approx(
        ruin.qhat0(t, f) + 2 * ruin.qhat1(t, f), rel=1e-12
    )
    assert ruin.qhat_d1(t, f) == pytest.approx(
        ruin.qhat_d1(t, f, 0) + 2 * ruin.qhat_d1(t, f, 1), rel=1e-12
    )


def test_qhat_domain():
    with pytest.raises(ValueError):
        ruin.qhat(5, 0.0)
    with pytest.raises(ValueError):
        ruin.qhat(5, ruin.g(5))
    with pytest.raises(ValueError):
        ruin.qhat(5, -0.1)


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(20240817)
    for _ in range(20):
        t = int(rng.integers(3, 80))
        f = float(rng.uniform(0.15, 0.85)) * ruin.g(t)
        for which in (0, 1, "total"):
            fn = lambda x: ruin.qhat(t, x) if which == "total" else (
                ruin.qhat0(t, x) if which == 0 else ruin.qhat1(t, x)
            )
            d1 = ruin.qhat_d1(t, f, which)
            assert d1 == pytest.approx(centered_diff(fn, f, h=1e-7 * ruin.g(t)), rel=1e-6)
            d2 = ruin.qhat_d2(t, f, which)
            assert d2 == pytest.approx(centered_diff2(fn, f, h=2e-4 * ruin.g(t)), rel=2e-5)


def test_derivatives_positive_and_increasing():
    # MGFs of positive laws: value, first and second derivatives all positive
    for t in (3, 11, 101):
        for u in (0.1, 0.5, 0.9):
            f = u * ruin.g(t)
            assert ruin.qhat(t, f) > 1.0
            assert ruin.qhat_d1(t, f) > 0.0
            assert ruin.qhat_d2(t, f) > 0.0


@pytest.mark.parametrize("t,tol", [(100, 0.10), (400, 0.05)])
def test_large_t_asymptotics(t, tol):
    eps = t**-0.5
    f = math.pi**2 * (1 - eps) / (2 * t**2)
    te = t * eps
    assert (ruin.qhat(t, f) - 1) * te / 4 == pytest.approx(1.0, abs=tol)
    assert (ruin.qhat0(t, f) - 1) * te / 2 == pytest.approx(1.0, abs=tol)
    assert ruin.qhat1(t, f) * te == pytest.approx(1.0, abs=tol)
    assert ruin.qhat_d1(t, f) * math.pi**2 * eps**2 / (8 * t) == pytest.approx(1.0, abs=tol)
    assert ruin.qhat_d1(t, f, 0) * math.pi**2 * eps**2 / (4 * t) == pytest.approx(1.0, abs=tol)
    assert ruin.qhat_d1(t, f, 1) * math.pi**2 * eps**2 / (2 * t) == pytest.approx(1.0, abs=tol)
    assert ruin.qhat_d2(t, f) * math.pi**4 * eps**3 / (32 * t**3) == pytest.approx(1.0, abs=tol)
    assert ruin.qhat_d2(t, f, 0) * math.pi**4 * eps**3 / (16 * t**3) == pytest.approx(1.0, abs=tol)
    assert ruin.qhat_d2(t, f, 1) * math.pi**4 * eps**3 / (8 * t**3) == pytest.approx(1.0, abs=tol)


@pytest.mark.parametrize("t", [11, 21, 41])
def test_decay_envelope_sandwich(t):
    # frozen two-sided envelope around the exact ruin mass: both bounds share
    # the 1/(t^3 ^ n^{3/2}) shape; the lower bound needs n even, or n odd
    # beyond the calibrated threshold c5*t^2 where the odd-n corridor has
    # filled out
    nmax = 20 * t * t
    n = np.arange(1, nmax + 1)
    logr = (
        ruin.log_q_array(t, nmax)
        + ruin.g(t) * n
        + np.log(np.minimum(float(t) ** 3, n**1.5))
    )
    ratio = np.exp(logr)
    even = n % 2 == 0
    odd_dom = (n % 2 == 1) & (n >= t)
    assert (ratio[even | odd_dom] <= constants.RUIN_SANDWICH_C4).all()
    assert (ratio[even] >= constants.RUIN_SANDWICH_C3).all()
    lower_odd = (n % 2 == 1) & (n >= constants.RUIN_SANDWICH_C5 * t * t)
    assert (ratio[lower_odd] >= constants.RUIN_SANDWICH_C3).all()
