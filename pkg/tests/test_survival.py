import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstacle_walk import ruin
from obstacle_walk import survival as sv
from obstacle_walk.env import Environment, homogeneous_env, records, sample_env

from _oracles import enumerate_survival


def bold_weight(env, beta):
    obst = {int(p) for p in env.positions}
    emb = math.exp(-beta)
    return lambda x: 0.0 if x <= 0 else (emb if x in obst else 1.0)


def soft_weight(env, beta):
    emb = math.exp(-beta)
    if env.is_homogeneous:
        t = int(env.gaps[0])
        return lambda x: emb if x % t == 0 else 1.0
    obst = {int(p) for p in env.positions}
    return lambda x: emb if x in obst else 1.0


# ---------------------------------------------------------------------------
# exact values and enumeration oracles


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_soft_3z_two_steps(beta):
    # S_2 = 0 with probability 1/2, costing one trial; +-2 carry no obstacle
    z2 = sv.survive_exact(homogeneous_env(3, 4), 2, beta, mode="soft")
    assert z2 == pytest.approx(math.log(0.5 + 0.5 * math.exp(-beta)), rel=1e-14)


def test_zero_steps_survive_surely():
    e = sample_env(1.5, 10, seed=5)
    assert sv.survive_exact(e, 0, 1.0, mode="bold") == 0.0
    assert sv.survive_exact(e, 0, 1.0, mode="soft") == 0.0


def test_bold_one_step_first_gap_three():
    e = Environment(gamma=1.0, gaps=np.array([3, 2, 2]))
    assert sv.survive_exact(e, 1, 0.9, mode="bold") == pytest.approx(
        math.log(0.5), rel=1e-15
    )


@pytest.mark.parametrize("beta", [math.log(2), 0.7])
def test_bold_matches_enumeration(beta):
    rng = np.random.default_rng(61)
    for _ in range(6):
        gaps = rng.integers(1, 5, size=6)
        e = Environment(gamma=1.0, gaps=gaps)
        w = bold_weight(e, beta)
        curve = sv.survive_log_curve(e, 10, beta, mode="bold")
        for n in (1, 3, 6, 10):
            exact = float(enumerate_survival(w, n))
            got = math.exp(curve[n]) if curve[n] > -math.inf else 0.0
            assert got == pytest.approx(exact, abs=1e-12)


def test_soft_homogeneous_matches_enumeration():
    beta = 0.8
    e = homogeneous_env(3, 6)
    w = soft_weight(e, beta)
    for n in (1, 2, 5, 9):
        exact = float(enumerate_survival(w, n))
        assert math.exp(sv.survive_exact(e, n, beta, mode="soft")) == pytest.approx(
            exact, abs=1e-12
        )


def test_soft_sampled_env_matches_enumeration():
    # one-sided environment: negative sites carry no obstacles in soft mode
    beta = 1.1
    e = Environment(gamma=1.0, gaps=np.array([2, 1, 3, 2]))
    w = soft_weight(e, beta)
    for n in (1, 4, 8):
        exact = float(enumerate_survival(w, n))
        assert math.exp(sv.survive_exact(e, n, beta, mode="soft")) == pytest.approx(
            exact, abs=1e-12
        )


def test_cyclic_equals_full_dp_homogeneous():
    beta = 0.6
    cyc = sv.log_survival_homogeneous(3, beta, 8)
    e = homogeneous_env(3, 10)
    full = sv.survive_log_curve(e, 8, beta, mode="soft")
    assert np.allclose(cyc, full, atol=1e-12)


# ---------------------------------------------------------------------------
# monotonicity


def test_monotone_in_n_and_beta():
    e = sample_env(1.0, 20, seed=17)
    curve = sv.survive_log_curve(e, 40, 0.8, mode="bold")
    assert (np.diff(curve) <= 1e-12).all()
    softer = sv.survive_exact(e, 40, 0.4, mode="soft")
    harder = sv.survive_exact(e, 40, 1.6, mode="soft")
    assert harder < softer


def test_extra_obstacle_never_helps():
    sparse = Environment(gamma=1.0, gaps=np.array([5, 5]))
    dense = Environment(gamma=1.0, gaps=np.array([2, 3, 5]))  # same span, one more
    for mode in ("bold", "soft"):
        a = sv.survive_exact(sparse, 12, 0.7, mode=mode)
        b = sv.survive_exact(dense, 12, 0.7, mode=mode)
        assert b <= a + 1e-12


# ---------------------------------------------------------------------------
# restricted survival and record bands


def test_restricted_barrier_one_kills():
    e = Environment(gamma=1.0, gaps=np.array([4, 3]))
    assert sv.survive_restricted(e, 1, 0.5, barrier=1) == -math.inf


def test_restricted_unreachable_equals_exact():
    e = sample_env(1.5, 15, seed=23)
    n = 20
    far = int(e.positions[-1]) + n + 1
    assert sv.survive_restricted(e, n, 0.9, barrier=n + 1) == pytest.approx(
        sv.survive_exact(e, n, 0.9, mode="bold"), rel=1e-12
    )
    assert far > n  # the barrier really was unreachable


def test_restricted_below_unrestricted():
    e = sample_env(1.0, 12, seed=31)
    full = sv.survive_exact(e, 30, 0.6, mode="bold")
    for barrier in (2, 5, 9):
        assert sv.survive_restricted(e, 30, 0.6, barrier=barrier) <= full + 1e-12


def test_record_bands_telescope():
    e = Environment(gamma=1.0, gaps=np.array([2, 1, 4, 1, 2, 8, 1]))
    rec = records(e)
    assert rec.count == 3
    for n in (6, 12, 20):
        bands = [sv.survive_record_band(e, n, 0.8, rec, k) for k in range(1, 4)]
        assert all(b >= -1e-15 for b in bands)
        # the walk starts on the first record base, so that band alone is the
        # mass that never reaches the second one; everything sums back to Z_n
        assert sum(bands) == pytest.approx(
            math.exp(sv.survive_exact(e, n, 0.8, mode="bold")), abs=1e-12
        )
    with pytest.raises(IndexError):
        sv.survive_record_band(e, 10, 0.8, rec, 4)


# ---------------------------------------------------------------------------
# hitting before death


@pytest.mark.parametrize("beta", [0.4, 1.0, 2.3])
def test_hit_unit_gaps_closed_forms(beta):
    e = homogeneous_env(1, 6)
    assert sv.hit_before_death(e, beta, 1) == pytest.approx(
        math.exp(-beta) / 2, rel=1e-13
    )
    assert sv.hit_before_death(e, beta, 2) == pytest.approx(
        math.exp(-2 * beta) / 4, rel=1e-13
    )
    emb2 = math.exp(-2 * beta)
    assert sv.hit_before_death(e, beta, 3) == pytest.approx(
        math.exp(-3 * beta) / (2 * (4 - emb2)), rel=1e-13
    )
    assert sv.lyapunov(e, beta, 1) == pytest.approx(beta + math.log(2), abs=1e-12)
    assert sv.lyapunov(e, beta, 2) == pytest.approx(beta + math.log(2), abs=1e-12)


def _hit_oracle(env, beta, ell, horizon):
    """P(reach tau_ell before death) by absorbing lattice DP, no recurrences."""
    emb = math.exp(-beta)
    target = int(env.positions[ell])
    w = np.ones(target + 1)
    w[0] = 0.0
    for p in env.positions[1:ell]:
        w[int(p)] = emb
    mu = np.zeros(target + 1)
    mu[0] = 1.0
    hit = 0.0
    for _ in range(horizon):
        inflow = 0.5 * mu[target - 1]
        hit += inflow * emb  # the final arrival also pays its trial
        shift = np.zeros_like(mu)
        shift[1:] += mu[:-1]
        shift[:-1] += mu[1:]
        mu = 0.5 * w * shift
        mu[target] = 0.0
        if mu.sum() < 1e-18:
            break
    return hit


def test_hit_matches_lattice_oracle():
    e = Environment(gamma=1.0, gaps=np.array([2, 3, 1, 4]))
    for ell in (1, 2, 3, 4):
        oracle = _hit_oracle(e, 0.8, ell, horizon=6000)
        assert sv.hit_before_death(e, 0.8, ell) == pytest.approx(oracle, rel=1e-10)


def test_hit_curve_consistent_with_scalars():
    e = sample_env(1.5, 25, seed=40)
    curve = sv.log_hit_before_death_all(e, 1.2, 25)
    for ell in (1, 7, 25):
        assert curve[ell - 1] == pytest.approx(
            math.log(sv.hit_before_death(e, 1.2, ell)), rel=1e-13
        )
    with pytest.raises(IndexError):
        sv.log_hit_before_death_all(e, 1.2, 26)


def test_lyapunov_at_least_beta_and_finite():
    for trial in range(100):
        e = sample_env(1.5, 30, seed=90_000 + trial)
        lam = sv.lyapunov(e, 0.7, 30)
        assert lam >= 0.7 - 1e-12
        assert math.isfinite(lam)


def test_lyapunov_estimate_clamps():
    e = sample_env(1.0, 12, seed=3)
    assert sv.lyapunov_estimate(e, 0.9) == sv.lyapunov(e, 0.9, 12)
    assert sv.lyapunov_estimate(e, 0.9, ellmax=5) == sv.lyapunov(e, 0.9, 5)


# ---------------------------------------------------------------------------
# homogeneous free energy


def test_phi_hom_residual():
    phi = sv.phi_hom(1.0, 25)
    assert abs(ruin.qhat(25, phi) - math.e) <= 1e-10 * math.e


def test_phi_hom_expansion():
    t = 200
    phi = sv.phi_hom(1.0, t)
    factor = t * (1 - 2 * t * t * phi / math.pi**2) * (math.e - 1) / 4
    assert factor == pytest.approx(1.0, abs=0.10)


def test_phi_hom_monotone_in_t():
    vals = [sv.phi_hom(1.0, t) for t in range(3, 51)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    for t, v in zip(range(3, 51), vals):
        assert 0.0 < v < ruin.g(t)


def test_homogeneous_rate_matches_phi():
    n = 10_000
    logz = sv.log_survival_homogeneous(5, 1.0, n)
    rate = -logz[n] / n
    assert rate == pytest.approx(sv.phi_hom(1.0, 5), rel=0.02)


# ---------------------------------------------------------------------------
# coarse upper bound


def test_rough_ub_dominates_window_survival():
    rng = np.random.default_rng(88001)
    for trial in range(50):
        gamma = float(rng.choice([0.5, 1.0, 1.5]))
        e = sample_env(gamma, 20, seed=88_100 + trial)
        k = int(rng.integers(0, 5))
        ell = int(rng.integers(k + 2, min(e.L, k + 8) + 1))
        r = int(rng.integers(k + 1, ell))
        beta = float(rng.uniform(0.3, 2.0))
        n = int(rng.integers(1, 201))
        exact = sv.survive_window(e, n, beta, k, r, ell)
        assert sv.rough_ub(e, n, k, r, ell, beta) >= exact


def test_rough_ub_monotone_in_window():
    e = Environment(gamma=1.0, gaps=np.array([2, 5, 3, 4, 6, 2, 3]))
    n = 50
    prev = -math.inf
    for ell in range(3, 8):
        cur = sv.rough_ub(e, n, 0, 1, ell, 0.9)
        assert cur >= prev - 1e-12
        prev = cur


def test_rough_ub_degenerate_and_guards():
    e = Environment(gamma=1.0, gaps=np.array([3, 4, 2]))
    val = sv.rough_ub(e, 30, 0, 1, 2, 1.0)  # single interior obstacle
    assert math.isfinite(val)
    with pytest.raises(ValueError):
        sv.rough_ub(e, 30, 1, 1, 2, 1.0)
    with pytest.raises(IndexError):
        sv.rough_ub(e, 30, 0, 1, 9, 1.0)
    with pytest.raises(ValueError):
        sv.survive_window(e, 10, 1.0, 2, 1, 3)


def test_survive_window_matches_enumeration():
    beta = 0.9
    e = Environment(gamma=1.0, gaps=np.array([3, 3]))
    emb = math.exp(-beta)

    def w(x):
        if x in (0, 6):
            return 0.0
        return emb if x == 3 else 1.0

    for n in (1, 3, 6):
        exact = float(enumerate_survival(w, n, start=3))
        got = sv.survive_window(e, n, beta, 0, 1, 2)
        assert math.exp(got) == pytest.approx(exact, abs=1e-12)
