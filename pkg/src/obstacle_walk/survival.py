"""Exact survival probabilities by lattice dynamic programming.

The killed walk: at every arrival at an obstacle site the walk survives with
probability e^{-beta}; in bold mode any arrival at a site <= 0 kills with
probability one (the return to 0 included, although 0 carries an obstacle);
the time-0 position consumes no trial.  All log-scaled, exact up to float
rounding.
"""

from __future__ import annotations

import math

import numpy as np

from . import ruin
from . import constants

__all__ = [
    "survive_exact",
    "survive_log_curve",
    "survive_restricted",
    "survive_record_band",
    "hit_before_death",
    "log_hit_before_death_all",
    "lyapunov",
    "lyapunov_estimate",
    "phi_hom",
    "log_survival_homogeneous",
    "rough_ub",
]


def _forward_sweep(w, start_idx, n, pinned_sites=None):
    """Forward recursion mu_m(y) = w(y)/2 * (mu_{m-1}(y-1) + mu_{m-1}(y+1)).

    Returns (logZ array over m = 0..n, pinned log-masses dict site -> array).
    Mass leaving the array range is lost, so the caller must size `w` to cover
    every reachable site (or intend absorption at the edges).
    """
    w = np.asarray(w, dtype=np.float64)
    wh = 0.5 * w
    mu = np.zeros_like(w)
    mu[start_idx] = 1.0
    logz = np.full(n + 1, -np.inf)
    logz[0] = 0.0
    logacc = 0.0
    pinned = {s: np.full(n + 1, -np.inf) for s in (pinned_sites or ())}
    for s in pinned:
        if s == start_idx:
            pinned[s][0] = 0.0
    shift = np.zeros_like(w)
    for m in range(1, n + 1):
        shift[:] = 0.0
        shift[1:] += mu[:-1]
        shift[:-1] += mu[1:]
        mu = wh * shift
        total = float(mu.sum())
        if total <= 0.0:
            break
        mu /= total
        logacc += math.log(total)
        logz[m] = logacc
        for s in pinned:
            v = mu[s]
            if v > 0.0:
                pinned[s][m] = math.log(v) + logacc
    return logz, pinned


def _bold_weights(env, x_max, beta, extra_zero=None):
    w = np.ones(x_max + 1)
    w[0] = 0.0
    pos = env.positions
    obst = pos[(pos >= 1) & (pos <= x_max)]
    w[obst] = math.exp(-beta)
    if extra_zero is not None and extra_zero <= x_max:
        w[extra_zero] = 0.0
    return w


def survive_log_curve(env, n, beta, mode="bold", start=0):
    """log Z_m for every m = 0..n (one DP run); see survive_exact."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    if mode == "bold":
        if start < 0:
            raise ValueError("bold mode starts at a site >= 0")
        w = _bold_weights(env, start + n, beta)
        logz, _ = _forward_sweep(w, start, n)
        return logz
    if mode == "soft":
        off = start - n
        w = np.ones(2 * n + 1)
        if env.is_homogeneous:
            # two-sided periodic: obstacles at every multiple of the gap
            t = int(env.gaps[0])
            sites = np.arange(off, start + n + 1)
            w[sites % t == 0] = math.exp(-beta)
        else:
            pos = env.positions
            obst = pos[(pos >= off) & (pos <= start + n)] - off
            w[obst] = math.exp(-beta)
        logz, _ = _forward_sweep(w, start - off, n)
        return logz
    raise ValueError(f"mode must be 'bold' or 'soft', got {mode!r}")


def survive_exact(env, n, beta, mode="bold", start=0):
    """log Z_n = log P(death time > n), exact DP over the full reachable range."""
    return float(survive_log_curve(env, n, beta, mode=mode, start=start)[n])


def survive_restricted(env, n, beta, barrier, start=0):
    """log P(death and first visit of `barrier` both after n), bold kill."""
    if barrier <= 0:
        raise ValueError("barrier must be a site > 0")
    if n < 0:
        raise ValueError("n must be >= 0")
    w = _bold_weights(env, start + n, beta, extra_zero=barrier)
    logz, _ = _forward_sweep(w, start, n)
    return float(logz[n])


def survive_record_band(env, n, beta, rec, k):
    """P(survive n steps and reach record base k but not record base k+1).

    The walk starts at tau*_1 = 0, so that base counts as hit at time 0 and
    the k=1 band starts from zero mass; the last band (k = K) has no barrier
    above it and is capped by the unrestricted probability.  Summing the bands
    over k = 1..K recovers Z_n exactly.
    """
    if not 1 <= k <= rec.count:
        raise IndexError(f"record rank {k} outside 1..{rec.count}")
    if k < rec.count:
        hi = math.exp(survive_restricted(env, n, beta, int(rec.record_bases[k])))
    else:
        hi = math.exp(survive_exact(env, n, beta, mode="bold"))
    if k == 1:
        lo = 0.0
    else:
        lo = math.exp(survive_restricted(env, n, beta, int(rec.record_bases[k - 1])))
    return hi - lo


def survive_window(env, n, beta, k, r, ell, start=None):
    """log P(survive n steps strictly between obstacles k and ell, from tau_r).

    Arrivals at tau_k or tau_ell absorb (mass lost); interior obstacles cost
    e^{-beta} per visit.  This is the quantity the coarse bound rough_ub
    dominates.
    """
    if not (0 <= k < r < ell):
        raise ValueError("need 0 <= k < r < ell")
    if ell > env.L:
        raise IndexError("ell beyond the environment")
    pos = env.positions
    lo, hi = int(pos[k]), int(pos[ell])
    w = np.ones(hi - lo + 1)
    w[0] = 0.0
    w[-1] = 0.0
    inner = pos[k + 1 : ell] - lo
    w[inner] = math.exp(-beta)
    s = int(pos[r]) if start is None else int(start)
    if not lo < s < hi:
        raise ValueError("start must lie strictly inside the window")
    logz, _ = _forward_sweep(w, s - lo, n)
    return float(logz[n])


# ---------------------------------------------------------------------------
# hitting before death


def log_hit_before_death_all(env, beta, ellmax):
    """log P(reach tau_ell before dying) for ell = 1..ellmax, in one sweep.

    Between obstacle visits the walk is a gambler's-ruin chain on obstacle
    indices; eliminating u_0 = 0 (any arrival at 0 kills) forward gives
    u_i = alpha_i * u_{i+1} with a first-order recurrence in alpha, so the
    whole curve costs O(ellmax).  Every obstacle arrival, the final one
    included, pays e^{-beta}.
    """
    if not 1 <= ellmax <= env.L:
        raise IndexError(f"ellmax must be in 1..{env.L}")
    emb = math.exp(-beta)
    T = env.gaps
    out = np.empty(ellmax)
    out[0] = -beta - math.log(2.0 * T[0])
    alpha = 0.0
    for i in range(1, ellmax):
        p_l = 0.5 / T[i - 1]
        p_r = 0.5 / T[i]
        p_s = 1.0 - p_l - p_r
        alpha = emb * p_r / (1.0 - emb * p_s - emb * p_l * alpha)
        out[i] = out[i - 1] + math.log(alpha)
    return out


def hit_before_death(env, beta, ell):
    """P(H_{tau_ell} < death) for the walk started at tau_0 = 0, bold kill."""
    return math.exp(log_hit_before_death_all(env, beta, ell)[ell - 1])


def lyapunov(env, beta, ell):
    """lambda(beta, ell) = -(1/ell) log P(reach tau_ell before death)."""
    lp = log_hit_before_death_all(env, beta, ell)[ell - 1]
    return math.inf if lp == -math.inf else -lp / ell


def lyapunov_estimate(env, beta, ellmax=None):
    """Plug-in estimate lambda(beta, ell_max) at the largest available index."""
    ell = env.L if ellmax is None else min(ellmax, env.L)
    return lyapunov(env, beta, ell)


# ---------------------------------------------------------------------------
# homogeneous environment


def phi_hom(beta, t):
    """Free energy of the equally-spaced environment: root of qhat(t, f) = e^beta."""
    if not beta > 0:
        raise ValueError("beta must be > 0")
    gt = ruin.g(t)
    target = math.exp(beta)
    lo, hi = gt * 1e-18, gt * (1.0 - 1e-15)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ruin.qhat(t, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def log_survival_homogeneous(t, beta, n):
    """log Z_m, m = 0..n, for soft obstacles at every multiple of t.

    Runs the DP on the circle Z/tZ (the killed walk only feels its position
    modulo t, so the projection is exact) — this is what makes the t=5,
    n = 10^4 rate check instant.
    """
    t = int(t)
    if t < 2:
        raise ValueError("t must be >= 2")
    w = np.ones(t)
    w[0] = math.exp(-beta)
    wh = 0.5 * w
    mu = np.zeros(t)
    mu[0] = 1.0
    logz = np.zeros(n + 1)
    logacc = 0.0
    for m in range(1, n + 1):
        mu = wh * (np.roll(mu, 1) + np.roll(mu, -1))
        total = float(mu.sum())
        mu /= total
        logacc += math.log(total)
        logz[m] = logacc
    return logz


def rough_ub(env, n, k, r, ell, beta):
    """log upper bound C n^2 (ell-k) e^{-phi_hom(beta, max gap)(k, ell]} * n.

    A coarse but uniform bound on surviving n steps between the k-th and
    ell-th obstacles; used for series-truncation certificates.  The constant
    is the module's fitted one.
    """
    if not (0 <= k < r < ell):
        raise ValueError("need 0 <= k < r < ell")
    if ell > env.L:
        raise IndexError("ell beyond the environment")
    if n < 1:
        raise ValueError("n must be >= 1")
    maxgap = int(env.gaps[k:ell].max())
    t_eff = max(maxgap, 3)
    return (
        math.log(constants.ROUGH_UB_C * n * n * (ell - k))
        - phi_hom(beta, t_eff) * n
    )
