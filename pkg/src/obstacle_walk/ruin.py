"""Slab-confinement ("ruin") probabilities of the simple random walk.

For a slab of width t >= 3, q0(t, n) is the probability that the walk started
at 0 first revisits {-t, 0, t} at time n and does so at 0; q1(t, n) is the
same event ending at +t; q = q0 + 2*q1 is the full first-exit law of the
punctured slab.  Closed spectral forms, the confinement rate g(t), the moment
generating functions qhat* on (0, g(t)) and their first two derivatives in f
are all exact (no quadrature, no differencing).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "g",
    "q0",
    "q1",
    "q",
    "log_q0_array",
    "log_q1_array",
    "log_q_array",
    "delta_angle",
    "qhat",
    "qhat0",
    "qhat1",
    "qhat0_inf",
    "qhat_d1",
    "qhat_d2",
]


def _check_t(t):
    if t != int(t) or int(t) < 3:
        raise ValueError(f"slab width must be an integer >= 3, got {t!r}")
    return int(t)


def g(t):
    """Confinement rate of a width-t slab, -log cos(pi/t)."""
    t = _check_t(t)
    return -math.log(math.cos(math.pi / t))


def _angles(t):
    # spectral angles pi*nu/t, nu = 1..floor((t-1)/2); all cosines positive
    nu = np.arange(1, (t - 1) // 2 + 1)
    return np.pi * nu / t


def q0(t, n):
    """P(first return to {-t,0,t} happens at time n, at 0)."""
    t = _check_t(t)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n % 2:
        return 0.0
    if n == 2:
        # the half-range spectral sum drops the self-paired mode nu = t/2
        # (even t), whose cos^{n-2} = 0^0 contributes exactly here; the full
        # spectrum gives (1/t) sum sin^2(pi k/t) = 1/2 for every t
        return 0.5
    th = _angles(t)
    c, s = np.cos(th), np.sin(th)
    # terms are all positive; descending magnitude in nu already
    return float((2.0 / t) * np.sum(c ** (n - 2) * s**2))


def q1(t, n):
    """P(first return to {-t,0,t} happens at time n, at +t)."""
    t = _check_t(t)
    if n < 1:
        raise ValueError("n must be >= 1")
    if (n - t) % 2 or n < t:
        return 0.0
    th = _angles(t)
    c, s = np.cos(th), np.sin(th)
    sign = np.where(np.arange(1, len(th) + 1) % 2 == 1, 1.0, -1.0)
    # alternating sum, terms in descending magnitude (cos decreases in nu)
    val = float((1.0 / t) * np.sum(sign * c ** (n - 2) * s**2))
    return max(val, 0.0)


def q(t, n):
    """First-exit law of the punctured slab: q0 + 2*q1."""
    return q0(t, n) + 2.0 * q1(t, n)


def _log_terms(t, nmax):
    """log-magnitude matrix (nu, n) for n = 1..nmax plus per-nu signs for q1."""
    th = _angles(t)
    logc = np.log(np.cos(th))  # all cosines positive for nu <= (t-1)/2
    logs2 = 2.0 * np.log(np.sin(th))
    n = np.arange(1, nmax + 1, dtype=np.float64)
    lm = np.outer(logc, n - 2.0) + logs2[:, None]
    return lm


def _signed_logsumexp(lm, signs, scale_log):
    """Signed sum of exp(lm) rows (over axis 0), returned as log values.

    Rows are already ordered by descending magnitude (nu ascending), which
    keeps the alternating q1 sums as accurate as float64 allows.
    """
    m = lm.max(axis=0)
    acc = np.zeros_like(m)
    for i in range(lm.shape[0]):
        acc += signs[i] * np.exp(lm[i] - m)
    # alternating near-cancellation can leave tiny negatives; clamp (true q >= 0)
    np.maximum(acc, 0.0, out=acc)
    with np.errstate(divide="ignore"):
        out = m + np.log(acc) + scale_log
    out[np.isnan(out)] = -np.inf
    return out


def log_q0_array(t, nmax):
    """log q0(t, n) for n = 1..nmax (index n-1); -inf where q0 = 0."""
    t = _check_t(t)
    lm = _log_terms(t, nmax)
    ones = np.ones(lm.shape[0])
    out = _signed_logsumexp(lm, ones, math.log(2.0 / t))
    n = np.arange(1, nmax + 1)
    out[n % 2 == 1] = -np.inf
    if nmax >= 2:
        out[1] = math.log(0.5)  # see q0: self-paired spectral mode at n = 2
    return out


def log_q1_array(t, nmax):
    """log q1(t, n) for n = 1..nmax (index n-1); -inf where q1 = 0."""
    t = _check_t(t)
    lm = _log_terms(t, nmax)
    signs = np.where(np.arange(1, lm.shape[0] + 1) % 2 == 1, 1.0, -1.0)
    out = _signed_logsumexp(lm, signs, -math.log(t))
    n = np.arange(1, nmax + 1)
    out[((n - t) % 2 != 0) | (n < t)] = -np.inf
    return out


def log_q_array(t, nmax):
    """log q(t, n) = log(q0 + 2*q1) for n = 1..nmax."""
    l0 = log_q0_array(t, nmax)
    l1 = log_q1_array(t, nmax)
    return np.logaddexp(l0, l1 + math.log(2.0))


# ---------------------------------------------------------------------------
# generating functions on (0, g(t)) via the angle Delta(f) = arctan sqrt(e^2f - 1)


def delta_angle(f):
    """Angle Delta with cos(Delta) = e^{-f}; maps (0, g(t)) onto (0, pi/t)."""
    if f <= 0:
        raise ValueError("delta_angle needs f > 0")
    return math.atan(math.sqrt(math.expm1(2.0 * f)))


def _check_domain(t, f):
    t = _check_t(t)
    if not 0.0 < f < g(t):
        raise ValueError(f"f = {f} outside (0, g({t})) = (0, {g(t):.6g})")
    return t


def qhat(t, f):
    """Sum of q(t, n) e^{fn} over n, in closed form."""
    t = _check_domain(t, f)
    d = delta_angle(f)
    td = t * d
    return 1.0 + math.tan(d) * (1.0 - math.cos(td)) / math.sin(td)


def qhat0(t, f):
    """Sum of q0(t, n) e^{fn} over n."""
    t = _check_domain(t, f)
    d = delta_angle(f)
    td = t * d
    return 1.0 - math.tan(d) * math.cos(td) / math.sin(td)


def qhat1(t, f):
    """Sum of q1(t, n) e^{fn} over n."""
    t = _check_domain(t, f)
    d = delta_angle(f)
    return math.tan(d) / (2.0 * math.sin(t * d))


def qhat0_inf(f):
    """Sum of first-return-to-0 probabilities e^{fn}, infinite slab (f <= 0)."""
    if f > 0:
        raise ValueError("qhat0_inf needs f <= 0")
    return 1.0 - math.sqrt(-math.expm1(2.0 * f))


def _tilde_d1(t, d):
    """First derivatives of the MGFs with respect to the angle Delta."""
    s, c = math.sin(d), math.cos(d)
    td = t * d
    std, ctd = math.sin(td), math.cos(td)
    tand = s / c
    d1_1 = (1.0 / c**2 - t * tand * ctd / std) / (2.0 * std)
    d1_0 = (-ctd / c**2 + t * tand / std) / std
    return d1_0, d1_1


def _tilde_d2(t, d):
    """Second derivatives of the MGFs with respect to the angle Delta."""
    s, c = math.sin(d), math.cos(d)
    td = t * d
    std, ctd = math.sin(td), math.cos(td)
    tand = s / c
    d2_1 = (
        -2.0 * t * ctd / (std * c**2)
        + 2.0 * s / c**3
        + t**2 * (1.0 + ctd**2) * tand / std**2
    ) / (2.0 * std)
    d2_0 = (
        2.0 * t / (std * c**2)
        - 2.0 * (s / c**3) * ctd
        - 2.0 * t**2 * ctd * tand / std**2
    ) / std
    return d2_0, d2_1


def _pick(which, v0, v1):
    if which == 0:
        return v0
    if which == 1:
        return v1
    if which == "total":
        return v0 + 2.0 * v1
    raise ValueError(f"which must be 0, 1 or 'total', got {which!r}")


def qhat_d1(t, f, which="total"):
    """d/df of qhat0 / qhat1 / qhat, by the chain rule through Delta(f)."""
    t = _check_domain(t, f)
    d = delta_angle(f)
    dp = math.cos(d) / math.sin(d)  # Delta'(f) = 1/tan(Delta)
    t0, t1 = _tilde_d1(t, d)
    return _pick(which, dp * t0, dp * t1)


def qhat_d2(t, f, which="total"):
    """d^2/df^2 of qhat0 / qhat1 / qhat."""
    t = _check_domain(t, f)
    d = delta_angle(f)
    s, c = math.sin(d), math.cos(d)
    dp = c / s
    dpp = -c / s**3  # Delta''(f)
    t0, t1 = _tilde_d1(t, d)
    s0, s1 = _tilde_d2(t, d)
    return _pick(which, dpp * t0 + dp**2 * s0, dpp * t1 + dp**2 * s1)
