"""Optimal-gap selection: score functions, minimizers, localization interval.

The score of gap ell balances the cost of reaching it against the confinement
rate it offers over the remaining time:

    G(ell)  = [ lambda(beta, ell-1) * (ell-1) + g(T_ell) * n ] / N
    G~(ell) = [ lambda_est * (ell-1) + pi^2/(2 T_ell^2) * n ] / N

with N = n^{gamma/(gamma+2)} the localization scale.  The minimizer sits on a
record gap: any other index is dominated by the latest record before it
(no farther to walk, at least as wide a gap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ruin
from .env import records, sample_env
from .survival import log_hit_before_death_all

__all__ = [
    "GapSelection",
    "WindowExhausted",
    "score_G",
    "score_Gtilde",
    "select",
    "localization_env",
]

_MAX_WINDOW = 1 << 22


class WindowExhausted(RuntimeError):
    """The scan window cannot be certified to contain the minimizer."""

    def __init__(self, message, diagnostics):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class GapSelection:
    """Result of the minimizer scan over one environment at horizon n."""

    env: object
    n: int
    beta: float
    N: float
    ell0: int
    ell0_tilde: int
    k0: int
    T1: int
    T2: int
    i_next: int
    I_loc: tuple
    G: np.ndarray
    G_tilde: np.ndarray
    lambda_est: float

    @property
    def agree(self) -> bool:
        return self.ell0 == self.ell0_tilde


def _g_eff(t: int) -> float:
    # gaps of width 1 or 2 get the finite surrogate g(3): they are never
    # competitive, but the score must stay finite
    return ruin.g(max(int(t), 3))


def _scale(env, n: int) -> float:
    return float(n) ** (env.gamma / (env.gamma + 2.0))


def score_G(env, n: int, beta: float, ell: int) -> float:
    """G(ell); lambda(beta, 0) = 0 makes G(1) = g(T_1) n / N."""
    N = _scale(env, n)
    reach = 0.0
    if ell > 1:
        reach = -float(log_hit_before_death_all(env, beta, ell - 1)[ell - 2])
    return (reach + _g_eff(env.gap(ell)) * n) / N


def score_Gtilde(env, n: int, beta: float, ell: int, lambda_est: float) -> float:
    """G~(ell) with a fixed Lyapunov estimate and the explicit pi^2 rate."""
    N = _scale(env, n)
    T = env.gap(ell)
    return (lambda_est * (ell - 1) + math.pi**2 / (2.0 * T * T) * n) / N


def _scan(env, n: int, beta: float):
    L = env.L
    N = _scale(env, n)
    loghit = log_hit_before_death_all(env, beta, L)
    reach = np.concatenate(([0.0], -loghit[: L - 1]))  # (ell-1)*lambda(beta, ell-1)
    lambda_est = -float(loghit[L - 1]) / L
    T = env.gaps.astype(np.float64)
    g_vals = np.array([_g_eff(t) for t in env.gaps])
    G = (reach + g_vals * n) / N
    G_tilde = (lambda_est * np.arange(L) + math.pi**2 / (2.0 * T * T) * n) / N
    ell0 = int(np.argmin(G)) + 1  # first minimum = smallest index on ties
    ell0_tilde = int(np.argmin(G_tilde)) + 1
    rec = records(env)
    k0 = int(np.searchsorted(rec.indices, ell0)) + 1
    if not (k0 <= rec.count and rec.indices[k0 - 1] == ell0):
        raise AssertionError("minimizer is not a record gap")
    i_next = int(rec.indices[k0]) if k0 < rec.count else L + 1
    others = np.delete(env.gaps[: i_next - 1], ell0 - 1)
    T2 = int(others.max()) if len(others) else 1
    pos = env.positions
    return GapSelection(
        env=env,
        n=n,
        beta=beta,
        N=N,
        ell0=ell0,
        ell0_tilde=ell0_tilde,
        k0=k0,
        T1=int(rec.record_gaps[k0 - 1]),
        T2=T2,
        i_next=i_next,
        I_loc=(int(pos[ell0 - 1]), int(pos[ell0])),
        G=G,
        G_tilde=G_tilde,
        lambda_est=lambda_est,
    )


def select(env, n: int, beta: float) -> GapSelection:
    """Scan for the optimal gap, growing the window until certified.

    Certification: every unscanned ell > L satisfies G(ell) >= beta*L/N
    (reaching ell costs at least beta per obstacle), so once that floor
    clears the scanned minimum by 1 the argmin is inside the window.
    Growth re-samples the environment from its own (gamma, seed) with a
    doubled count, which extends it in place (the sampler is prefix-stable);
    an environment that does not extend that way (hand-built gaps) raises
    WindowExhausted with the numbers needed to see how far the scan got.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    work = env
    while True:
        sel = _scan(work, n, beta)
        floor = beta * work.L / sel.N
        if floor > float(sel.G.min()) + 1.0:
            return sel
        diagnostics = {
            "window": work.L,
            "current_min": float(sel.G.min()),
            "certify_floor": floor,
            "needed": float(sel.G.min()) + 1.0,
        }
        if 2 * work.L > _MAX_WINDOW:
            raise WindowExhausted("window grew past the hard cap", diagnostics)
        grown = sample_env(work.gamma, 2 * work.L, work.seed)
        if not np.array_equal(grown.gaps[: work.L], work.gaps):
            raise WindowExhausted(
                "environment does not extend from its seed", diagnostics
            )
        work = grown


def localization_env(sel):
    """Truncated environment for a selection, growing past the next record.

    Truncation cuts at the record following ell0; when the selected record is
    still the running maximum of its sampled window, the window is extended
    (prefix-stably, from the environment's own seed) until that next record
    exists.  Hand-built environments that cannot extend raise WindowExhausted.
    """
    from .env import truncate

    work = sel.env
    while True:
        rec = records(work)
        if rec.count > sel.k0:
            return truncate(work, sel.k0)
        diagnostics = {
            "window": work.L,
            "records_seen": rec.count,
            "needed_rank": sel.k0 + 1,
        }
        if 2 * work.L > _MAX_WINDOW:
            raise WindowExhausted("window grew past the hard cap", diagnostics)
        grown = sample_env(work.gamma, 2 * work.L, work.seed)
        if not np.array_equal(grown.gaps[: work.L], work.gaps):
            raise WindowExhausted(
                "environment does not extend from its seed", diagnostics
            )
        work = grown
