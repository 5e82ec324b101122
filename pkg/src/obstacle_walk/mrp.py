"""Markov renewal skeleton of the walk localized on its selected gap.

Between visits to the two boundary obstacles b0 = tau_{ell0-1}, b1 = tau_{ell0}
the walk performs excursions: inside the gap (exact ruin laws of width T1) or
outside it (one-sided survival DP, returning to the same side).  Weighted by
e^{phi*ell} h(b)/h(a) at the Perron root phi of the generating matrix, these
kernels become a probability transition structure — the Markov renewal process
this module solves, samples, and convolves.

Side/state convention: 0 = left boundary b0, 1 = right boundary b1.  Every
kernel weight includes the e^{-beta} trial of its final boundary arrival; the
length index ell >= 1 is the duration of the excursion in walk steps.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import constants, ruin
from .survival import _forward_sweep, phi_hom

__all__ = [
    "MRKernel",
    "MRPTrajectory",
    "ThetaTables",
    "kernel_in",
    "kernel_out",
    "build_kernel",
    "unit_gap_reference",
    "khat_matrix",
    "khat_out",
    "perron",
    "free_energy",
    "sample_mrp",
    "mass_renewal",
    "mass_renewal_split",
    "pinned_partition",
    "first_return_tail",
    "build_theta_tables",
    "theta_ratio",
]


# ---------------------------------------------------------------------------
# elementary kernels


def kernel_in(a, b, ell, T1, beta):
    """Weight of an in-gap excursion of length ell from side a to side b."""
    if a not in (0, 1) or b not in (0, 1):
        raise ValueError("sides must be 0 or 1")
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if a == b:
        return 0.5 * math.exp(-beta) * ruin.q0(T1, ell)
    return math.exp(-beta) * ruin.q1(T1, ell)


def _decay_rate(beta, t):
    """Exact soft-obstacle survival rate for homogeneous spacing t >= 1.

    t = 1 pays every step (rate beta), t = 2 every other step (beta/2);
    from t = 3 on the spectral root applies.
    """
    t = int(t)
    if t < 1:
        raise ValueError("spacing must be >= 1")
    if t == 1:
        return beta
    if t == 2:
        return 0.5 * beta
    return phi_hom(beta, t)


def _right_depth(beta, g1):
    # deep enough that paths touching the cut pay < 1e-14 even after the
    # e^{f*ell} tilt (f < g1; each of the >= 2j tilted steps nets beta-2*g1,
    # floored for the corner where g1 is not small against beta)
    rate = max(beta - 2.0 * g1, 0.25 * beta)
    return int(math.ceil(14.0 * math.log(10.0) / rate)) + 1


def _one_side_log_kernel(w, rec, d, beta, lmax):
    """log K_out for one side: start at index rec, first step in direction d.

    w carries the arrival weights of the region (0 at absorbing sites, which
    must include rec itself); the recorded return arrival pays e^{-beta}.
    """
    out = np.full(lmax, -np.inf)
    nb = rec + d
    if nb < 0 or nb >= len(w):
        return out  # empty region: no excursions possible
    wh = 0.5 * np.asarray(w, dtype=np.float64)
    mu = np.zeros_like(wh)
    mu[nb] = wh[nb]  # half step out of rec, times the arrival weight there
    logacc = 0.0
    total = float(mu.sum())
    if total <= 0.0:
        return out
    mu /= total
    logacc += math.log(total)
    shift = np.zeros_like(mu)
    for ell in range(2, lmax + 1):
        val = 0.5 * mu[nb]
        if val > 0.0:
            out[ell - 1] = math.log(val) + logacc - beta
        shift[:] = 0.0
        shift[1:] += mu[:-1]
        shift[:-1] += mu[1:]
        mu = wh * shift
        total = float(mu.sum())
        if total <= 0.0:
            break
        mu /= total
        logacc += math.log(total)
    return out


def _out_log_kernels(env_bar, beta, lmax, depth):
    """(log K_out(0, .), log K_out(1, .)) arrays of length lmax."""
    emb = math.exp(-beta)
    b0 = env_bar.left_boundary
    b1 = env_bar.right_boundary
    # left region: [0, b0], bold wall at 0, obstacles strictly inside
    if b0 >= 1:
        wl = np.ones(b0 + 1)
        wl[0] = 0.0
        pos = env_bar.positions
        inner = pos[(pos >= 1) & (pos < b0)]
        wl[inner] = emb
        wl[b0] = 0.0
        log0 = _one_side_log_kernel(wl, b0, -1, beta, lmax)
    else:
        log0 = np.full(lmax, -np.inf)
    # right region: (b1, cut], obstacles at the next `depth` positions, then
    # an absorbing cut at obstacle depth+1 (error < 1e-14 by depth choice)
    offs = [env_bar.position(env_bar.ell0 + j) - b1 for j in range(1, depth + 2)]
    width = offs[-1]
    wr = np.ones(width + 1)
    wr[0] = 0.0
    for o in offs[:-1]:
        wr[o] = emb
    wr[width] = 0.0
    log1 = _one_side_log_kernel(wr, 0, +1, beta, lmax)
    return log0, log1


def kernel_out(a, ell, env_bar, beta):
    """Exact weight of an out-of-gap excursion of length ell from side a."""
    if a not in (0, 1):
        raise ValueError("side must be 0 or 1")
    if ell < 1:
        raise ValueError("ell must be >= 1")
    depth = _right_depth(beta, ruin.g(max(env_bar.T1, 3)))
    logs = _out_log_kernels(env_bar, beta, ell, depth)[a]
    return float(np.exp(logs[ell - 1]))


# ---------------------------------------------------------------------------
# generating matrix and Perron root


def _tilted_sum(log_kernel, f):
    ell = np.arange(1.0, len(log_kernel) + 1.0)
    with np.errstate(over="ignore"):
        vals = np.exp(log_kernel + f * ell)
    return float(vals.sum())


def khat_out(kern, a, f):
    """Generating value of the out kernel at tilt f."""
    return _tilted_sum(kern.log_out1 if a else kern.log_out0, f)


def _khat_closure(T1, beta, log_out0, log_out1):
    emb = math.exp(-beta)

    def khat(f):
        in_same = 0.5 * emb * ruin.qhat0(T1, f)
        in_cross = emb * ruin.qhat1(T1, f)
        return np.array(
            [
                [in_same + _tilted_sum(log_out0, f), in_cross],
                [in_cross, in_same + _tilted_sum(log_out1, f)],
            ]
        )

    return khat


def khat_matrix(kern, f):
    """The 2x2 generating matrix at tilt f in (0, g(T1))."""
    return _khat_closure(kern.T1, kern.beta, kern.log_out0, kern.log_out1)(f)


def perron(M):
    """(largest eigenvalue, eigenvector ratio v1/v0) of a positive 2x2 matrix."""
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (2, 2) or not (M > 0).all():
        raise ValueError("need a strictly positive 2x2 matrix")
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    lam = 0.5 * (a + d) + math.sqrt(0.25 * (a - d) ** 2 + b * c)
    return lam, (lam - a) / b


def _out_series_tail(L, y, scale):
    # scale * sum_{ell > L} ell^2 y^ell, closed form
    one = 1.0 - y
    inner = L * L * y / one + 2.0 * L * y / one**2 + y * (1.0 + y) / one**3
    return scale * y**L * inner


@dataclass(frozen=True, eq=False)
class MRKernel:
    """Immutable kernel bundle for one truncated environment at one beta."""

    env_bar: object
    beta: float
    T1: int
    T2: int
    g_T1: float
    phi2: float  # survival rate of the out regions (runner-up spacing)
    phi: float
    h_ratio: float
    eps_coeff: float
    log_out0: np.ndarray
    log_out1: np.ndarray
    cells: np.ndarray  # (2, 3): [stay-in, cross-in, out] per side, normalized
    cell_defect: float
    right_depth: int

    def __post_init__(self):
        for name in ("log_out0", "log_out1", "cells"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def build_kernel(env_bar, beta, *, tail_tol=1e-12, out_cap=400_000):
    """Construct the kernel: out DPs, certified truncation, Perron root.

    Requires the decomposition to be valid: T2 < T1 and the out-region rate
    phi2 = phi_hom(beta, T2) strictly above g(T1), which makes every tilted
    out series on the bisection bracket convergent.
    """
    if not beta > 0:
        raise ValueError("beta must be > 0")
    if env_bar.ell0 < 2:
        raise ValueError(
            "selected gap touches the killing wall; no alive left boundary state"
        )
    T1, T2 = int(env_bar.T1), int(env_bar.T2)
    if T1 < 3:
        raise ValueError("main gap too narrow for the spectral excursion laws")
    if not T2 < T1:
        raise ValueError("need the runner-up gap strictly below the main one")
    g1 = ruin.g(T1)
    phi2 = _decay_rate(beta, T2)
    if not phi2 > g1:
        raise ValueError(
            f"out-region rate {phi2:.4g} does not dominate g(T1) = {g1:.4g}; "
            "renewal decomposition invalid for this environment"
        )
    depth = _right_depth(beta, g1)
    n_obst = max(env_bar.ell0 - 1, depth + 1)
    scale = constants.ROUGH_UB_C * n_obst * math.exp(phi2)
    y = math.exp(-(phi2 - g1))
    lmax = min(512, out_cap)
    while _out_series_tail(lmax, y, scale) >= tail_tol:
        if 2 * lmax > out_cap:
            raise RuntimeError(
                "out-kernel truncation certificate not met below the length cap"
            )
        lmax *= 2
    log_out0, log_out1 = _out_log_kernels(env_bar, beta, lmax, depth)
    khat = _khat_closure(T1, beta, log_out0, log_out1)
    lo, hi = g1 * 1e-12, g1 * (1.0 - 1e-12)
    lam_lo, _ = perron(khat(lo))
    if lam_lo >= 1.0:
        raise RuntimeError(
            "generating matrix already supercritical at zero tilt; "
            "kernel invariants violated"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lam, _ = perron(khat(mid))
        if lam < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    phi = 0.5 * (lo + hi)
    A = khat(phi)
    _, h_ratio = perron(A)
    in_same = A[0, 0] - _tilted_sum(log_out0, phi)
    in_cross = A[0, 1]
    raw = np.array(
        [
            [in_same, in_cross * h_ratio, _tilted_sum(log_out0, phi)],
            [in_same, in_cross / h_ratio, _tilted_sum(log_out1, phi)],
        ]
    )
    sums = raw.sum(axis=1)
    defect = float(np.abs(sums - 1.0).max())
    if defect > 1e-6:
        raise RuntimeError(f"tilted cell rows sum to {sums}; kernel inconsistent")
    return MRKernel(
        env_bar=env_bar,
        beta=beta,
        T1=T1,
        T2=T2,
        g_T1=g1,
        phi2=phi2,
        phi=phi,
        h_ratio=h_ratio,
        eps_coeff=1.0 - 2.0 * T1 * T1 * phi / math.pi**2,
        log_out0=log_out0,
        log_out1=log_out1,
        cells=raw / sums[:, None],
        cell_defect=defect,
        right_depth=depth,
    )


def free_energy(kern):
    """(phi, h_ratio, eps_coeff) of a built kernel."""
    return kern.phi, kern.h_ratio, kern.eps_coeff


def unit_gap_reference(T1, beta, left_len=64):
    """Kernel for the reference environment: unit gaps on both sides of T1.

    The left side is a finite run of unit gaps against the killing wall; at
    length 64 the wall's effect on any kernel value is below e^{-2(beta-g)64},
    far under the truncation tolerance, so this is the both-sides-unit free
    energy for practical purposes.
    """
    from .env import TruncatedEnvironment  # local import to avoid a cycle

    gaps = np.concatenate([np.ones(left_len, dtype=np.int64), [T1]])
    env_bar = TruncatedEnvironment(
        gamma=1.0,
        gaps=gaps,
        seed=0,
        k0=2,
        ell0=left_len + 1,
        T1=int(T1),
        T2=1,
        i_next=left_len + 2,
    )
    return build_kernel(env_bar, beta)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True, eq=False)
class MRPTrajectory:
    """Contact times theta-bar_i, boundary sides X_i, excursion types Y_i."""

    times: np.ndarray  # length m+1, starts at 0
    sides: np.ndarray  # length m+1, values in {0, 1}
    types: np.ndarray  # length m, 'in'/'out' per excursion

    @property
    def n_excursions(self) -> int:
        return len(self.types)


class _SamplerTables:
    def __init__(self, kern, tol=1e-12):
        T1, beta, phi = kern.T1, kern.beta, kern.phi
        y = math.exp(-(kern.g_T1 - phi))
        need = math.log(constants.RUIN_SANDWICH_C4 / (tol * (1.0 - y)))
        L_in = max(int(need / (kern.g_T1 - phi)) + 2, T1 + 2)
        ell = np.arange(1.0, L_in + 1.0)
        same = 0.5 * math.exp(-beta) * np.exp(ruin.log_q0_array(T1, L_in) + phi * ell)
        cross = math.exp(-beta) * np.exp(ruin.log_q1_array(T1, L_in) + phi * ell)
        ell_o = np.arange(1.0, len(kern.log_out0) + 1.0)
        out0 = np.exp(kern.log_out0 + phi * ell_o)
        out1 = np.exp(kern.log_out1 + phi * ell_o)
        self.same_cdf = np.cumsum(same / same.sum())
        self.cross_cdf = np.cumsum(cross / cross.sum())
        s0, s1 = out0.sum(), out1.sum()
        self.out_cdf = (
            np.cumsum(out0 / s0) if s0 > 0 else None,
            np.cumsum(out1 / s1) if s1 > 0 else None,
        )
        self.cell_cdf = np.cumsum(kern.cells, axis=1)


@functools.lru_cache(maxsize=32)
def _sampler_tables(kern):
    return _SamplerTables(kern)


def _draw_len(cdf, rng):
    return int(np.searchsorted(cdf, rng.random(), side="right")) + 1


def sample_mrp(kern, n, rng, start_state=0):
    """One trajectory of contact times/marks, stopping past horizon n."""
    tabs = _sampler_tables(kern)
    times, sides, types = [0], [start_state], []
    t, a = 0, start_state
    while t <= n:
        cat = int(np.searchsorted(tabs.cell_cdf[a], rng.random(), side="right"))
        if cat == 0:
            ell, b, y = _draw_len(tabs.same_cdf, rng), a, "in"
        elif cat == 1:
            ell, b, y = _draw_len(tabs.cross_cdf, rng), 1 - a, "in"
        else:
            ell, b, y = _draw_len(tabs.out_cdf[a], rng), a, "out"
        t += ell
        a = b
        times.append(t)
        sides.append(b)
        types.append(y)
    return MRPTrajectory(
        times=np.array(times, dtype=np.int64),
        sides=np.array(sides, dtype=np.int64),
        types=np.array(types),
    )


def contact_hit_counts(kern, ks, reps, rng, start_state=0):
    """Number of trajectories (out of reps) whose contact set contains each k.

    Vectorized across replicas: all trajectories advance in waves, so the
    cost is ~(horizon / mean excursion) vector operations regardless of reps.
    """
    tabs = _sampler_tables(kern)
    ks = np.asarray(sorted(ks), dtype=np.int64)
    horizon = int(ks.max())
    t = np.zeros(reps, dtype=np.int64)
    a = np.full(reps, start_state, dtype=np.int64)
    hits = np.zeros(len(ks), dtype=np.int64)
    active = np.ones(reps, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        u_cat = rng.random(len(idx))
        u_len = rng.random(len(idx))
        cat = (u_cat[:, None] >= tabs.cell_cdf[a[idx]][:, :2]).sum(axis=1)
        ell = np.empty(len(idx), dtype=np.int64)
        for c, cdf in ((0, tabs.same_cdf), (1, tabs.cross_cdf)):
            sel = cat == c
            if sel.any():
                ell[sel] = np.searchsorted(cdf, u_len[sel], side="right") + 1
        for side in (0, 1):
            sel = (cat == 2) & (a[idx] == side)
            if sel.any():
                ell[sel] = (
                    np.searchsorted(tabs.out_cdf[side], u_len[sel], side="right") + 1
                )
        t[idx] += ell
        a[idx] = np.where(cat == 1, 1 - a[idx], a[idx])
        hits += (t[idx][:, None] == ks[None, :]).sum(axis=0)
        active[idx] = t[idx] <= horizon
    return dict(zip(ks.tolist(), hits.tolist()))


# ---------------------------------------------------------------------------
# renewal convolutions


def _renewal_kernels(kern, kmax, tol=1e-13):
    """Tilted transition kernels M_ab(ell) as dense arrays up to min(len, kmax)."""
    T1, beta, phi, h = kern.T1, kern.beta, kern.phi, kern.h_ratio
    y = math.exp(-(kern.g_T1 - phi))
    need = math.log(constants.RUIN_SANDWICH_C4 / (tol * (1.0 - y)))
    L_in = max(int(need / (kern.g_T1 - phi)) + 2, T1 + 2)
    L = int(min(max(L_in, len(kern.log_out0)), kmax))
    ell = np.arange(1.0, L + 1.0)
    same = 0.5 * math.exp(-beta) * np.exp(ruin.log_q0_array(T1, L) + phi * ell)
    cross = math.exp(-beta) * np.exp(ruin.log_q1_array(T1, L) + phi * ell)

    def out_tilted(log_out):
        ln = min(len(log_out), L)
        arr = np.zeros(L)
        arr[:ln] = np.exp(log_out[:ln] + phi * np.arange(1.0, ln + 1.0))
        return arr

    M00 = same + out_tilted(kern.log_out0)
    M11 = same + out_tilted(kern.log_out1)
    M01 = cross * h
    M10 = cross / h
    return M00, M01, M10, M11


def mass_renewal_split(kern, kmax, start_state=0):
    """(v0, v1): P(k is a contact time AND the side there is b), k = 0..kmax."""
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    M00, M01, M10, M11 = _renewal_kernels(kern, max(kmax, 1))
    Lk = len(M00)
    r00, r01 = M00[::-1].copy(), M01[::-1].copy()
    r10, r11 = M10[::-1].copy(), M11[::-1].copy()
    v0 = np.zeros(kmax + 1)
    v1 = np.zeros(kmax + 1)
    (v0 if start_state == 0 else v1)[0] = 1.0
    for k in range(1, kmax + 1):
        lo = max(0, k - Lk)
        mlo = Lk - (k - lo)
        w0 = v0[lo:k]
        w1 = v1[lo:k]
        v0[k] = w0 @ r00[mlo:] + w1 @ r10[mlo:]
        v1[k] = w0 @ r01[mlo:] + w1 @ r11[mlo:]
    return v0, v1


def mass_renewal(kern, k, start_state=0):
    """P(k lies in the contact set of the renewal process)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 1.0
    v0, v1 = mass_renewal_split(kern, k, start_state=start_state)
    return float(v0[k] + v1[k])


def pinned_partition(kern, mmax):
    """Z_m^pin e^{phi m} for m = 0..mmax, by survival DP on env_bar.

    Z^pin is the partition function restricted to paths sitting on either
    boundary obstacle at time m; the renewal identity makes this equal to
    v0(m) + v1(m)/h_ratio from mass_renewal_split.
    """
    env_bar, beta, phi = kern.env_bar, kern.beta, kern.phi
    b0, b1 = env_bar.left_boundary, env_bar.right_boundary
    w = _domain_weights(kern, mmax)
    logz, pinned = _forward_sweep(w, b0, mmax, pinned_sites=(b0, b1))
    m = np.arange(mmax + 1)
    return np.exp(pinned[b0] + phi * m) + np.exp(pinned[b1] + phi * m)


def _domain_weights(kern, horizon):
    """Arrival weights over [0, cut] wide enough for `horizon` steps.

    The right side is cut at obstacle depth (phi*horizon + 100)/beta: paths
    reaching the cut carry weight <= e^{-beta * depth}, which is 1e-43 times
    smaller than any partition value at this horizon.
    """
    env_bar, beta = kern.env_bar, kern.beta
    depth = int((kern.phi * horizon + 100.0) / beta) + 1
    b1 = env_bar.right_boundary
    hi = env_bar.position(env_bar.ell0 + depth)
    w = np.ones(hi + 1)
    w[0] = 0.0
    i = 1
    while True:
        p = env_bar.position(i)
        if p > hi:
            break
        w[p] = math.exp(-beta)
        i += 1
    w[hi] = 0.0
    return w


# ---------------------------------------------------------------------------
# the Theta ratio


@dataclass(frozen=True, eq=False)
class ThetaTables:
    """Precomputed tables for Theta(n, k) on one kernel."""

    n: int
    m: int
    phi: float
    log_W: np.ndarray  # log of e^{phi k} Z_k(first return > k - m), k = 0..n
    log_P_tail: np.ndarray  # log P(first return > j), j = 0..n
    log_Z_free: np.ndarray  # log Z_k of the free walk from b0, k = 0..n


def _first_increment_arrays(kern, L):
    """Tilted first-excursion mass from state 0, split by landing state.

    A0[s-1] covers same-side landings (in + out), A1[s-1] the crossing ones;
    the h-weighted sum A0 + h_ratio * A1 is the first-increment law of the
    renewal process.
    """
    T1, beta, phi = kern.T1, kern.beta, kern.phi
    ell = np.arange(1.0, L + 1.0)
    A0 = 0.5 * math.exp(-beta) * np.exp(ruin.log_q0_array(T1, L) + phi * ell)
    lo = kern.log_out0
    ln = min(len(lo), L)
    A0[:ln] += np.exp(lo[:ln] + phi * np.arange(1.0, ln + 1.0))
    A1 = math.exp(-beta) * np.exp(ruin.log_q1_array(T1, L) + phi * ell)
    return A0, A1


def first_return_tail(kern, jmax, pad_cap=6_000_000):
    """P(theta-bar_1 > j) for j = 0..jmax, by reverse summation.

    Summing the tilted first-increment law from the far end keeps the deep
    tail accurate (a forward 1 - cumsum would drown it in rounding); the
    summation is cut 34.5/(g - phi) steps past jmax, where the remainder
    is a factor e^{-34.5} below the reported value.
    """
    pad = int(math.ceil(34.5 / (kern.g_T1 - kern.phi)))
    L = jmax + pad
    if L > pad_cap:
        raise RuntimeError("first-return tail table would exceed the size cap")
    A0, A1 = _first_increment_arrays(kern, L)
    rev = np.cumsum((A0 + kern.h_ratio * A1)[::-1])[::-1]
    return rev[: jmax + 1]


def build_theta_tables(kern, n, pad_cap=6_000_000):
    env_bar, beta, phi, g1 = kern.env_bar, kern.beta, kern.phi, kern.g_T1
    T1 = kern.T1
    m = 2 * T1 * T1
    if n < m:
        raise ValueError(f"horizon n={n} below the mixing scale 2 T1^2 = {m}")
    log_P_tail = np.log(first_return_tail(kern, n, pad_cap=pad_cap))
    A0, A1 = _first_increment_arrays(kern, n)
    # free partition curves from both boundaries
    w = _domain_weights(kern, n)
    b0, b1 = env_bar.left_boundary, env_bar.right_boundary
    logZ0, _ = _forward_sweep(w, b0, n)
    logZ1, _ = _forward_sweep(w, b1, m - 1)
    # never-returned mass: left-avoiding + strictly-in-gap components
    wl = w[: b0 + 1].copy()
    wl[b0] = 0.0
    logB_left, _ = _forward_sweep(wl, b0, n)
    ws = np.ones(T1 + 1)
    ws[0] = 0.0
    ws[T1] = 0.0
    logB_strip, _ = _forward_sweep(ws, 0, n)
    k = np.arange(n + 1)
    B_t = np.exp(logB_left + phi * k) + np.exp(logB_strip + phi * k)
    # first-return decomposition, windowed to the last m increments
    u = np.arange(m)
    Z0_t = np.exp(logZ0[:m] + phi * u)
    Z1_t = np.exp(logZ1[:m] + phi * u)
    conv = np.convolve(A0[:n], Z0_t) + np.convolve(A1[:n], Z1_t)
    W = B_t.copy()
    W[1:] += conv[: n]
    log_W = np.log(W)
    return ThetaTables(
        n=n, m=m, phi=phi, log_W=log_W, log_P_tail=log_P_tail, log_Z_free=logZ0
    )


def theta_ratio(kern, tables, n, k):
    """Theta(n, k): the pinned-vs-free mass ratio controlling the change of
    measure between the conditioned walk and the renewal picture."""
    if tables.n != n:
        raise ValueError("tables were built for a different horizon")
    if not tables.m <= k <= n:
        raise IndexError(f"k must lie in [{tables.m}, {n}]")
    log_theta = (
        tables.log_W[k]
        - tables.phi * n
        - tables.log_P_tail[k - tables.m]
        - tables.log_Z_free[n]
    )
    return math.exp(log_theta)
