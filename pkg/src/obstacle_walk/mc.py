"""Path-level Monte Carlo for the killed walk.

Direct simulation of the killed walk, exact sampling from the
survival-conditioned (polymer) measure by Doob h-transform, excursion
statistics around the selected gap, and the replica driver for
localization experiments.

The conditioned sampler is exact: it builds the backward value table
u_m(x) = P(survive steps m+1..n | S_m = x) and walks forward with
transitions proportional to w(y) u_{m+1}(y).  Value layers are stored
every ~sqrt(n) steps and blocks recomputed on demand, so memory stays at
O(width * sqrt(n)).  The experiment driver additionally truncates the
domain at a power-of-two width certified by comparing log Z against a
half-width sweep (escalating until the two agree), and runs whole
batches of replicas on parity-packed grids.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import SeedSequence, default_rng

from .gapsel import WindowExhausted, select
from .env import sample_env

__all__ = [
    "Infeasible",
    "PathStats",
    "path_stats",
    "sample_direct",
    "survival_frequency",
    "hit_frequency",
    "ConditionedSampler",
    "sample_conditioned",
    "path_log_weight",
    "localization_experiment",
    "localization_summary",
    "corridor_frequency",
    "confinement_frequency",
]

log = logging.getLogger(__name__)

_FREE, _OBSTACLE, _WALL = 0, 1, 2


class Infeasible(RuntimeError):
    """The survival event has probability zero on this instance."""


# ---------------------------------------------------------------------------
# site classification shared by every sampler


def _site_kinds(env, lo, hi, mode, tag=None):
    """Classify each site of [lo, hi]: free, obstacle, or hard wall.

    Bold mode puts the wall at 0 (the walk never gets past it, so the
    sites below stay out of every domain) and obstacles at tau_i >= 1.
    Soft mode has no wall; obstacles sit at every tau_i >= 0, except for
    homogeneous environments which tile obstacles two-sidedly (matching
    the slab convention used by the survival DP).  Truncated
    environments continue with unit gaps past their stored range, i.e.
    every site beyond the last stored obstacle is an obstacle.
    """
    if mode not in ("bold", "soft"):
        raise ValueError(f"mode must be 'bold' or 'soft', got {mode!r}")
    if mode == "bold" and lo < 0:
        raise ValueError("bold-mode domains start at site >= 0")
    if hi < lo:
        raise ValueError("empty site range")
    kind = np.zeros(hi - lo + 1, dtype=np.int8)
    two_sided = mode == "soft" and getattr(env, "is_homogeneous", False)
    if two_sided:
        t = int(env.gaps[0])
        sites = np.arange(lo, hi + 1)
        kind[sites % t == 0] = _OBSTACLE
    else:
        pos = env.positions
        first = max(lo, 1) if mode == "bold" else max(lo, 0)
        obst = pos[(pos >= first) & (pos <= hi)]
        kind[obst - lo] = _OBSTACLE
        if hasattr(env, "i_next") and hi > pos[-1]:
            kind[max(pos[-1] + 1, lo) - lo :] = _OBSTACLE
    if mode == "bold":
        kind[0] = _WALL  # lo == 0
    return kind


def _kind_weights(kind, beta):
    w = np.ones(len(kind))
    w[kind == _OBSTACLE] = math.exp(-beta)
    w[kind == _WALL] = 0.0
    return w


# ---------------------------------------------------------------------------
# direct simulation


def sample_direct(env, n, beta, rng, mode="bold"):
    """Simulate the killed walk for up to n steps; (path, survived).

    Per step the stream consumption is fixed: one uniform for the step
    direction (right iff u < 1/2), then one uniform for the killing
    trial if the new site carries an obstacle.  Hitting the bold wall
    kills outright and consumes no trial.  On death the path is
    truncated at the killing site.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    lo = 0 if mode == "bold" else -n
    kind = _site_kinds(env, lo, n, mode)
    p_kill = -math.expm1(-beta)
    x = 0
    path = np.empty(n + 1, dtype=np.int64)
    path[0] = 0
    for m in range(1, n + 1):
        x += 1 if rng.random() < 0.5 else -1
        path[m] = x
        k = kind[max(x - lo, 0)]  # bold: x < 0 clamps onto the wall entry
        if k == _WALL:
            return path[: m + 1].copy(), False
        if k == _OBSTACLE and rng.random() < p_kill:
            return path[: m + 1].copy(), False
    return path, True


def survival_frequency(env, n, beta, rng, reps, mode="bold"):
    """Fraction of `reps` direct runs that survive n steps.

    Vectorized batch layout: all step uniforms for a chunk of replicas
    are drawn first (row-major), then all killing uniforms, one per
    step whether or not it lands on an obstacle.  Survival only depends
    on whether any arrival triggers a kill, so the frequency has exactly
    the law of repeated sample_direct calls.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lo = 0 if mode == "bold" else -n
    kind = _site_kinds(env, lo, n, mode)
    p_kill = -math.expm1(-beta)
    survived = 0
    chunk = max(1, int(2e7 / max(n, 1)))
    done = 0
    while done < reps:
        r = min(chunk, reps - done)
        steps = rng.integers(0, 2, size=(r, n), dtype=np.int8)
        pos = np.cumsum(2 * steps - 1, axis=1, dtype=np.int64)
        u = rng.random((r, n))
        k = kind[np.clip(pos - lo, 0, len(kind) - 1)]
        dead = (k == _WALL) | ((k == _OBSTACLE) & (u < p_kill))
        survived += int((~dead.any(axis=1)).sum())
        done += r
    return survived / reps


def hit_frequency(env, ell, beta, rng, reps, max_steps=10_000_000):
    """MC frequency of reaching tau_ell before dying (bold walk from 0).

    Walks step in lockstep over the shrinking set of undecided replicas;
    the draw order within a wave is (all steps, then all kill trials).
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    target = int(env.positions[ell])
    kind = _site_kinds(env, 0, target, "bold")
    p_kill = -math.expm1(-beta)
    x = np.zeros(reps, dtype=np.int64)
    hits = 0
    for _ in range(max_steps):
        if len(x) == 0:
            return hits / reps
        x = x + rng.integers(0, 2, size=len(x), dtype=np.int64) * 2 - 1
        k = kind[np.clip(x, 0, target)]
        dead = (x <= 0) | ((k == _OBSTACLE) & (rng.random(len(x)) < p_kill))
        # the arrival trial at tau_ell itself must be survived to count
        arrived = (x == target) & ~dead
        hits += int(arrived.sum())
        x = x[~(arrived | dead)]
    raise RuntimeError("undecided walkers after the step budget")


# ---------------------------------------------------------------------------
# exact conditioned sampling


def _back_step(U, wh):
    t = wh * U
    V = np.zeros_like(U)
    V[1:] += t[:-1]
    V[:-1] += t[1:]
    return V


class ConditionedSampler:
    """Exact sampler of the walk conditioned to survive n steps.

    Builds backward value layers u_m over the full reachable range
    [start - n, start + n] (bold: [0, start + n]) unless `x_max`
    truncates the right end, in which case mass beyond x_max is dropped
    and the caller is responsible for certifying the cut.  Layers are
    checkpointed every ~sqrt(n) steps; forward passes recompute one
    block at a time, so transition probabilities are exact ratios of
    f64 layer values.
    """

    def __init__(self, env, n, beta, mode="bold", start=0, x_max=None):
        if n < 0:
            raise ValueError("n must be >= 0")
        if not beta > 0:
            raise ValueError("beta must be > 0")
        if mode == "bold" and start < 0:
            raise ValueError("bold mode starts at a site >= 0")
        self.env, self.n, self.beta, self.mode, self.start = env, n, beta, mode, start
        self.lo = 0 if mode == "bold" else start - n
        self.hi = start + n if x_max is None else int(x_max)
        if self.hi < start:
            raise ValueError("x_max must not cut off the start site")
        kind = _site_kinds(env, self.lo, self.hi, mode)
        self._wh = 0.5 * _kind_weights(kind, beta)
        self._w = _kind_weights(kind, beta)
        span = self.hi - self.lo + 1
        self._B = max(1, math.isqrt(max(n, 1)) + 1)
        n_ckpt = n // self._B + 2
        if n_ckpt * span * 8 > 8e8:
            raise ValueError(
                "value table would need >800 MB; truncate with x_max"
            )
        self._ckpt = {}
        self._block_cache = (None, None)
        U = np.ones(span)
        acc = 0.0
        self._store(n, U, acc)
        for m in range(n - 1, -1, -1):
            U = _back_step(U, self._wh)
            s = float(U.max())
            if s > 0.0:
                U /= s
                acc += math.log(s)
            if m % self._B == 0:
                self._store(m, U, acc)
        u0 = float(U[start - self.lo])
        if u0 <= 0.0:
            raise Infeasible(
                f"survival to n={n} has probability zero (mode={mode})"
            )
        self.logZ = math.log(u0) + acc

    def _store(self, m, U, acc):
        self._ckpt[m] = U.copy()

    def _block(self, j):
        """Layers u_{jB+1} .. u_{min((j+1)B, n)}, each renormalized."""
        if self._block_cache[0] == j:
            return self._block_cache[1]
        B = self._B
        m_lo, m_hi = j * B, min((j + 1) * B, self.n)
        U = self._ckpt[m_hi].copy()
        arr = np.empty((m_hi - m_lo, len(U)))
        arr[m_hi - m_lo - 1] = U
        for m in range(m_hi - 1, m_lo, -1):
            U = _back_step(U, self._wh)
            s = float(U.max())
            if s > 0.0:
                U /= s
            arr[m - m_lo - 1] = U
        self._block_cache = (j, arr)
        return arr

    def _neighbor_masses(self, layer, x):
        il, ir = x - 1 - self.lo, x + 1 - self.lo
        wl = self._w[il] * layer[il] if il >= 0 else 0.0
        wr = self._w[ir] * layer[ir] if ir < len(layer) else 0.0
        return wl, wr

    def sample(self, rng):
        """One conditioned path, length n+1 (one uniform per step)."""
        n, B = self.n, self._B
        path = np.empty(n + 1, dtype=np.int64)
        x = self.start
        path[0] = x
        for j in range((n + B - 1) // B if n else 0):
            arr = self._block(j)
            for m in range(j * B, min((j + 1) * B, n)):
                wl, wr = self._neighbor_masses(arr[m - j * B], x)
                tot = wl + wr
                if not tot > 0.0:
                    raise RuntimeError("conditioned walk hit a dead end")
                x += 1 if rng.random() < wr / tot else -1
                path[m + 1] = x
        return path

    def sample_batch(self, reps, rng):
        """(reps, n+1) conditioned paths; per step, reps uniforms."""
        n, B = self.n, self._B
        paths = np.empty((reps, n + 1), dtype=np.int64)
        x = np.full(reps, self.start, dtype=np.int64)
        paths[:, 0] = x
        w = self._w
        span = len(w)
        for j in range((n + B - 1) // B if n else 0):
            arr = self._block(j)
            for m in range(j * B, min((j + 1) * B, n)):
                layer = arr[m - j * B]
                il = np.clip(x - 1 - self.lo, 0, span - 1)
                ir = np.clip(x + 1 - self.lo, 0, span - 1)
                wl = w[il] * layer[il] * (x - 1 >= self.lo)
                wr = w[ir] * layer[ir] * (x + 1 <= self.hi)
                pr = wr / (wl + wr)
                x = x + np.where(rng.random(reps) < pr, 1, -1)
                paths[:, m + 1] = x
        return paths

    def path_log_prob(self, path):
        """log of the sampler's probability of producing `path`."""
        if len(path) != self.n + 1 or path[0] != self.start:
            raise ValueError("path must start at `start` and have n steps")
        total = 0.0
        B = self._B
        for m in range(self.n):
            layer = self._block(m // B)[m - (m // B) * B]
            wl, wr = self._neighbor_masses(layer, int(path[m]))
            chosen = wr if path[m + 1] > path[m] else wl
            if not chosen > 0.0:
                return -math.inf
            total += math.log(chosen / (wl + wr))
        return total


def sample_conditioned(env, n, beta, rng, mode="bold"):
    """One exact draw from the polymer measure P( . | death > n)."""
    return ConditionedSampler(env, n, beta, mode=mode).sample(rng)


def path_log_weight(env, path, beta, mode="bold"):
    """log of the path's raw weight 2^{-n} prod_k w(S_k), -inf if killed.

    The time-0 site carries no trial, matching the partition function:
    summing exp(path_log_weight) over all n-step paths gives Z_n.
    """
    path = np.asarray(path)
    n = len(path) - 1
    lo, hi = int(path.min()), int(path.max())
    if mode == "bold":
        if lo < 0:
            return -math.inf
        lo = 0
    kind = _site_kinds(env, lo, max(hi, lo), mode)
    w = _kind_weights(kind, beta)
    vals = w[path[1:] - lo]
    if (vals == 0.0).any():
        return -math.inf
    return float(np.log(vals).sum()) - n * math.log(2.0)


# ---------------------------------------------------------------------------
# excursion statistics around the selected gap


@dataclass(frozen=True)
class PathStats:
    """Contact and excursion counters of one path around I_loc.

    theta_bar lists the times the path sits on a boundary obstacle of
    the (open) localization interval; n_excursions is the index of the
    last such time.  The final excursion, still open at the end of the
    path, is counted by no N field, so the N fields sum to n_excursions.
    T_out counts the time points from theta_bar[0] on that lie outside
    the open interval -- boundary contacts included.  confined_after is
    the smallest c with every site from H_hit + c to the end strictly
    inside the interval (None when the path never reaches the left
    boundary, like every other counter being zero then).
    """

    H_hit: object
    theta_bar: np.ndarray
    n_excursions: int
    N_in: np.ndarray
    N_out: np.ndarray
    T_out: int
    confined_after: object


def path_stats(path, sel):
    """Excursion statistics of `path` around sel.I_loc."""
    lo, hi = sel.I_loc
    path = np.asarray(path)
    zeros = PathStats(
        H_hit=None,
        theta_bar=np.empty(0, dtype=np.int64),
        n_excursions=0,
        N_in=np.zeros((2, 2), dtype=np.int64),
        N_out=np.zeros(2, dtype=np.int64),
        T_out=0,
        confined_after=None,
    )
    at_left = np.nonzero(path == lo)[0]
    if len(at_left) == 0:
        return zeros
    H_hit = int(at_left[0])
    contacts = np.nonzero((path == lo) | (path == hi))[0]
    side = (path[contacts] == hi).astype(np.int64)
    N_in = np.zeros((2, 2), dtype=np.int64)
    N_out = np.zeros(2, dtype=np.int64)
    if len(contacts) > 1:
        # between consecutive contacts the walk stays on one side of the
        # boundary it left, so the first step decides in vs out
        first = path[contacts[:-1] + 1]
        inward = first == np.where(side[:-1] == 0, lo + 1, hi - 1)
        a, b = side[:-1], side[1:]
        for ia in (0, 1):
            for ib in (0, 1):
                N_in[ia, ib] = int(
                    (inward & (a == ia) & (b == ib)).sum()
                )
            N_out[ia] = int((~inward & (a == ia)).sum())
    seg = path[contacts[0] :]
    T_out = int(((seg <= lo) | (seg >= hi)).sum())
    after = path[H_hit:]
    outside = np.nonzero((after <= lo) | (after >= hi))[0]
    confined_after = int(outside[-1]) + 1  # last bad offset, then clear
    return PathStats(
        H_hit=H_hit,
        theta_bar=contacts.astype(np.int64),
        n_excursions=len(contacts) - 1,
        N_in=N_in,
        N_out=N_out,
        T_out=T_out,
        confined_after=confined_after,
    )


# ---------------------------------------------------------------------------
# fused batched engine (bold walks from 0)
#
# Backward value layers span factors like exp(-lambda * ell0) between the
# transient region near the origin and the selected gap -- far beyond what
# one renormalized float row can hold once n is large.  The sweep therefore
# keeps every value in per-site block-floating form u(x) = M(x) * 2^E(x)
# with an integer exponent array refreshed by frexp, and folds the exponent
# offsets into factor arrays built with ldexp (both exact, so the arithmetic
# is ordinary float arithmetic on correctly scaled numbers).
#
# A walk from an even site is back on even sites two steps later, so the
# two-step recursion closes on the even sublattice:
#   u_m(x) = wa(x) u_{m+2}(x-2) + wb(x) u_{m+2}(x) + wc(x) u_{m+2}(x+2),
#   wa = w(x-1)w(x-2)/4, wb = (w(x-1)+w(x+1))w(x)/4, wc = w(x+1)w(x+2)/4.
# One tridiagonal pass per two time steps, on half the sites; odd layers are
# reconstructed pointwise during forward sampling.  wb never needs an
# exponent shift (same-site), wa/wc shift by neighbor exponent differences.

_CERT_ATOL = 5e-4
_X_CAP = 1 << 17
_LN2 = math.log(2.0)


def _round_up(x, mult):
    return -(-int(x) // mult) * mult


def _fused_weights(w, dtype):
    """Two-step stencil coefficients on even sites (slot i <-> x = 2i)."""
    wq = 0.25 * np.asarray(w, dtype=dtype)
    even, odd = wq[:, ::2], wq[:, 1::2]  # sites 0,2,..,X and 1,3,..,X-1
    R, K = even.shape
    wa = np.zeros((R, K), dtype=dtype)
    wb = np.zeros((R, K), dtype=dtype)
    wc = np.zeros((R, K), dtype=dtype)
    wa[:, 1:] = 4.0 * odd * even[:, :-1]
    wc[:, :-1] = 4.0 * odd * even[:, 1:]
    wb[:, :-1] = odd
    wb[:, 1:] += odd
    wb *= 4.0 * even
    return wa, wb, wc


class _FusedSweep:
    """Backward two-step sweep on the even sublattice, block-floating."""

    def __init__(self, wa, wb, wc):
        self.wa, self.wb, self.wc = wa, wb, wc
        self.M = np.ones_like(wa)
        self.E = np.zeros(wa.shape, dtype=np.int32)
        self.V = np.empty_like(self.M)
        self.t = np.empty_like(self.M)
        self.A = np.zeros_like(self.M)
        self.C = np.zeros_like(self.M)

    def seed(self, layer):
        self.M[:] = layer
        self.E[:] = 0
        self.refresh()

    def seed_log2(self, L):
        fin = np.isfinite(L)
        E = np.where(fin, np.floor(L), 0.0).astype(np.int32)
        self.M[:] = np.where(fin, np.exp2(L.astype(self.M.dtype) - E), 0.0)
        self.E[:] = E
        self.refresh()

    def refresh(self):
        """Re-sync exponents with the layer; rebuild the shifted factors."""
        man, ex = np.frexp(self.M)
        self.M[:] = man
        self.E += ex
        E = self.E
        np.ldexp(self.wa[:, 1:], E[:, :-1] - E[:, 1:], out=self.A[:, 1:])
        np.ldexp(self.wc[:, :-1], E[:, 1:] - E[:, :-1], out=self.C[:, :-1])

    def step2(self):
        """Advance two time steps down."""
        M, V, t = self.M, self.V, self.t
        np.multiply(self.wb, M, out=V)
        np.multiply(self.A[:, 1:], M[:, :-1], out=t[:, 1:])
        V[:, 1:] += t[:, 1:]
        np.multiply(self.C[:, :-1], M[:, 1:], out=t[:, :-1])
        V[:, :-1] += t[:, :-1]
        self.M, self.V = V, M

    def log2_layer(self):
        with np.errstate(divide="ignore"):
            return (np.log2(self.M) + self.E).astype(np.float32)


def _top_even_layer(w, n, dtype):
    """The highest even-time layer: all ones, or u_{n-1} when n is odd."""
    even = np.asarray(w[:, ::2], dtype=dtype)
    if n % 2 == 0:
        return n, np.ones_like(even)
    odd = np.asarray(w[:, 1::2], dtype=dtype)
    top = np.zeros_like(even)
    top[:, :-1] += odd  # u_{n-1}(x) = (w(x-1) + w(x+1)) / 2, u_n = 1
    top[:, 1:] += odd
    return n - 1, 0.5 * top


def _bf_sweep(w, n, ckpt_every=None, refresh=30, dtype=np.float64):
    """log Z per row (natural log); optional f32 log2 even-layer checkpoints.

    `ckpt_every` must be even so checkpoints land on stored layers.
    """
    R = w.shape[0]
    if n == 0:
        z = np.zeros(R)
        if ckpt_every:
            return z, {0: np.zeros((R, (w.shape[1] + 1) // 2), np.float32)}
        return z
    fs = _FusedSweep(*_fused_weights(w, dtype))
    m_top, layer = _top_even_layer(w, n, dtype)
    fs.seed(layer)
    ckpt = {}
    if ckpt_every:
        ckpt[m_top] = fs.log2_layer()
    for m in range(m_top - 2, -1, -2):
        fs.step2()
        if m % refresh == 0:
            fs.refresh()
        if ckpt_every and m % ckpt_every == 0:
            ckpt[m] = fs.log2_layer()
    with np.errstate(divide="ignore"):
        logz = _LN2 * (np.log2(fs.M[:, 0]) + fs.E[:, 0])
    return (logz, ckpt) if ckpt_every else logz


def _bf_block(fs, L_top, m_lo, m_hi):
    """f32 even layers u_{m_lo+2}, u_{m_lo+4}, .., u_{m_hi} (m_lo, m_hi even)."""
    nl = (m_hi - m_lo) // 2
    R, K = L_top.shape
    Ms = np.empty((nl, R, K), dtype=np.float32)
    Es = np.empty((nl, R, K), dtype=np.int16)
    fs.seed_log2(L_top)
    Ms[nl - 1] = fs.M
    Es[nl - 1] = fs.E
    for k in range(nl - 2, -1, -1):
        fs.step2()
        if k % 7 == 0:
            fs.refresh()
        Ms[k] = fs.M
        Es[k] = fs.E
    return Ms, Es


def _bf_forward(w, ckpt, n, B, uniforms, paths):
    """Sample all rows forward through the checkpointed even layers.

    Odd time steps read the stored layer directly; even steps rebuild the
    odd layer's two needed values from the stored layer two above.  All
    magnitude alignment runs through integer exponents and ldexp.
    """
    wf = w.astype(np.float32)
    fs = _FusedSweep(*_fused_weights(w, np.float32))
    R = uniforms.shape[0]
    rows = np.arange(R)
    x = np.zeros(R, dtype=np.int64)
    paths[:, 0] = 0
    m_top = n - (n % 2)
    for j in range((m_top + B - 1) // B):
        m_lo, m_hi = j * B, min((j + 1) * B, m_top)
        Ms, Es = _bf_block(fs, ckpt[m_hi], m_lo, m_hi)
        for m in range(m_lo, m_hi):
            if m % 2 == 1:  # x odd; layer m+1 is stored
                k = (m + 1 - m_lo) // 2 - 1
                M, E = Ms[k], Es[k]
                il = (x - 1) >> 1
                ir = il + 1
                wl = wf[rows, x - 1] * M[rows, il]
                wr = wf[rows, x + 1] * M[rows, ir]
                d = E[rows, il].astype(np.int32) - E[rows, ir]
                wl = np.ldexp(wl, d)
            else:  # x even; rebuild u_{m+1}(x +- 1) from stored layer m+2
                k = (m + 2 - m_lo) // 2 - 1
                M, E = Ms[k], Es[k]
                i = x >> 1
                im = np.maximum(i - 1, 0)
                ip = i + 1
                Ei = E[rows, i].astype(np.int32)
                Em = E[rows, im].astype(np.int32)
                Ep = E[rows, ip].astype(np.int32)
                e = np.maximum(Ei, np.maximum(Em, Ep))
                tc = wf[rows, x] * np.ldexp(M[rows, i], Ei - e)
                tl = wf[rows, np.maximum(x - 2, 0)] * np.ldexp(M[rows, im], Em - e)
                tl[x == 0] = 0.0
                tr = wf[rows, x + 2] * np.ldexp(M[rows, ip], Ep - e)
                wl = np.where(x > 0, wf[rows, np.maximum(x - 1, 0)], 0.0) * (tl + tc)
                wr = wf[rows, x + 1] * (tc + tr)
            step = uniforms[:, m] < wr / (wl + wr)
            x = x + np.where(step, 1, -1)
            paths[:, m + 1] = x
    if n % 2:  # last step against u_n identically 1
        wl = np.where(x > 0, wf[rows, np.maximum(x - 1, 0)], 0.0)
        wr = wf[rows, x + 1]
        step = uniforms[:, n - 1] < wr / (wl + wr)
        x = x + np.where(step, 1, -1)
        paths[:, n] = x
    return paths


def _covered(env, x):
    """Grow a sampled environment until its obstacles reach site x."""
    work = env
    while work.positions[-1] < x:
        grown = sample_env(work.gamma, 2 * work.L, work.seed)
        if not np.array_equal(grown.gaps[: work.L], work.gaps):
            raise RuntimeError("environment does not extend from its seed")
        work = grown
    return work


def _bold_row(env, X, beta):
    kind = _site_kinds(env, 0, X, "bold")
    w = _kind_weights(kind, beta)
    w[X] = 0.0  # truncation wall
    return w


# ---------------------------------------------------------------------------
# localization experiment

_CSV_COLUMNS = [
    "replica", "gamma", "beta", "n", "T1", "T2", "ell0", "H_hit",
    "N_in_00", "N_in_01", "N_in_10", "N_in_11", "N_out_0", "N_out_1",
    "T_out", "confined_after", "survived_weight_log",
]


def _g17(v):
    """Fixed 17-significant-digit cell formatting (None/NaN -> empty)."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _write_frame(frame, path):
    """Byte-stable CSV: every cell through the 17-digit formatter."""
    out = frame.astype(object).apply(lambda col: col.map(_g17))
    out.to_csv(path, index=False)


@dataclass(eq=False)
class _Replica:
    rep: int
    env: object = None
    sel: object = None
    X: int = 0
    prev_logZ: float = None
    error: str = None


def _prepare_replica(gamma, beta, n, seed, rep, window):
    state = _Replica(rep=rep)
    try:
        env_seed = int(SeedSequence([seed, rep]).generate_state(1)[0])
        env = sample_env(gamma, window, env_seed)
        sel = select(env, n, beta)
        hi = sel.I_loc[1]
        X = _round_up(hi + sel.T1 + 768, 512)
        X = max(1024, min(X, _round_up(n + 2, 512), _X_CAP))
        state.env = _covered(sel.env, X)
        state.sel = sel
        state.X = X
    except (WindowExhausted, ValueError, RuntimeError) as exc:
        state.error = f"selection failed: {exc}"
    return state


def _replica_row(state, gamma, beta, n, stats=None, logz=None):
    row = dict.fromkeys(_CSV_COLUMNS)
    row.update(replica=state.rep, gamma=gamma, beta=beta, n=n)
    if state.sel is not None:
        row.update(T1=state.sel.T1, T2=state.sel.T2, ell0=state.sel.ell0)
    if stats is not None:
        row.update(
            H_hit=stats.H_hit,
            N_in_00=int(stats.N_in[0, 0]),
            N_in_01=int(stats.N_in[0, 1]),
            N_in_10=int(stats.N_in[1, 0]),
            N_in_11=int(stats.N_in[1, 1]),
            N_out_0=int(stats.N_out[0]),
            N_out_1=int(stats.N_out[1]),
            T_out=stats.T_out,
            confined_after=stats.confined_after,
            survived_weight_log=logz,
        )
    return row


def _run_group(group, beta, n, seed, B, rows, gamma):
    """One certified batch: sweep, certify, escalate or sample.

    Rows may have different truncation widths; the batch runs at the group
    maximum with per-row walls.  The certificate re-sweeps (in f32) with
    every wall pulled in 512 sites: agreement in log Z means the conditioned
    law is insensitive to the wall, disagreement escalates the row's width.
    """
    Xg = max(s.X for s in group)
    w = np.zeros((len(group), Xg + 1))
    for i, s in enumerate(group):
        w[i, : s.X + 1] = _bold_row(s.env, s.X, beta)
    logz, ckpt = _bf_sweep(w, n, ckpt_every=B, dtype=np.float32)
    need_cert = [i for i, s in enumerate(group) if s.prev_logZ is None]
    ref = np.array([s.prev_logZ or 0.0 for s in group])
    if need_cert:
        wc = w[need_cert, : Xg - 512 + 1].copy()
        for j, i in enumerate(need_cert):
            wc[j, group[i].X - 512:] = 0.0
        ref[need_cert] = _bf_sweep(wc, n, dtype=np.float32)
    ok = np.abs(logz - ref) <= _CERT_ATOL + 1e-9 * np.abs(logz)
    ok &= np.isfinite(logz)
    escalated = []
    for i, s in enumerate(group):
        if ok[i]:
            continue
        if s.X + 1024 > _X_CAP or not math.isfinite(logz[i]):
            s.error = f"truncation uncertified at width {s.X}"
            rows[s.rep] = _replica_row(s, gamma, beta, n)
            log.warning("replica %d: %s", s.rep, s.error)
        else:
            s.prev_logZ = float(logz[i])
            s.X += 1024
            s.env = _covered(s.env, s.X)
            escalated.append(s)
    keep = [i for i, s in enumerate(group) if ok[i]]
    if keep:
        uniforms = np.empty((len(keep), n), dtype=np.float32)
        for row_i, i in enumerate(keep):
            rng = default_rng(SeedSequence([seed, group[i].rep, 1]))
            uniforms[row_i] = rng.random(n, dtype=np.float32)
        kept_ckpt = {m: u[keep] for m, u in ckpt.items()}
        ckpt.clear()
        paths = np.empty((len(keep), n + 1), dtype=np.int32)
        _bf_forward(w[keep], kept_ckpt, n, B, uniforms, paths)
        for row_i, i in enumerate(keep):
            s = group[i]
            path = paths[row_i]
            assert (w[i, path[1:]] > 0.0).all(), "sampled through a wall"
            stats = path_stats(path, s.sel)
            rows[s.rep] = _replica_row(
                s, gamma, beta, n, stats=stats, logz=float(logz[i])
            )
    return escalated


def localization_experiment(
    gamma, beta, n, reps, seed, *, mode="bold", threads=1, window=512, out=None
):
    """Replica study of the conditioned walk around its selected gap.

    Per replica: a fresh environment from SeedSequence([seed, rep]), gap
    selection at horizon n, one conditioned path (step uniforms from
    SeedSequence([seed, rep, 1])), and its excursion statistics; one row
    per replica, merged by index.  Selection failures and uncertified
    truncations leave the statistics columns empty rather than aborting
    the run.  `threads` parallelizes the selection phase only; the
    sampling batches are deterministic regardless.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if mode != "bold":
        raise ValueError("localization experiments are bold-walk studies")
    import pandas as pd

    def prep(rep):
        return _prepare_replica(gamma, beta, n, seed, rep, window)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            states = list(pool.map(prep, range(reps)))
    else:
        states = [prep(rep) for rep in range(reps)]

    rows = {}
    for s in states:
        if s.error is not None:
            rows[s.rep] = _replica_row(s, gamma, beta, n)
            log.warning("replica %d: %s", s.rep, s.error)
    pending = [s for s in states if s.error is None]
    B = math.isqrt(max(n, 1)) + 1
    B += B % 2  # checkpoints must land on even layers
    while pending:
        pending.sort(key=lambda s: (s.X, s.rep))
        group = pending[:96]
        K = max(s.X for s in group) // 2 + 1
        # per row: sweep checkpoints + one recomputed block + paths/uniforms
        r_mem = max(1, int(1.8e9 / (K * (7 * B + 96) + 8 * n)))
        group = group[:r_mem]
        pending = [s for s in pending if s not in group]
        pending.extend(_run_group(group, beta, n, seed, B, rows, gamma))
    frame = pd.DataFrame([rows[r] for r in range(reps)], columns=_CSV_COLUMNS)
    # stable schema whether or not any replica failed (NaN forces float)
    frame = frame.astype(
        {c: np.float64 for c in _CSV_COLUMNS if c not in ("replica", "n")}
    )
    if out is not None:
        _write_frame(frame, out)
    return frame


def localization_summary(df, quantiles=(0.1, 0.25, 0.5, 0.75, 0.9)):
    """Quantile table of the scaled statistics over the valid replicas."""
    import pandas as pd

    ok = df[df["H_hit"].notna()].copy()
    n = ok["n"].astype(float)
    scale = ok["T1"].astype(float) ** 3 / n
    metrics = {"H_hit_over_n": ok["H_hit"].astype(float) / n}
    for c in ("N_in_00", "N_in_01", "N_in_10", "N_in_11",
              "N_out_0", "N_out_1", "T_out"):
        metrics[c + "_scaled"] = ok[c].astype(float) * scale
    metrics["confined_after"] = ok["confined_after"].astype(float)
    table = pd.DataFrame(
        {name: vals.quantile(quantiles) for name, vals in metrics.items()}
    ).T
    table.insert(0, "valid_fraction", len(ok) / max(len(df), 1))
    return table


def corridor_frequency(df, C=50.0, kappa=0.5):
    """Fraction of replicas inside the gamma>1 excursion corridor.

    Event: H_hit <= kappa*n and every excursion counter and T_out in
    [n/(C*T1^3), C*n/T1^3].  Failed replicas count as misses.
    """
    hits = 0
    counters = ["N_in_00", "N_in_01", "N_in_10", "N_in_11",
                "N_out_0", "N_out_1", "T_out"]
    for _, row in df.iterrows():
        if row["H_hit"] is None or row["T1"] is None:
            continue
        n, t1 = float(row["n"]), float(row["T1"])
        lo, hi = n / (C * t1**3), C * n / t1**3
        vals = [float(row[c]) for c in counters]
        if float(row["H_hit"]) <= kappa * n and all(
            lo <= v <= hi for v in vals
        ):
            hits += 1
    return hits / max(len(df), 1)


def confinement_frequency(df, C=200):
    """Fraction of replicas confined to I_loc from H_hit + C onward."""
    hits = 0
    for _, row in df.iterrows():
        c = row["confined_after"]
        if c is not None and not (isinstance(c, float) and math.isnan(c)):
            hits += int(c <= C)
    return hits / max(len(df), 1)
