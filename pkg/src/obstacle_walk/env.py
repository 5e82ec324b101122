"""Obstacle environments: heavy-tailed gaps, records, truncation, diagnostics.

An environment is the increasing sequence of obstacle positions tau_0 = 0,
tau_i = tau_{i-1} + T_i with i.i.d. gaps P(T = m) = m^{-(1+gamma)} / zeta(1+gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import zeta as _zeta

__all__ = [
    "Environment",
    "TruncatedEnvironment",
    "Records",
    "PointMeasure",
    "ExtremalPoints",
    "EnvDiagnostics",
    "sample_env",
    "save_env",
    "load_env",
    "records",
    "truncate",
    "synthetic_record_env",
    "point_measure",
    "psi",
    "psi_extremals",
    "z_over_sin",
    "record_rate_factors",
    "bad_edges",
    "good_events",
    "homogeneous_env",
]


@dataclass(frozen=True)
class Environment:
    """Immutable obstacle environment.

    Attributes:
        gamma: tail exponent of the gap law (> 0).
        gaps: integer gap lengths T_1..T_L, all >= 1.
        seed: the 64-bit sampling seed (0 for hand-built environments).
    """

    gamma: float
    gaps: np.ndarray
    seed: int = 0

    def __post_init__(self):
        gaps = np.asarray(self.gaps, dtype=np.int64)
        if gaps.ndim != 1 or len(gaps) == 0:
            raise ValueError("gaps must be a nonempty 1-d integer sequence")
        if (gaps < 1).any():
            raise ValueError("all gaps must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        gaps.setflags(write=False)
        object.__setattr__(self, "gaps", gaps)

    @property
    def L(self) -> int:
        return len(self.gaps)

    @property
    def positions(self) -> np.ndarray:
        """Obstacle sites tau_0 = 0, tau_1, ..., tau_L."""
        pos = np.concatenate(([0], np.cumsum(self.gaps)))
        pos.setflags(write=False)
        return pos

    @property
    def norm_const(self) -> float:
        """c_tau = 1/zeta(1+gamma) of the gap law."""
        return 1.0 / float(_zeta(1.0 + self.gamma))

    @property
    def is_homogeneous(self) -> bool:
        return bool((self.gaps == self.gaps[0]).all())

    def gap(self, i: int) -> int:
        """Gap T_i, 1-based."""
        if not 1 <= i <= self.L:
            raise IndexError(f"gap index {i} outside 1..{self.L}")
        return int(self.gaps[i - 1])


def homogeneous_env(t: int, count: int, gamma: float = 1.0) -> Environment:
    """Environment with obstacles every t sites (for slab/soft-mode checks)."""
    return Environment(gamma=gamma, gaps=np.full(count, t, dtype=np.int64))


# ---------------------------------------------------------------------------
# gap sampling


class _ZipfSampler:
    """Inverse-CDF sampler for P(T = m) = m^{-(1+gamma)}/zeta(1+gamma).

    A cumulative table covers the bulk and doubles on demand; the rare draws
    beyond the table are inverted exactly through the Hurwitz-zeta tail
    P(T > m) = zeta(1+gamma, m+1)/zeta(1+gamma), so the support is unbounded.
    """

    def __init__(self, gamma: float, initial: int = 1 << 14):
        self.s = 1.0 + gamma
        self.znorm = float(_zeta(self.s))
        m = np.arange(1, initial + 1, dtype=np.float64)
        self.cdf = np.cumsum(m**-self.s) / self.znorm

    def _grow(self):
        old = len(self.cdf)
        m = np.arange(old + 1, 2 * old + 1, dtype=np.float64)
        ext = self.cdf[-1] + np.cumsum(m**-self.s) / self.znorm
        self.cdf = np.concatenate([self.cdf, ext])

    def _tail(self, m: int) -> float:
        return float(_zeta(self.s, m + 1)) / self.znorm

    def _invert_tail(self, u: float) -> int:
        # find the unique m with P(T > m) < 1-u <= P(T > m-1)
        target = 1.0 - u
        lo = len(self.cdf)  # tail(lo) >= ... we know u beyond table
        hi = lo
        while self._tail(hi) >= target:
            hi *= 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._tail(mid) >= target:
                lo = mid
            else:
                hi = mid
        return hi

    def draw(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in [0,1) to gaps, one per entry, order-preserving."""
        while self.cdf[-1] < 1.0 - 2.0**-40 and (u >= self.cdf[-1]).any():
            if len(self.cdf) >= 1 << 22:
                break
            self._grow()
        out = np.searchsorted(self.cdf, u, side="right") + 1
        beyond = u >= self.cdf[-1]
        if beyond.any():
            out[beyond] = [self._invert_tail(float(x)) for x in u[beyond]]
        return out.astype(np.int64)


_samplers: dict[float, _ZipfSampler] = {}


def sample_env(gamma: float, count: int, seed: int) -> Environment:
    """Draw an environment of `count` i.i.d. gaps.

    Deterministic in (gamma, count, seed), and prefix-stable: the first k gaps
    of sample_env(gamma, count', seed) coincide for every count' >= k (one
    uniform consumed per gap, in order).

    Args:
        gamma: tail exponent > 0.
        count: number of gaps, >= 1.
        seed: RNG seed.

    Returns:
        Environment with `count` gaps.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if count < 1:
        raise ValueError("count must be >= 1")
    sampler = _samplers.get(gamma)
    if sampler is None:
        sampler = _samplers[gamma] = _ZipfSampler(gamma)
    rng = np.random.default_rng(seed)
    gaps = sampler.draw(rng.random(count))
    return Environment(gamma=gamma, gaps=gaps, seed=int(seed))


def save_env(env: Environment, path) -> None:
    """Write `gamma,seed,count` header then one gap per line."""
    with open(path, "w") as fh:
        fh.write(f"{env.gamma:.17g},{env.seed},{env.L}\n")
        for gap in env.gaps:
            fh.write(f"{gap}\n")


def load_env(path) -> Environment:
    """Inverse of save_env; round-trips bit-exactly."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 3:
            raise ValueError(f"malformed environment header in {path}")
        gamma, seed, count = float(header[0]), int(header[1]), int(header[2])
        gaps = np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
    if len(gaps) != count:
        raise ValueError(f"{path}: header says {count} gaps, found {len(gaps)}")
    return Environment(gamma=gamma, gaps=gaps, seed=seed)


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class Records:
    """Strict gap records: indices i(k), values T*_k, bases tau*_k = tau_{i(k)-1}."""

    indices: np.ndarray
    record_gaps: np.ndarray
    record_bases: np.ndarray

    @property
    def count(self) -> int:
        return len(self.indices)


def records(env) -> Records:
    gaps = env.gaps
    pos = env.positions
    idx, vals, bases = [], [], []
    best = 0
    for i, T in enumerate(gaps, start=1):
        if T > best:
            idx.append(i)
            vals.append(int(T))
            bases.append(int(pos[i - 1]))
            best = int(T)
    return Records(
        indices=np.array(idx, dtype=np.int64),
        record_gaps=np.array(vals, dtype=np.int64),
        record_bases=np.array(bases, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# truncation


@dataclass(frozen=True)
class TruncatedEnvironment:
    """Environment with every gap at index >= i(k0+1) replaced by 1.

    Carries the decomposition around the selected record gap: T1 = T_{ell0}
    (the k0-th record), T2 = max of the other gaps below i(k0+1), and the unit
    gaps extending forever on the right (`gap` returns 1 beyond the stored
    range, so the object behaves as an infinite environment).
    """

    gamma: float
    gaps: np.ndarray
    seed: int
    k0: int
    ell0: int
    T1: int
    T2: int
    i_next: int  # index i(k0+1) of the base environment's next record

    def __post_init__(self):
        gaps = np.asarray(self.gaps, dtype=np.int64)
        gaps.setflags(write=False)
        object.__setattr__(self, "gaps", gaps)

    @property
    def L(self) -> int:
        return len(self.gaps)

    @property
    def positions(self) -> np.ndarray:
        pos = np.concatenate(([0], np.cumsum(self.gaps)))
        pos.setflags(write=False)
        return pos

    def gap(self, i: int) -> int:
        """Gap at 1-based index i; unit gaps beyond the stored range."""
        if i < 1:
            raise IndexError("gap index must be >= 1")
        return int(self.gaps[i - 1]) if i <= self.L else 1

    def position(self, i: int) -> int:
        """tau_i; extends linearly (unit gaps) beyond the stored range."""
        if i <= self.L:
            return int(self.positions[i])
        return int(self.positions[-1]) + (i - self.L)

    @property
    def left_boundary(self) -> int:
        """tau_{ell0 - 1}, the left edge of the selected gap."""
        return int(self.positions[self.ell0 - 1])

    @property
    def right_boundary(self) -> int:
        """tau_{ell0}, the right edge of the selected gap."""
        return int(self.positions[self.ell0])


def synthetic_record_env(
    T1, seed, *, gamma=1.0, t2_frac=(0.35, 0.6), left_count=(4, 9)
):
    """Hand-shaped truncated environment with a prescribed main gap T1.

    A short left side of small gaps, a runner-up gap T2 drawn in
    t2_frac * T1, a few small gaps right of T1, unit gaps forever after.
    Calibration and benchmark runs use this when T1 must be pinned exactly.
    """
    T1 = int(T1)
    if T1 < 5:
        raise ValueError("T1 must be >= 5")
    rng = np.random.default_rng(seed)
    T2 = int(T1 * rng.uniform(*t2_frac))
    if not 2 <= T2 < T1:
        raise ValueError("t2_frac must place T2 strictly inside [2, T1)")
    hi = max(T2 // 2, 2)
    nl = int(rng.integers(*left_count))
    gaps = np.concatenate(
        [
            rng.integers(1, hi, size=nl),
            [T2],
            rng.integers(1, hi, size=3),
            [T1],
            rng.integers(1, min(4, T2 + 1), size=3),
        ]
    ).astype(np.int64)
    ell0 = nl + 5
    e = Environment(gamma=float(gamma), gaps=gaps, seed=int(seed))
    rec = records(e)
    k0 = int(np.searchsorted(rec.indices, ell0)) + 1
    assert rec.indices[k0 - 1] == ell0
    return TruncatedEnvironment(
        gamma=float(gamma),
        gaps=gaps,
        seed=int(seed),
        k0=k0,
        ell0=ell0,
        T1=T1,
        T2=T2,
        i_next=len(gaps) + 1,
    )


def truncate(env, k0: int):
    """Replace all gaps at index >= i(k0+1) by 1; idempotent for equal k0."""
    if isinstance(env, TruncatedEnvironment):
        if env.k0 == k0:
            return env
        raise ValueError("cannot re-truncate at a different record rank")
    rec = records(env)
    if k0 < 1 or k0 + 1 > rec.count:
        raise IndexError(
            f"record rank k0={k0} needs k0+1 <= {rec.count} records"
        )
    i_next = int(rec.indices[k0])  # i(k0+1), 1-based
    ell0 = int(rec.indices[k0 - 1])
    gaps = env.gaps.copy()
    gaps[i_next - 1 :] = 1
    others = np.delete(gaps[: i_next - 1], ell0 - 1)
    T2 = int(others.max()) if len(others) else 1
    return TruncatedEnvironment(
        gamma=env.gamma,
        gaps=gaps,
        seed=env.seed,
        k0=k0,
        ell0=ell0,
        T1=int(rec.record_gaps[k0 - 1]),
        T2=T2,
        i_next=i_next,
    )


# ---------------------------------------------------------------------------
# point measure and extremal points


@dataclass(frozen=True)
class PointMeasure:
    points: np.ndarray  # shape (L, 2): ((i-1)/n, T_i / n^{1/gamma})
    n: int


def point_measure(env, n: int) -> PointMeasure:
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(1, env.L + 1, dtype=np.float64)
    x = (i - 1.0) / n
    y = env.gaps / n ** (1.0 / env.gamma)
    return PointMeasure(points=np.column_stack([x, y]), n=n)


def psi(x: float, y: float, lam: float) -> float:
    """Rate functional lam*x + pi^2/(2 y^2)."""
    return lam * x + math.pi**2 / (2.0 * y * y)


@dataclass(frozen=True)
class ExtremalPoints:
    lam: float
    psi_min: float  # +inf on the empty measure
    z_star: Optional[tuple] = None
    z_starstar: Optional[tuple] = None
    z_bar: Optional[tuple] = None
    z_under: Optional[tuple] = None


def _argmin_point(pts, values):
    """Index of the minimal value; ties by smallest x then largest y."""
    order = np.lexsort((-pts[:, 1], pts[:, 0], values))
    return int(order[0])


def psi_extremals(pm: PointMeasure, lam: float) -> ExtremalPoints:
    """Minimizer structure of psi over the point measure.

    z_star minimizes psi; z_starstar minimizes over the remaining points;
    z_bar is the lowest point strictly up-right of z_star (smallest y among
    x > x*, y > y*); z_under is the highest point of the rest left of z_bar.
    Absent fields are None (inf over an empty set).
    """
    if not lam > 0:
        raise ValueError("lam must be > 0")
    pts = pm.points
    if len(pts) == 0:
        return ExtremalPoints(lam=lam, psi_min=math.inf)
    vals = lam * pts[:, 0] + math.pi**2 / (2.0 * pts[:, 1] ** 2)
    istar = _argmin_point(pts, vals)
    xs, ys = pts[istar]
    z_star = (float(xs), float(ys))
    rest = np.ones(len(pts), dtype=bool)
    rest[istar] = False
    z_starstar = None
    if rest.any():
        sub = np.flatnonzero(rest)
        z_starstar = tuple(pts[sub[_argmin_point(pts[sub], vals[sub])]].astype(float))
    upright = (pts[:, 0] > xs) & (pts[:, 1] > ys)
    z_bar = None
    if upright.any():
        sub = pts[upright]
        order = np.lexsort((sub[:, 0], sub[:, 1]))  # smallest y, then smallest x
        z_bar = tuple(sub[order[0]].astype(float))
    z_under = None
    if z_bar is not None:
        left = rest & (pts[:, 0] < z_bar[0])
        if left.any():
            sub = pts[left]
            order = np.lexsort((sub[:, 0], -sub[:, 1]))  # largest y, then smallest x
            z_under = tuple(sub[order[0]].astype(float))
    return ExtremalPoints(
        lam=lam,
        psi_min=float(vals[istar]),
        z_star=z_star,
        z_starstar=z_starstar,
        z_bar=z_bar,
        z_under=z_under,
    )


# ---------------------------------------------------------------------------
# good-environment diagnostics


def z_over_sin(z: float) -> float:
    """f(z) = z/sin z on (0, pi); >= 1 there."""
    if not 0.0 < z < math.pi:
        raise ValueError("z must lie in (0, pi)")
    return z / math.sin(z)


def record_rate_factors(rec: Records, c_correction: float = 0.0):
    """Confinement-rate comparison factors f_k = 2 f(pi r_k (1 + c/T*_k^2)).

    r_k = T*_{k-1}/T*_k; defined for k >= 2, None where the argument leaves
    (0, pi).  c_correction defaults to 0 (see the correction-constant note in
    the project docs).
    """
    out = []
    for k in range(2, rec.count + 1):
        ratio = rec.record_gaps[k - 2] / rec.record_gaps[k - 1]
        arg = math.pi * ratio * (1.0 + c_correction / rec.record_gaps[k - 1] ** 2)
        out.append(2.0 * z_over_sin(arg) if 0.0 < arg < math.pi else None)
    return out


def bad_edges(env, k: int, alpha: float):
    """Index set {j < i(k): T_j > alpha*T*_k} and its size."""
    rec = records(env)
    if not 1 <= k <= rec.count:
        raise IndexError(f"record rank {k} outside 1..{rec.count}")
    ik = int(rec.indices[k - 1])
    thresh = alpha * float(rec.record_gaps[k - 1])
    js = np.flatnonzero(env.gaps[: ik - 1] > thresh) + 1
    return js, len(js)


@dataclass(frozen=True)
class EnvDiagnostics:
    b1: bool
    b2: bool
    b3: bool
    b4: bool
    b5: None  # deliberately not evaluated
    bad_edge_set: np.ndarray
    bad_edge_count: int
    f_k: list


def good_events(env, n, eps0, eta, rho, J, selection, alpha: float = 0.5) -> EnvDiagnostics:
    """Regularity events B(1)..B(4) of the localization analysis.

    Args:
        env: the (untruncated) environment.
        n: horizon; N = n^{gamma/(gamma+2)} sets every scale.
        eps0, eta, rho, J: event parameters (eps0, rho in (0,1), eta > 0, J >= 1).
        selection: gap-selection result for (env, n) providing ell0, ell0_tilde,
            the scanned score arrays G and G_tilde, and k0.
        alpha: threshold for the reported bad-edge set (convention, not a
            model parameter).

    Returns:
        EnvDiagnostics with boolean flags; b5 is None (not evaluated).
    """
    if selection is None:
        raise ValueError("good_events needs the gap-selection outputs")
    if not (0.0 < eps0 < 1.0 and eta > 0.0 and 0.0 < rho < 0.5 and J >= 1):
        raise ValueError("parameters outside their ranges")
    N = float(n) ** (env.gamma / (env.gamma + 2.0))
    ell0, ell0t = selection.ell0, selection.ell0_tilde
    G, Gt = selection.G, selection.G_tilde
    # B(1): both minimizers unique, equal, in [eps0*N, N/eps0], with the gap
    # value in [eps0*N^{1/gamma}, N^{1/gamma}/eps0]
    unique = (
        np.count_nonzero(G == G.min()) == 1
        and np.count_nonzero(Gt == Gt.min()) == 1
    )
    Tsel = env.gap(ell0t)
    scale = N ** (1.0 / env.gamma)
    b1 = bool(
        unique
        and ell0 == ell0t
        and eps0 * N <= ell0 <= N / eps0
        and eps0 * scale <= Tsel <= scale / eps0
    )
    # B(2): margin of the G-minimum
    others = np.delete(G, ell0 - 1)
    b2 = bool(len(others) > 0 and others.min() - G.min() >= 2.0 * eta)
    # B(3): second gap neither too small nor too close to T1
    T1 = env.gap(ell0)
    below = np.delete(env.gaps[: selection.i_next - 1], ell0 - 1)
    T2 = int(below.max()) if len(below) else 1
    b3 = bool(rho * T1 < T2 < (1.0 - rho) * T1)
    # B(4): running-max growth cap on both sides of ell0, over the gaps we have
    expo = (4.0 + env.gamma) / (4.0 * env.gamma)
    b4 = True
    right = env.gaps[ell0:]  # T_{ell0+1}, ...
    run = 0
    for ell in range(1, len(right) + 1):
        run = max(run, int(right[ell - 1]))
        if ell >= J and run > ell**expo:
            b4 = False
            break
    if b4:
        left = env.gaps[:ell0][::-1][1:]  # T_{ell0-1}, T_{ell0-2}, ..., T_1
        run = 0
        for ell in range(1, len(left) + 1):
            run = max(run, int(left[ell - 1]))
            if J <= ell <= ell0 and run > ell**expo:
                b4 = False
                break
    rec = records(env)
    bset, bcount = bad_edges(env, selection.k0, alpha)
    return EnvDiagnostics(
        b1=b1,
        b2=b2,
        b3=b3,
        b4=b4,
        b5=None,
        bad_edge_set=bset,
        bad_edge_count=bcount,
        f_k=record_rate_factors(rec),
    )
