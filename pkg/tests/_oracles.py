"""Independent brute-force oracles used by the test suite.

Everything here is deliberately dumb and slow: exact rational transfer
matrices, exhaustive path enumeration, centered finite differences.  The
library must match these, never the other way around.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def ruin_law_oracle(t, nmax):
    """Exact q0/q1 for n = 1..nmax by rational mass evolution on {-t..t}.

    Start with unit mass at 0 (the time-0 visit is not an absorption event);
    every step splits mass half/half; mass arriving on {-t, 0, t} at step n is
    recorded (q0 at 0, q1 at +t) and removed.  Works for any t >= 2.
    """
    size = 2 * t + 1
    mass = [Fraction(0)] * size
    mass[t] = Fraction(1)
    half = Fraction(1, 2)
    q0 = [Fraction(0)] * (nmax + 1)
    q1 = [Fraction(0)] * (nmax + 1)
    for n in range(1, nmax + 1):
        new = [Fraction(0)] * size
        for x in range(size):
            if mass[x]:
                new[x - 1] += half * mass[x]
                new[x + 1] += half * mass[x]
        q0[n] = new[t]
        q1[n] = new[2 * t]
        assert new[0] == new[2 * t]  # left/right symmetry
        new[0] = new[t] = new[2 * t] = Fraction(0)
        mass = new
    return (
        np.array([float(v) for v in q0[1:]]),
        np.array([float(v) for v in q1[1:]]),
    )


def enumerate_survival(weight_fn, n, start=0):
    """Exact Z_n = sum over all 2^n paths of prod_k w(S_k), rational weights.

    weight_fn(site) must return a Fraction/int/float arrival weight; the
    time-0 position carries no weight, matching the model.
    """
    total = Fraction(0)
    half_pow = Fraction(1, 2) ** n
    for bits in range(1 << n):
        x = start
        wprod = Fraction(1)
        for k in range(n):
            x += 1 if (bits >> k) & 1 else -1
            wprod *= Fraction(weight_fn(x))
            if wprod == 0:
                break
        total += wprod * half_pow
    return total


def enumerate_conditioned_law(weight_fn, n, start=0):
    """Exact conditioned path law: dict {step-tuple: prob}, given survival."""
    weights = {}
    half_pow = Fraction(1, 2) ** n
    for bits in range(1 << n):
        x = start
        wprod = Fraction(1)
        steps = []
        for k in range(n):
            s = 1 if (bits >> k) & 1 else -1
            steps.append(s)
            x += s
            wprod *= Fraction(weight_fn(x))
            if wprod == 0:
                break
        if wprod:
            weights[tuple(steps)] = wprod * half_pow
    z = sum(weights.values())
    return {path: w / z for path, w in weights.items()}, z


def positive_walk_marginal(n):
    """Exact P(S_n = x | S_1..S_n > 0) for the SRW from 0, via rational DP."""
    # mass over positive sites only
    mass = {1: Fraction(1, 2)}  # after one step, conditioning kills the other half
    for _ in range(n - 1):
        new = {}
        for x, m in mass.items():
            for y in (x - 1, x + 1):
                if y > 0:
                    new[y] = new.get(y, Fraction(0)) + m * Fraction(1, 2)
        mass = new
    z = sum(mass.values())
    return {x: m / z for x, m in mass.items()}


def centered_diff(fn, x, h=1e-6):
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def centered_diff2(fn, x, h=1e-4):
    return (fn(x + h) - 2.0 * fn(x) + fn(x - h)) / (h * h)
