"""Independent reference computations used as test oracles.

Nothing here imports the package's numerical paths: quadrature is done in
mpmath at 40 digits, roots by plain bisection, and survival probabilities by
a fixed-point iteration on the first-event equation of the process.
"""

import math

import mpmath as mp
import numpy as np
from scipy import integrate

mp.mp.dps = 40


def m_uniform_quad(a, r):
    """``(1/a) int_0^a r x / (1 - (1 - r) x) dx`` at 40 digits."""
    a, r = mp.mpf(a), mp.mpf(r)
    return float(mp.quad(lambda x: r * x / (1 - (1 - r) * x), [0, a]) / a)


def m_uniform_formula(a, r):
    a, r = mp.mpf(a), mp.mpf(r)
    return -r / (1 - r) - (1 / a) * (r / (1 - r) ** 2) * mp.log(1 - a * (1 - r))


def bisect(f, lo, hi, n=200):
    flo = f(lo)
    for _ in range(n):
        mid = (lo + hi) / 2
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def r_c_bisection(a):
    """Root of m(r) = 1 by bisection on the 40-digit closed form."""
    A = mp.mpf(a)
    lo = 1 - 1 / A + mp.mpf("1e-30")
    if A < 1.5:
        hi = bisect(lambda r: mp.diff(lambda s: m_uniform_formula(A, s), r), lo, 1 - mp.mpf("1e-20"))
    else:
        hi = 1 - mp.mpf("1e-30")
    return float(bisect(lambda r: m_uniform_formula(A, r) - 1, lo, hi))


def survival_probability_uniform(a, r, tol=1e-13, max_iter=50_000):
    """P(survival) of the evolution process for the uniform law on [0, a].

    With Q the extinction probability from a fresh genotype, a single
    individual of rate x dies out with probability q(x) solving
    q = 1/(1+x) + x/(1+x) q ((1-r) q + r Q); iterate Q = mean of q from Q = 0.
    """

    def q_of(x, Q):
        A = x * (1 - r)
        B = x * r * Q - (1 + x)
        if A == 0:
            return -1.0 / B
        return (-B - math.sqrt(max(B * B - 4 * A, 0.0))) / (2 * A)

    s = 1 / (1 - r) if r < 1 else math.inf
    points = [s] if s < a else None
    Q = 0.0
    for _ in range(max_iter):
        Qn = integrate.quad(lambda x: q_of(x, Q), 0, a, points=points, limit=200)[0] / a
        if abs(Qn - Q) < tol:
            break
        Q = Qn
    return 1 - Qn


def birth_death_survival(lam):
    """Linear birth-death process, birth rate ``lam``, death rate 1."""
    return max(0.0, 1 - 1 / lam) if lam > 0 else 0.0


def central_difference(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def ode_numeric(a1, a2, r, v1_0, v2_0, t):
    """RK45 at tight tolerance."""
    sol = integrate.solve_ivp(
        lambda _, v: [a1 * (1 - r) * v[0], a1 * r * v[0] + a2 * v[1]],
        (0.0, t), [v1_0, v2_0], method="RK45", rtol=1e-12, atol=1e-14,
    )
    return sol.y[0, -1], sol.y[1, -1]


def mean_se(xs):
    xs = np.asarray(xs, dtype=float)
    return xs.mean(), xs.std(ddof=1) / math.sqrt(xs.size)
