"""Survival criteria, mean genotype offspring and the uniform-law phase diagram.

For mutation probability ``r`` a genotype with birth rate ``lam`` keeps a
self-sustaining lineage iff ``lam * (1 - r) > 1`` (condition I). Otherwise its
lineage spawns on average ``r lam / (1 - lam (1 - r))`` new genotypes, and the
law-averaged value ``m(r)`` is the mean offspring of the genotype tree
(condition II is ``m(r) > 1``).

For the uniform law on ``[0, a]`` the substitution ``x = 1 / (1 - r)`` turns
``m`` into ``g(x) = 1 - x + (x - x**2) log(1 - a/x) / a``, whose derivatives
decide where ``m`` is monotone and where it has its minimum.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .distributions import RateDistribution, Uniform, expect, mass_above
from .errors import BracketFailure, DomainError

_EPS = np.finfo(float).eps
ROOT_XTOL = 1e-14


class Phase(str, enum.Enum):
    SURVIVES_VIA_I = "survives_via_I"
    SURVIVES_VIA_II = "survives_via_II"
    EXTINCT = "extinct"

    @property
    def survives(self) -> bool:
        return self is not Phase.EXTINCT


@dataclass(frozen=True)
class SurvivalConditions:
    """Both survival conditions at one ``(mu, r)``.

    ``condition_II_integral`` is the lineage-mean integral restricted to rates
    with ``lam (1 - r) <= 1``; it equals ``m_of_r`` whenever condition I fails,
    while ``m_of_r`` is infinite as soon as condition I holds.
    """

    condition_I_mass: float
    m_of_r: float
    condition_I_holds: bool
    condition_II_holds: bool
    condition_II_integral: float | None = None


@dataclass(frozen=True)
class PhaseVerdict:
    phase: Phase
    witness: SurvivalConditions
    r_c: float | None = None
    r_I_boundary: float | None = None

    def to_json(self) -> dict:
        m = self.witness.m_of_r
        return {
            "phase": self.phase.value,
            "m": None if math.isinf(m) else m,
            "r_c": self.r_c,
            "r_I_boundary": self.r_I_boundary,
        }


@dataclass(frozen=True)
class GShapeReport:
    a: float
    b: float | None = None
    c: float | None = None
    x_a: float | None = None
    r_a: float | None = None


def _check_r(r):
    if not (0.0 <= r <= 1.0):
        raise DomainError(f"mutation probability must lie in [0, 1], got {r!r}")


def _singular_rate(dist: RateDistribution, r: float) -> float:
    """``1 / (1 - r)``, snapped onto a support endpoint lying within rounding of it."""
    s = 1.0 / (1.0 - r)
    for p in dist.pieces():
        for x in {getattr(p, "at", None), getattr(p, "hi", None), getattr(p, "lo", None)}:
            if x is not None and abs(x * (1.0 - r) - 1.0) <= 4 * _EPS:
                return x
    return s


def evaluate_conditions(dist: RateDistribution, r: float) -> SurvivalConditions:
    """Both survival conditions for the law ``dist`` at mutation probability ``r``."""
    _check_r(r)
    if r == 1.0:
        mass = 0.0
        integral = expect(dist, lambda lam: lam)
    else:
        s = _singular_rate(dist, r)
        mass = mass_above(dist, s)
        if r == 0.0:
            integral = 0.0
        else:
            k = r / (1.0 - r)
            integral = expect(dist, lambda lam: k * lam / (s - lam), (0.0, s))
    return SurvivalConditions(
        condition_I_mass=mass,
        m_of_r=math.inf if mass > 0.0 else integral,
        condition_I_holds=mass > 0.0,
        condition_II_holds=integral > 1.0,
        condition_II_integral=integral,
    )


# ------------------------------------------------------------ uniform closed form


_SERIES_U = 0.25
_SERIES_TERMS = 40


def _m_from_u(r: float, h: float, u: float) -> float:
    """``(r / h) * (-log1p(-u) / u - 1)`` with ``u = a h``.

    The bracket cancels for small ``u``; there it is summed as
    ``sum_{k>=1} u**k / (k + 1)``.
    """
    if u < _SERIES_U:
        a = u / h
        s, term = 0.0, 1.0
        for k in range(1, _SERIES_TERMS):
            s += term * a / (k + 1)
            term *= u
        return r * s
    return (r / h) * (-math.log1p(-u) / u - 1.0)


def m_uniform_closed_form(a: float, r: float) -> float:
    """Closed form of ``m(r)`` for the uniform law on ``[0, a]``.

    Valid when ``a (1 - r) < 1``; ``r = 1`` gives the limit ``a / 2``.
    """
    if not a > 0:
        raise DomainError(f"a must be positive, got {a!r}")
    _check_r(r)
    if r == 1.0:
        return a / 2.0
    h = 1.0 - r
    u = a * h
    if u >= 1.0:
        raise DomainError(f"closed form needs a(1 - r) < 1, got a={a!r}, r={r!r}")
    return _m_from_u(r, h, u)


def m_uniform(a: float, r: float) -> float:
    """``m(r)`` for the uniform law, including ``inf`` where ``a (1 - r) >= 1``."""
    _check_r(r)
    if r < 1.0 and a * (1.0 - r) >= 1.0:
        return math.inf
    return m_uniform_closed_form(a, r)


def g_function(a: float, x: float, order: int = 0) -> float:
    """``g`` or its first three derivatives at ``x > a``."""
    if x <= a:
        raise DomainError(f"g is defined for x > a, got x={x!r}, a={a!r}")
    if order in (0, 1, 2) and a / x < _SERIES_U:
        return _g_series(a, x, order)
    L = math.log1p(-a / x)
    if order == 0:
        return 1.0 - x + (x - x * x) * L / a
    if order == 1:
        return -1.0 - (x - 1.0) / (x - a) - (2.0 * x - 1.0) * L / a
    if order == 2:
        return -(a - 3.0 * a * x + 2.0 * x * x) / (x * (x - a) ** 2) - 2.0 * L / a
    if order == 3:
        return -(a * a + a * x * (2.0 * a - 3.0)) / (x * x * (x - a) ** 3)
    raise ValueError(f"order must be 0..3, got {order!r}")


def _g_series(a, x, order):
    # g(x) = a/2 + sum_{j>=1} c_j x**-j with c_j = a**(j+1)/(j+2) - a**j/(j+1);
    # the closed forms above cancel O(x) terms for large x.
    y = 1.0 / x
    total = a / 2.0 if order == 0 else 0.0
    aj = a
    yj = y
    for j in range(1, _SERIES_TERMS):
        c = aj * a / (j + 2) - aj / (j + 1)
        if order == 0:
            total += c * yj
        elif order == 1:
            total -= j * c * yj * y
        else:
            total += j * (j + 1) * c * yj * y * y
        aj *= a
        yj *= y
    return total


# ------------------------------------------------------------------- root finding


def _bracketed_root(f, lo, hi, what):
    flo, fhi = f(lo), f(hi)
    if not (np.sign(flo) * np.sign(fhi) < 0):
        raise BracketFailure(f"{what}: no sign change on [{lo!r}, {hi!r}] (f = {flo!r}, {fhi!r})")
    return optimize.brentq(f, lo, hi, xtol=ROOT_XTOL, rtol=4 * _EPS, maxiter=500)


def _near_left(x0, f, sign, what):
    """Point just right of ``x0`` where ``f`` already has the given sign."""
    def has_sign(x):
        try:
            return np.sign(f(x)) == sign
        except DomainError:
            return False

    for k in range(2, 16):
        x = x0 + max(abs(x0), 1.0) * 10.0 ** (-k)
        if x > x0 and has_sign(x):
            return x
    x = float(x0)
    for _ in range(64):
        x = float(np.nextafter(x, math.inf))
        if has_sign(x):
            return x
    raise BracketFailure(f"{what}: expected sign {sign:+d} not observed near {x0!r}")


@functools.lru_cache(maxsize=256)
def find_shape(a: float) -> GShapeReport:
    """Minimum structure of ``g`` (and therefore of ``m``) for ``1 < a < 3/2``.

    ``b`` is where ``g'''`` changes sign, ``c`` the zero of ``g''`` in ``(a, b)``,
    ``x_a`` the zero of ``g'`` in ``(a, c)`` and ``r_a = 1 - 1/x_a`` the minimizer
    of ``m``.
    """
    if not (1.0 < a < 1.5):
        raise DomainError(f"shape report needs 1 < a < 3/2, got {a!r}")
    b = a / (3.0 - 2.0 * a)
    g2 = lambda x: g_function(a, x, 2)  # noqa: E731
    g1 = lambda x: g_function(a, x, 1)  # noqa: E731
    c = _bracketed_root(g2, _near_left(a, g2, +1, "g''"), b, "zero of g''")
    x_a = _bracketed_root(g1, _near_left(a, g1, -1, "g'"), c, "zero of g'")
    return GShapeReport(a=a, b=b, c=c, x_a=x_a, r_a=1.0 - 1.0 / x_a)


@functools.lru_cache(maxsize=1024)
def solve_r_c(a: float) -> float:
    """Critical mutation probability: the root of ``m(r) = 1`` for ``1 < a <= 2``."""
    if not (1.0 < a <= 2.0):
        raise DomainError(f"r_c is defined for 1 < a <= 2, got {a!r}")
    if a == 2.0:
        return 1.0
    f = lambda r: m_uniform_closed_form(a, r) - 1.0  # noqa: E731
    left = 1.0 - 1.0 / a
    right = 1.0 if a >= 1.5 else find_shape(a).r_a
    return _bracketed_root(f, _near_left(left, f, +1, "m(r) - 1"), right, "m(r) = 1")


def critical_threshold(a: float) -> float | None:
    """``r_c`` where it exists, otherwise ``None``."""
    return solve_r_c(a) if 1.0 < a <= 2.0 else None


def classify_phase(dist: RateDistribution, r: float) -> PhaseVerdict:
    """Survival phase of the process for the law ``dist`` at mutation probability ``r``."""
    cond = evaluate_conditions(dist, r)
    r_c = r_I = None
    if isinstance(dist, Uniform) and dist.lo == 0.0:
        a = dist.a
        if a > 1.0:
            r_I = 1.0 - 1.0 / a
        try:
            r_c = critical_threshold(a)
        except BracketFailure:
            # a so close to 1 that r_c is within rounding of 1 - 1/a
            r_c = None
        if r_c is not None and r == r_c and not cond.condition_I_holds:
            # critical tree: the root of m = 1 dies out
            cond = SurvivalConditions(cond.condition_I_mass, 1.0, False, False, 1.0)
    if cond.condition_I_holds:
        phase = Phase.SURVIVES_VIA_I
    elif cond.condition_II_holds:
        phase = Phase.SURVIVES_VIA_II
    else:
        phase = Phase.EXTINCT
    return PhaseVerdict(phase=phase, witness=cond, r_c=r_c, r_I_boundary=r_I)
