"""Deterministic two-genome model.

Genome 1 replicates at rate ``a1`` and each copy is a genome-2 mutant with
probability ``r``; genome 2 replicates faithfully at rate ``a2``::

    v1' = a1 (1 - r) v1
    v2' = a1 r v1 + a2 v2
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class OdeParams:
    a1: float
    a2: float
    r: float
    v1_0: float = 1.0
    v2_0: float = 0.0

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise DomainError("replication rates must be positive")
        if not (0.0 <= self.r <= 1.0):
            raise DomainError(f"r must lie in [0, 1], got {self.r!r}")
        if self.v1_0 < 0 or self.v2_0 < 0:
            raise DomainError("initial abundances must be nonnegative")
        if self.a1 <= self.a2:
            warnings.warn(
                f"a1={self.a1} does not exceed a2={self.a2}; genome 1 is not the fitter one",
                stacklevel=3,
            )

    @property
    def growth1(self) -> float:
        return self.a1 * (1.0 - self.r)

    @property
    def threshold(self) -> float:
        """Mutation probability below which genome 1 keeps a positive share."""
        return 1.0 - self.a2 / self.a1


def _phi(d, t):
    """``(exp(d t) - 1) / d``, equal to ``t`` at ``d = 0``."""
    if d == 0.0:
        return t
    try:
        return math.expm1(d * t) / d
    except OverflowError:
        return math.inf


def solve_closed_form(p: OdeParams, t):
    """``(v1(t), v2(t))``; ``t`` may be a scalar or an array."""
    if np.ndim(t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("t must be nonnegative")
        pairs = [solve_closed_form(p, float(s)) for s in t]
        return np.array([v for v, _ in pairs]), np.array([w for _, w in pairs])
    if t < 0:
        raise DomainError("t must be nonnegative")
    g1 = p.growth1
    v1 = p.v1_0 * _exp(g1 * t)
    # v2 = e^{a2 t} (v2_0 + a1 r v1_0 (e^{(g1 - a2) t} - 1) / (g1 - a2))
    v2 = p.v2_0 + p.a1 * p.r * p.v1_0 * _phi(g1 - p.a2, t)
    v2 = v2 * _exp(p.a2 * t) if v2 > 0 else 0.0
    return v1, v2


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def ratio(p: OdeParams, t: float) -> float:
    """``v1(t) / v2(t)`` without forming either abundance; ``inf`` while ``v2 = 0``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    d = p.growth1 - p.a2
    den = p.v2_0 + p.a1 * p.r * p.v1_0 * _phi(d, t)
    if den == 0.0:
        return math.inf if p.v1_0 > 0 else math.nan
    if d > 0:
        # divide through by e^{d t} to keep large times finite
        return p.v1_0 / (p.v2_0 * _exp(-d * t) + p.a1 * p.r * p.v1_0 * (-math.expm1(-d * t)) / d)
    return p.v1_0 * math.exp(d * t) / den


@dataclass(frozen=True)
class RatioLimit:
    """Long-time limit of ``v1 / v2``; ``positive`` is False for a zero limit."""

    positive: bool
    value: float

    def to_json(self) -> dict:
        return {
            "limit": "positive" if self.positive else "zero",
            "value": None if math.isinf(self.value) else self.value,
            "infinite": math.isinf(self.value),
        }


def ratio_limit(p: OdeParams) -> RatioLimit:
    """Limit of ``v1(t) / v2(t)`` as ``t -> inf``.

    For ``0 < r < 1 - a2/a1`` the limit is ``(a1 (1 - r) - a2) / (a1 r)``, read
    off the closed form; at and above the threshold it is 0. The verdict
    compares ``r`` with the threshold itself, so it flips exactly there.
    """
    if p.v1_0 == 0:
        raise DomainError("ratio limit needs v1_0 > 0")
    if p.r == 0.0:
        if p.v2_0 == 0.0 or p.a1 > p.a2:
            return RatioLimit(True, math.inf)
        if p.a1 == p.a2:
            return RatioLimit(True, p.v1_0 / p.v2_0)
        return RatioLimit(False, 0.0)
    if p.r < p.threshold:
        # (a1 (1 - r) - a2) / (a1 r) rewritten around the threshold
        return RatioLimit(True, (p.threshold - p.r) / p.r)
    return RatioLimit(False, 0.0)


def trajectory(p: OdeParams, t_end: float, n: int = 101):
    """Rows ``(t, v1, v2, v1 / v2)`` on an even grid; the ratio is ``inf`` while ``v2 = 0``."""
    ts = np.linspace(0.0, t_end, n)
    rows = []
    for s in ts:
        v1, v2 = solve_closed_form(p, float(s))
        rows.append((float(s), v1, v2, ratio(p, float(s))))
    return rows
