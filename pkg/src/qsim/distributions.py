"""Birth-rate laws: sampling, tail masses and expectations.

Four kinds are supported: uniform on an interval (``[0, a]`` by default), a
point mass, a finite mixture and a piecewise-linear tabulated density. Every
kind reduces to a flat list of *atoms* and *linear segments*; sampling,
``mass_above`` and ``expect`` all work on that list, and the same list is
handed to the compiled simulator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import NonconvergentQuadrature
from .streams import as_generator

REL_TOL = 1e-10
ABS_TOL = 1e-14

# log|h(e - d)| against log d near a singular endpoint e: slopes at or above
# this are treated as the non-integrable 1/(e - x) family.
_DIVERGENT_EXPONENT = 0.98


@dataclass(frozen=True)
class Atom:
    weight: float
    at: float


@dataclass(frozen=True)
class Segment:
    """Mass ``weight`` spread on ``[lo, hi]`` with density linear from ``d0`` to ``d1``."""

    weight: float
    lo: float
    hi: float
    d0: float = 1.0
    d1: float = 1.0

    def density(self, x):
        """Normalized density (absolute, already multiplied by ``weight``)."""
        w = self.hi - self.lo
        t = (np.asarray(x, dtype=float) - self.lo) / w
        norm = 0.5 * (self.d0 + self.d1) * w
        return self.weight * (self.d0 + (self.d1 - self.d0) * t) / norm

    def cdf(self, x: float) -> float:
        """Segment mass on ``[lo, x]`` as a fraction of ``weight``."""
        if x <= self.lo:
            return 0.0
        if x >= self.hi:
            return 1.0
        t = (x - self.lo) / (self.hi - self.lo)
        return (self.d0 * t + 0.5 * (self.d1 - self.d0) * t * t) / (0.5 * (self.d0 + self.d1))


class RateDistribution:
    """Base class for the law of birth rates.

    Subclasses provide ``pieces()`` (atoms and segments with total weight 1),
    ``support_upper`` and ``to_json()``. Instances are immutable.
    """

    def pieces(self) -> tuple:
        raise NotImplementedError

    @property
    def support_upper(self) -> float:
        raise NotImplementedError

    @property
    def is_absolutely_continuous(self) -> bool:
        return not any(isinstance(p, Atom) for p in self.pieces())

    def to_json(self) -> dict:
        raise NotImplementedError

    def mean(self) -> float:
        return expect(self, lambda lam: lam)

    def flat(self):
        """Arrays ``(kinds, cum, lo, hi, d0, d1)`` consumed by the kernels."""
        cached = self.__dict__.get("_flat")
        if cached is None:
            ps = self.pieces()
            kinds = np.array(
                [_kernels.ATOM if isinstance(p, Atom) else _kernels.SEGMENT for p in ps],
                dtype=np.int64,
            )
            cum = np.cumsum([p.weight for p in ps])
            cum[-1] = 1.0
            lo = np.array([p.at if isinstance(p, Atom) else p.lo for p in ps])
            hi = np.array([p.at if isinstance(p, Atom) else p.hi for p in ps])
            d0 = np.array([0.0 if isinstance(p, Atom) else p.d0 for p in ps])
            d1 = np.array([0.0 if isinstance(p, Atom) else p.d1 for p in ps])
            cached = (kinds, cum, lo, hi, d0, d1)
            object.__setattr__(self, "_flat", cached)
        return cached


@dataclass(frozen=True, eq=True)
class Uniform(RateDistribution):
    """Uniform law on ``[lo, a]``; ``lo`` defaults to 0."""

    a: float
    lo: float = 0.0

    def __post_init__(self):
        if not (self.a > self.lo >= 0.0) or not math.isfinite(self.a):
            raise ValueError(f"uniform law needs 0 <= lo < a < inf, got lo={self.lo}, a={self.a}")

    def pieces(self):
        return (Segment(1.0, self.lo, self.a),)

    @property
    def support_upper(self):
        return self.a

    def to_json(self):
        d = {"kind": "uniform", "a": self.a}
        if self.lo:
            d["lo"] = self.lo
        return d


@dataclass(frozen=True, eq=True)
class PointMass(RateDistribution):
    lam: float

    def __post_init__(self):
        if not (self.lam >= 0.0) or not math.isfinite(self.lam):
            raise ValueError(f"point mass must sit at a finite rate >= 0, got {self.lam}")

    def pieces(self):
        return (Atom(1.0, self.lam),)

    @property
    def support_upper(self):
        return self.lam

    def to_json(self):
        return {"kind": "point", "lambda": self.lam}


@dataclass(frozen=True, eq=True)
class Mixture(RateDistribution):
    """Finite mixture; ``components`` is a sequence of ``(weight, law)`` pairs."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), d) for w, d in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        if any(w <= 0 for w, _ in comps):
            raise ValueError("mixture weights must be positive")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", comps)

    def pieces(self):
        out = []
        for w, d in self.components:
            for p in d.pieces():
                if isinstance(p, Atom):
                    out.append(Atom(w * p.weight, p.at))
                else:
                    out.append(Segment(w * p.weight, p.lo, p.hi, p.d0, p.d1))
        return tuple(out)

    @property
    def support_upper(self):
        return max(d.support_upper for _, d in self.components)

    def to_json(self):
        return {
            "kind": "mixture",
            "components": [{"weight": w, "dist": d.to_json()} for w, d in self.components],
        }


@dataclass(frozen=True, eq=False)
class Tabulated(RateDistribution):
    """Piecewise-linear density through ``(grid[i], density[i])``."""

    grid: tuple
    density: tuple
    _segments: tuple = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.grid, dtype=float)
        y = np.asarray(self.density, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("grid and density must be 1-d of equal length >= 2")
        if x[0] < 0 or not np.all(np.diff(x) > 0) or not np.all(np.isfinite(x)):
            raise ValueError("grid must be finite, nonnegative and strictly increasing")
        if np.any(y < 0) or not np.all(np.isfinite(y)):
            raise ValueError("density must be finite and nonnegative")
        areas = 0.5 * (y[1:] + y[:-1]) * np.diff(x)
        total = float(areas.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"tabulated density integrates to {total!r}, not 1")
        segs = tuple(
            Segment(float(m), float(x[i]), float(x[i + 1]), float(y[i]), float(y[i + 1]))
            for i, m in enumerate(areas / total)
            if m > 0
        )
        object.__setattr__(self, "grid", tuple(x.tolist()))
        object.__setattr__(self, "density", tuple(y.tolist()))
        object.__setattr__(self, "_segments", segs)

    def __eq__(self, other):
        return isinstance(other, Tabulated) and (self.grid, self.density) == (other.grid, other.density)

    def __hash__(self):
        return hash((self.grid, self.density))

    def pieces(self):
        return self._segments

    @property
    def support_upper(self):
        return max(s.hi for s in self._segments)

    def to_json(self):
        return {"kind": "table", "grid": list(self.grid), "density": list(self.density)}


def from_json(desc: dict) -> RateDistribution:
    """Build a law from its JSON descriptor (see ``RateDistribution.to_json``)."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ValueError(f"distribution descriptor needs a 'kind': {desc!r}")
    kind = desc["kind"]
    if kind == "uniform":
        return Uniform(float(desc["a"]), float(desc.get("lo", 0.0)))
    if kind == "point":
        return PointMass(float(desc["lambda"]))
    if kind == "mixture":
        comps = []
        for c in desc["components"]:
            if isinstance(c, dict):
                comps.append((c["weight"], from_json(c["dist"])))
            else:
                w, d = c
                comps.append((w, from_json(d)))
        return Mixture(tuple(comps))
    if kind == "table":
        return Tabulated(tuple(desc["grid"]), tuple(desc["density"]))
    raise ValueError(f"unknown distribution kind {kind!r}")


# --------------------------------------------------------------------- sampling


def sample_rate(dist: RateDistribution, rng) -> float:
    """One draw from ``dist``; consumes ``rng`` exactly as the compiled simulator does."""
    return float(_kernels.draw_rate(as_generator(rng), *dist.flat()))


def sample_rates(dist: RateDistribution, rng, size: int) -> np.ndarray:
    return _kernels.draw_rates(as_generator(rng), *dist.flat(), int(size))


# ---------------------------------------------------------------- tail masses


def mass_above(dist: RateDistribution, threshold: float) -> float:
    """``mu((threshold, inf))``."""
    if threshold == math.inf:
        return 0.0
    total = 0.0
    for p in dist.pieces():
        if isinstance(p, Atom):
            if p.at > threshold:
                total += p.weight
        else:
            total += p.weight * (1.0 - p.cdf(threshold))
    return min(total, 1.0)


# ---------------------------------------------------------------- expectations


def _safe(f: Callable[[float], float]) -> Callable[[float], float]:
    def h(x):
        try:
            v = float(f(x))
        except ZeroDivisionError:
            return math.inf
        return v

    return h


def _singular_exponent(h, e, width, side):
    """Estimate p in ``|h(e - side*d)| ~ d**(-p)`` as ``d -> 0``."""
    ds = [width * 1e-6, width * 1e-8, width * 1e-10]
    vals = [abs(h(e - side * d)) for d in ds]
    if any(not math.isfinite(v) for v in vals):
        return math.inf
    if min(vals) == 0.0:
        return -math.inf
    slopes = [
        math.log(vals[i + 1] / vals[i]) / math.log(ds[i] / ds[i + 1]) for i in range(len(ds) - 1)
    ]
    return slopes[-1]


def _integrate_segment_piece(h, x0, x1):
    """Integral of ``h`` on ``[x0, x1]`` where ``h`` may blow up at either end."""
    if x1 <= x0:
        return 0.0
    width = x1 - x0
    sing = [not math.isfinite(h(x)) for x in (x0, x1)]
    for is_sing, e, side in ((sing[0], x0, -1.0), (sing[1], x1, 1.0)):
        if is_sing and _singular_exponent(h, e, width, side) >= _DIVERGENT_EXPONENT:
            return math.inf

    # x = e - (e - start) s**2 removes inverse-square-root singularities at e
    # and flattens the weaker ones before adaptive Gauss-Kronrod sees them.
    if sing[1] and not sing[0]:
        g = lambda s: 2.0 * width * s * h(x1 - width * s * s)  # noqa: E731
        lo, hi = 0.0, 1.0
    elif sing[0] and not sing[1]:
        g = lambda s: 2.0 * width * s * h(x0 + width * s * s)  # noqa: E731
        lo, hi = 0.0, 1.0
    elif sing[0] and sing[1]:
        mid = 0.5 * (x0 + x1)
        return _integrate_segment_piece(h, x0, mid) + _integrate_segment_piece(h, mid, x1)
    else:
        g, lo, hi = h, x0, x1

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(g, lo, hi, epsabs=ABS_TOL, epsrel=REL_TOL, limit=400)
        except integrate.IntegrationWarning as exc:
            raise NonconvergentQuadrature(
                f"quadrature on [{x0!r}, {x1!r}] missed rel tol {REL_TOL}: {exc}"
            ) from None
    return val


def expect(
    dist: RateDistribution,
    integrand: Callable[[float], float],
    region: tuple = (0.0, math.inf),
) -> float:
    """Integral of ``integrand`` against ``dist`` over the closed interval ``region``.

    Atoms are evaluated directly. Segments are integrated adaptively; an
    endpoint where the integrand is infinite is probed for its blow-up
    exponent and the result is ``inf`` when the singularity is not
    integrable. An atom sitting on an infinite value of the integrand also
    gives ``inf``.

    Raises
    ------
    NonconvergentQuadrature
        The adaptive rule could not meet its tolerance.
    """
    a, b = float(region[0]), float(region[1])
    f = _safe(integrand)
    total = 0.0
    for p in dist.pieces():
        if isinstance(p, Atom):
            if a <= p.at <= b:
                v = f(p.at)
                total += math.inf if math.isinf(v) else p.weight * v
            continue
        x0, x1 = max(a, p.lo), min(b, p.hi)
        if x1 <= x0:
            continue
        h = lambda x, p=p: f(x) * float(p.density(x))  # noqa: E731
        total += _integrate_segment_piece(h, x0, x1)
        if math.isinf(total):
            return total
    return total


def as_distribution(obj) -> RateDistribution:
    if isinstance(obj, RateDistribution):
        return obj
    return from_json(obj)


__all__: Sequence[str] = (
    "RateDistribution",
    "Uniform",
    "PointMass",
    "Mixture",
    "Tabulated",
    "Atom",
    "Segment",
    "from_json",
    "as_distribution",
    "sample_rate",
    "sample_rates",
    "mass_above",
    "expect",
)
