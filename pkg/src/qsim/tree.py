"""The genotype tree.

Vertex ``k`` is genotype ``k``; its children are the genotypes first born to
individuals of ``k``. The offspring count of a vertex with rate ``lam`` is the
number of mutant births its lineage produces before dying out, so the tree
is a Galton-Watson tree with mean offspring ``m(r)``. Only the jump chain of
a lineage matters here: each step is a same-type birth, a mutant birth or a
death with probabilities proportional to ``lam (1 - r)``, ``lam r`` and 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InfiniteMeanSuspected
from .sim import ModelParams
from .streams import as_generator

TRUNCATED = None
DEFAULT_LINEAGE_CAP = 1_000_000
DEFAULT_NODE_CAP = 1_000_000


def sample_Y_infinity(lam: float, r: float, cap: int = DEFAULT_LINEAGE_CAP, rng=0):
    """Mutant genotypes ever founded by one lineage of rate ``lam``.

    Returns ``None`` when the count passes ``cap``, the numerical stand-in for
    an infinite count (possible only for a supercritical lineage).
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    y = _kernels.lineage_mutants(as_generator(rng), float(lam), float(r), int(cap))
    return TRUNCATED if y < 0 else int(y)


def sample_Y_many(lam: float, r: float, size: int, cap: int = DEFAULT_LINEAGE_CAP, rng=0) -> np.ndarray:
    """Vector of ``size`` lineage counts; truncated draws are ``-1``."""
    return _kernels.lineage_batch(as_generator(rng), float(lam), float(r), int(cap), int(size))


@dataclass(frozen=True, eq=False)
class GenotypeTreeSample:
    """One genotype tree.

    ``parents[i]`` is the label of node ``i + 1``'s parent (0 for the root).
    ``offspring_counts[i]`` is -1 for nodes never expanded because the
    construction stopped first.
    """

    rates: np.ndarray
    parents: np.ndarray
    offspring_counts: np.ndarray
    truncated: bool

    @property
    def labels(self) -> np.ndarray:
        return np.arange(1, len(self.rates) + 1)

    @property
    def size(self) -> int:
        return len(self.rates)

    def nodes(self):
        return list(zip(self.labels.tolist(), self.rates.tolist(), self.parents.tolist()))


def sample_tree(params: ModelParams, node_cap: int = DEFAULT_NODE_CAP, rng=0,
                lineage_cap: int = DEFAULT_LINEAGE_CAP) -> GenotypeTreeSample:
    """Grow the genotype tree breadth-first until it dies out or passes ``node_cap``."""
    if node_cap < 1:
        raise ValueError(f"node_cap must be >= 1, got {node_cap}")
    lams, parents, offspring, truncated = _kernels.grow_tree(
        as_generator(rng), *params.dist.flat(), float(params.r), int(node_cap), int(lineage_cap)
    )
    return GenotypeTreeSample(lams, parents, offspring, bool(truncated))


@dataclass(frozen=True)
class MeanEstimate:
    m: float
    se: float
    n_samples: int
    truncated_fraction: float


def estimate_m(params: ModelParams, n_samples: int = 100_000, cap: int = DEFAULT_LINEAGE_CAP,
               rng=0, strict: bool = True) -> MeanEstimate:
    """Monte Carlo mean (and standard error) of the genotype-tree offspring count.

    Raises
    ------
    InfiniteMeanSuspected
        Some lineages passed ``cap`` and ``strict`` is set. With ``strict=False``
        the estimate over the finite draws is returned together with the
        truncated fraction.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    _, ys = _kernels.mixed_lineage_batch(
        as_generator(rng), *params.dist.flat(), float(params.r), int(cap), int(n_samples)
    )
    bad = ys < 0
    frac = float(bad.mean())
    if frac > 0 and strict:
        raise InfiniteMeanSuspected(
            f"{int(bad.sum())} of {n_samples} lineages passed cap={cap}", frac
        )
    good = ys[~bad].astype(float)
    m = float(good.mean()) if good.size else math.nan
    se = float(good.std(ddof=1) / math.sqrt(good.size)) if good.size > 1 else math.nan
    return MeanEstimate(m=m, se=se, n_samples=n_samples, truncated_fraction=frac)


@dataclass(frozen=True)
class TreeStats:
    n_trees: int
    n_truncated: int
    truncated_fraction: float
    mean_size_finite: float | None
    max_size: int


def tree_statistics(params: ModelParams, n_trees: int, node_cap: int = DEFAULT_NODE_CAP,
                    rng=0, lineage_cap: int = DEFAULT_LINEAGE_CAP) -> TreeStats:
    """Truncation frequency and sizes over ``n_trees`` independent trees on one stream."""
    gen = as_generator(rng)
    flat = params.dist.flat()
    truncated = 0
    sizes = []
    max_size = 0
    for _ in range(n_trees):
        lams, _, _, trunc = _kernels.grow_tree(gen, *flat, float(params.r), int(node_cap),
                                               int(lineage_cap))
        max_size = max(max_size, len(lams))
        if trunc:
            truncated += 1
        else:
            sizes.append(len(lams))
    return TreeStats(
        n_trees=n_trees,
        n_truncated=truncated,
        truncated_fraction=truncated / n_trees,
        mean_size_finite=float(np.mean(sizes)) if sizes else None,
        max_size=max_size,
    )
