"""Exact simulation of the evolution process.

One individual of genotype 1 starts at time 0 with a birth rate drawn from the
law ``mu``. Each individual gives birth at its genotype's rate and dies at
rate 1; a newborn founds a new genotype (fresh rate from ``mu``) with
probability ``r`` and otherwise joins its parent's genotype.

``simulate`` runs the genotype-aggregated Gillespie kernel; ``simulate_reference``
keeps every individual with its own exponential clocks and exists as a
distributional cross-check for it.
"""

from __future__ import annotations

import enum
import heapq
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .distributions import RateDistribution, as_distribution, sample_rate
from .streams import as_generator, replicate_seed

THREADS_ENV = "QSIM_THREADS"


@dataclass(frozen=True)
class ModelParams:
    dist: RateDistribution
    r: float

    def __post_init__(self):
        object.__setattr__(self, "dist", as_distribution(self.dist))
        if not (0.0 <= self.r <= 1.0):
            raise ValueError(f"mutation probability must lie in [0, 1], got {self.r!r}")


@dataclass(frozen=True)
class SimCaps:
    """Finite-horizon censoring of the (infinite-time) survival event.

    ``n_samples`` trajectory points are taken evenly on ``[0, t_max]``; 0
    disables trajectory recording.
    """

    t_max: float = 200.0
    pop_max: int = 100_000
    event_max: int = 100_000_000
    n_samples: int = 64

    def __post_init__(self):
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ValueError(f"t_max must be positive and finite, got {self.t_max!r}")
        if self.pop_max < 1 or self.event_max < 1:
            raise ValueError("pop_max and event_max must be positive")
        if self.n_samples < 0:
            raise ValueError("n_samples must be >= 0")

    def sample_times(self) -> np.ndarray:
        if self.n_samples == 0:
            return np.empty(0)
        if self.n_samples == 1:
            return np.array([self.t_max])
        return np.linspace(0.0, self.t_max, self.n_samples)


class Verdict(str, enum.Enum):
    EXTINCT = "extinct"
    SURVIVED = "survived_censored"


class CapReason(str, enum.Enum):
    POP_CAP = "pop_cap"
    TIME_CAP = "time_cap"
    EVENT_CAP = "event_cap"


_STATUS = {
    _kernels.EXTINCT: (Verdict.EXTINCT, None),
    _kernels.POP_CAP: (Verdict.SURVIVED, CapReason.POP_CAP),
    _kernels.TIME_CAP: (Verdict.SURVIVED, CapReason.TIME_CAP),
    _kernels.EVENT_CAP: (Verdict.SURVIVED, CapReason.EVENT_CAP),
}


@dataclass(frozen=True, eq=False)
class Trajectory:
    """State sampled at fixed times: population, founder-genotype count, live genotypes."""

    t: np.ndarray
    z: np.ndarray
    x: np.ndarray
    genotypes: np.ndarray

    def __eq__(self, other):
        return isinstance(other, Trajectory) and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("t", "z", "x", "genotypes")
        )

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True, eq=False)
class GenotypeLedger:
    """Every genotype ever born; label ``i`` sits at index ``i - 1`` and the root's parent is 0."""

    rates: np.ndarray
    parents: np.ndarray
    birth_times: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return np.arange(1, len(self.rates) + 1)

    def __len__(self):
        return len(self.rates)

    def __eq__(self, other):
        return isinstance(other, GenotypeLedger) and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("rates", "parents", "birth_times")
        )

    def rows(self):
        return list(zip(self.labels.tolist(), self.rates.tolist(), self.parents.tolist(),
                        self.birth_times.tolist()))

    def children_of(self, label: int, until: float = math.inf) -> int:
        """Number of genotypes founded by individuals of ``label`` up to time ``until``."""
        return int(np.count_nonzero((self.parents == label) & (self.birth_times <= until)))


@dataclass(frozen=True)
class SimOutcome:
    verdict: Verdict
    reason: CapReason | None
    final_time: float
    final_pop: int
    n_events: int
    founder_lineage_extinct_at: float | None
    ledger: GenotypeLedger
    trajectory: Trajectory | None = None
    rate_drift: float = field(default=0.0, compare=False)

    @property
    def extinct(self) -> bool:
        return self.verdict is Verdict.EXTINCT

    @property
    def genotypes_created(self) -> int:
        return len(self.ledger)


def _outcome(res, times) -> SimOutcome:
    status, t, z, events, founder_ext, drift, rates, parents, born, taken, tz, tx, tg = res
    verdict, reason = _STATUS[int(status)]
    traj = None
    if len(times):
        traj = Trajectory(times[:taken].copy(), tz[:taken], tx[:taken], tg[:taken])
    return SimOutcome(
        verdict=verdict,
        reason=reason,
        final_time=float(t),
        final_pop=int(z),
        n_events=int(events),
        founder_lineage_extinct_at=None if founder_ext < 0 else float(founder_ext),
        ledger=GenotypeLedger(rates, parents, born),
        trajectory=traj,
        rate_drift=float(drift),
    )


def simulate(params: ModelParams, caps: SimCaps = SimCaps(), seed=0, resync_every: int = 4096) -> SimOutcome:
    """One exact realization; bit-identical for equal ``(params, caps, seed)``."""
    gen = as_generator(seed)
    times = caps.sample_times()
    res = _kernels.run_process(
        gen, *params.dist.flat(), float(params.r), float(caps.t_max), int(caps.pop_max),
        int(caps.event_max), times, int(resync_every),
    )
    return _outcome(res, times)


# ------------------------------------------------------------------------ batch


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else the ``QSIM_THREADS`` variable; 0 means one per CPU."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ValueError(f"thread count must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


@dataclass(frozen=True)
class BatchRow:
    replicate: int
    verdict: Verdict
    reason: CapReason | None
    final_time: float
    final_pop: int
    genotypes_created: int


@dataclass(frozen=True)
class BatchResult:
    n_replicates: int
    n_survived: int
    survival_fraction: float
    ci95: tuple
    mean_extinction_time: float | None
    cap_tallies: dict
    rows: tuple

    def summary(self) -> dict:
        return {
            "n_replicates": self.n_replicates,
            "n_survived": self.n_survived,
            "survival_fraction": self.survival_fraction,
            "ci95_wilson": list(self.ci95),
            "mean_extinction_time": self.mean_extinction_time,
            "cap_tallies": dict(self.cap_tallies),
        }


def _run_chunk(flat, r, caps, base_seed, indices):
    out = []
    for i in indices:
        gen = as_generator(replicate_seed(base_seed, i))
        status, t, z, n_gen, _ = _kernels.run_summary(
            gen, *flat, r, float(caps.t_max), int(caps.pop_max), int(caps.event_max)
        )
        verdict, reason = _STATUS[int(status)]
        out.append(BatchRow(i, verdict, reason, float(t), int(z), int(n_gen)))
    return out


def simulate_batch(
    params: ModelParams,
    caps: SimCaps = SimCaps(),
    n_replicates: int = 1000,
    base_seed: int = 0,
    threads: int | None = None,
) -> BatchResult:
    """Monte Carlo survival frequency over independent replicates.

    Replicate ``i`` runs on ``replicate_seed(base_seed, i)``, so the rows (and
    every aggregate) are the same whatever the worker count.
    """
    if n_replicates < 1:
        raise ValueError(f"n_replicates must be >= 1, got {n_replicates}")
    workers = min(resolve_threads(threads), n_replicates)
    flat = params.dist.flat()
    r = float(params.r)
    if workers == 1:
        rows = _run_chunk(flat, r, caps, base_seed, range(n_replicates))
    else:
        chunks = np.array_split(np.arange(n_replicates), workers * 4)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(lambda ix: _run_chunk(flat, r, caps, base_seed, ix.tolist()), chunks)
            rows = [row for part in parts for row in part]

    survived = sum(row.verdict is Verdict.SURVIVED for row in rows)
    ext_times = [row.final_time for row in rows if row.verdict is Verdict.EXTINCT]
    ci = stats.binomtest(survived, n_replicates).proportion_ci(0.95, method="wilson")
    tallies = {reason.value: 0 for reason in CapReason}
    for row in rows:
        if row.reason is not None:
            tallies[row.reason.value] += 1
    return BatchResult(
        n_replicates=n_replicates,
        n_survived=survived,
        survival_fraction=survived / n_replicates,
        ci95=(float(ci.low), float(ci.high)),
        mean_extinction_time=float(np.mean(ext_times)) if ext_times else None,
        cap_tallies=tallies,
        rows=tuple(rows),
    )


# ------------------------------------------------------------- reference engine


def simulate_reference(params: ModelParams, caps: SimCaps = SimCaps(), seed=0) -> SimOutcome:
    """Per-individual engine: every individual owns a birth clock and a death clock.

    Pure Python and slow; meant for small caps in tests.
    """
    gen = as_generator(seed)
    dist, r = params.dist, params.r

    def expo(rate):
        return -math.log(1.0 - gen.random()) / rate

    rates = [sample_rate(dist, gen)]
    parents = [0]
    born = [0.0]
    genotype_of = {}
    alive_per_genotype = {1: 0}
    heap = []
    seq = 0

    def spawn_individual(label, now):
        nonlocal seq
        ident = seq
        seq += 1
        genotype_of[ident] = label
        alive_per_genotype[label] = alive_per_genotype.get(label, 0) + 1
        lam = rates[label - 1]
        if lam > 0:
            heapq.heappush(heap, (now + expo(lam), ident, 1))
        heapq.heappush(heap, (now + expo(1.0), ident, 0))

    times = caps.sample_times()
    tz, tx, tg = [], [], []

    def record_until(t_next):
        while len(tz) < len(times) and times[len(tz)] < t_next and times[len(tz)] <= caps.t_max:
            tz.append(len(genotype_of))
            tx.append(alive_per_genotype.get(1, 0))
            tg.append(sum(1 for v in alive_per_genotype.values() if v > 0))

    spawn_individual(1, 0.0)
    t = 0.0
    events = 0
    founder_ext = None
    reason = None
    verdict = Verdict.SURVIVED
    if len(genotype_of) >= caps.pop_max:
        reason = CapReason.POP_CAP
    while reason is None:
        if events >= caps.event_max:
            reason = CapReason.EVENT_CAP
            break
        t_ev, ident, is_birth = heapq.heappop(heap)
        if ident not in genotype_of:
            continue
        record_until(t_ev)
        if t_ev >= caps.t_max:
            t = caps.t_max
            reason = CapReason.TIME_CAP
            break
        t = t_ev
        events += 1
        label = genotype_of[ident]
        if is_birth:
            lam = rates[label - 1]
            heapq.heappush(heap, (t + expo(lam), ident, 1))
            if r > 0.0 and gen.random() < r:
                rates.append(sample_rate(dist, gen))
                parents.append(label)
                born.append(t)
                child = len(rates)
            else:
                child = label
            spawn_individual(child, t)
            if len(genotype_of) >= caps.pop_max:
                reason = CapReason.POP_CAP
        else:
            del genotype_of[ident]
            alive_per_genotype[label] -= 1
            if label == 1 and alive_per_genotype[1] == 0:
                founder_ext = t
            if not genotype_of:
                verdict = Verdict.EXTINCT
                break

    if verdict is Verdict.EXTINCT or reason is CapReason.TIME_CAP:
        record_until(math.inf)
    ledger = GenotypeLedger(np.array(rates), np.array(parents, dtype=np.int64), np.array(born))
    traj = None
    if len(times):
        n = len(tz)
        traj = Trajectory(times[:n].copy(), np.array(tz, dtype=np.int64),
                          np.array(tx, dtype=np.int64), np.array(tg, dtype=np.int64))
    return SimOutcome(
        verdict=verdict,
        reason=reason,
        final_time=float(t),
        final_pop=len(genotype_of),
        n_events=events,
        founder_lineage_extinct_at=founder_ext,
        ledger=ledger,
        trajectory=traj,
    )
