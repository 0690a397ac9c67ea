"""Flat-histogram PERM estimates of ``c_n^+(v, h)`` for positive walks.

Tours are grouped into fixed-size batches.  Each batch runs with its own
counter-based generator keyed by ``(seed, batch index)`` and its own
running flatness estimate, so the batch decomposition (and therefore the
result) does not depend on how many workers execute it.  Batch weight
sums are merged cell by cell with ``math.fsum``, which is exactly rounded
and therefore order independent.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from pulledsaw import kernels
from pulledsaw.enumeration import CountTable, WalkClass, workers_from_env

BATCH_TOURS = 16384
GENERATOR = "flatperm-splitmix64-v1"


def batch_key(seed: int, index: int) -> int:
    """64-bit generator key for one batch."""
    state = np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint64)
    return int(state[0])


def batch_sizes(tours: int, batch_tours: int = BATCH_TOURS) -> list[int]:
    full, rest = divmod(tours, batch_tours)
    return [batch_tours] * full + ([rest] if rest else [])


def _run_batch(args):
    d, n_max, tours, key = args
    wsum, wcomp, samples = kernels.flatperm_batch(d, n_max, tours, key)
    return wsum - wcomp, samples


@dataclass(frozen=True, eq=False)
class DoSEstimate:
    """Estimated ``c_n^+(v, h)``; cells never sampled are absent, not zero."""

    dimension: int
    n_max: int
    estimates: tuple          # per n: {(v, h): float}
    samples: tuple            # per n: {(v, h): int}
    tours: int
    seed: int | None
    batch_tours: int = BATCH_TOURS
    meta: dict = field(default_factory=dict)

    def __getitem__(self, n: int) -> dict:
        return self.estimates[n]

    def has(self, n: int, v: int, h: int) -> bool:
        return (v, h) in self.estimates[n]

    def total(self, n: int) -> float:
        return math.fsum(self.estimates[n].values())

    def checksum_payload(self) -> bytes:
        rows = []
        for n, level in enumerate(self.estimates):
            for (v, h) in sorted(level):
                rows.append(f"{n},{v},{h},{level[(v, h)].hex()},{self.samples[n][(v, h)]}")
        return "\n".join(rows).encode()

    def to_table(self) -> CountTable:
        return CountTable(self.dimension, WalkClass.POSITIVE, self.n_max, self.estimates,
                          stochastic=True,
                          meta={"seed": self.seed, "tours": self.tours, "generator": GENERATOR,
                                "batch_tours": self.batch_tours})

    @classmethod
    def from_table(cls, table: CountTable) -> "DoSEstimate":
        """Wrap an exact table as an error-free estimate (for comparisons)."""
        est = tuple({k: float(c) for k, c in level.items() if c > 0} for level in table.counts)
        smp = tuple({k: 1 for k in level} for level in est)
        return cls(table.dimension, table.n_max, est, smp, 0, None)

    def __eq__(self, other):
        if not isinstance(other, DoSEstimate):
            return NotImplemented
        return (self.dimension, self.n_max, self.tours, self.seed, self.batch_tours,
                self.estimates, self.samples) == (other.dimension, other.n_max, other.tours,
                                                  other.seed, other.batch_tours,
                                                  other.estimates, other.samples)


def run_flatperm(d: int, n_max: int, tours: int, seed: int, *, workers: int | None = None,
                 batch_tours: int = BATCH_TOURS) -> DoSEstimate:
    if tours < 1 or n_max < 1:
        raise ValueError("tours and n_max must be >= 1")
    if d < 2:
        raise ValueError("flatPERM needs d >= 2")
    workers = workers_from_env(workers)
    sizes = batch_sizes(tours, batch_tours)
    tasks = [(d, n_max, s, batch_key(seed, i)) for i, s in enumerate(sizes)]
    t0 = time.perf_counter()
    if workers <= 1 or len(tasks) == 1:
        results = list(map(_run_batch, tasks))
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
            results = list(ex.map(_run_batch, tasks))
    weights = np.stack([r[0] for r in results])
    counts = sum(r[1] for r in results)
    nz = np.argwhere(counts > 0)
    estimates = [dict() for _ in range(n_max + 1)]
    samples = [dict() for _ in range(n_max + 1)]
    for n, v, h in nz:
        w = math.fsum(weights[:, n, v, h].tolist()) / tours
        estimates[n][(int(v), int(h))] = w
        samples[n][(int(v), int(h))] = int(counts[n, v, h])
    return DoSEstimate(d, n_max, tuple(estimates), tuple(samples), tours, seed, batch_tours,
                       meta={"generator": GENERATOR, "kernel": kernels.IMPLEMENTATION,
                             "wall_time": time.perf_counter() - t0, "batches": len(sizes)})


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class LevelError:
    n: int
    cells: int          # exact cells above the mass threshold
    missing: int        # of those, cells absent from the estimate
    max_rel: float
    mean_rel: float


@dataclass(frozen=True)
class ComparisonReport:
    levels: tuple
    mass_threshold: float
    rel_threshold: float

    @property
    def max_rel(self) -> float:
        return max((lv.max_rel for lv in self.levels), default=0.0)

    @property
    def passed(self) -> bool:
        return all(lv.missing == 0 and lv.max_rel <= self.rel_threshold for lv in self.levels)


def compare(estimate: DoSEstimate, exact: CountTable, mass_threshold: float = 1e-4,
            rel_threshold: float = 0.05) -> ComparisonReport:
    """Relative errors over exact cells holding at least ``mass_threshold``
    of their level total; an absent cell counts as error 1."""
    if exact.walk_class is not WalkClass.POSITIVE:
        raise ValueError("estimates are compared with positive-walk tables")
    if exact.dimension != estimate.dimension:
        raise ValueError("dimension mismatch")
    top = min(exact.n_max, estimate.n_max)
    if top < 1:
        raise ValueError("estimate and table share no lengths n >= 1")
    levels = []
    for n in range(1, top + 1):
        total = exact.total(n)
        errs, missing = [], 0
        for key, c in exact[n].items():
            if c < mass_threshold * total:
                continue
            if key not in estimate[n]:
                missing += 1
                errs.append(1.0)
            else:
                errs.append(abs(estimate[n][key] - c) / c)
        levels.append(LevelError(n, len(errs), missing, max(errs, default=0.0),
                                 float(np.mean(errs)) if errs else 0.0))
    return ComparisonReport(tuple(levels), mass_threshold, rel_threshold)


def hybrid_table(exact: CountTable, estimate: DoSEstimate) -> CountTable:
    """Exact levels up to ``exact.n_max``, Monte Carlo levels beyond."""
    if exact.walk_class is not WalkClass.POSITIVE or exact.dimension != estimate.dimension:
        raise ValueError("need a positive table of the same dimension")
    if estimate.n_max <= exact.n_max:
        raise ValueError("the estimate does not extend the exact table")
    levels = [{k: float(c) for k, c in lv.items()} for lv in exact.counts]
    levels += [dict(estimate[n]) for n in range(exact.n_max + 1, estimate.n_max + 1)]
    return CountTable(exact.dimension, WalkClass.POSITIVE, estimate.n_max, tuple(levels),
                      stochastic=True, meta={"exact_n_max": exact.n_max, "seed": estimate.seed,
                                             "tours": estimate.tours})
