"""Exact, prefix-closed enumeration of half-space walk classes.

The search forest is cut at a fixed prefix depth; every prefix is an
independent task for the compiled (or fallback) backtracking kernel and
per-task tables are merged by exact integer addition, so the result does
not depend on the number of workers.
"""
from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping

import numpy as np

from pulledsaw import kernels
from pulledsaw.walks import Walk, classify

log = logging.getLogger(__name__)

WORKERS_ENV = "PULLEDSAW_WORKERS"
DEFAULT_PREFIX_DEPTH = 4


class WalkClass(str, enum.Enum):
    POSITIVE = "positive"
    POSITIVE_UNFOLDED = "positive-unfolded"
    FULL_LATTICE = "full-lattice"
    PLANE = "plane"

    def __str__(self):
        return self.value


_KERNEL_CLASS = {
    WalkClass.POSITIVE: kernels.POSITIVE,
    WalkClass.POSITIVE_UNFOLDED: kernels.UNFOLDED,
    WalkClass.FULL_LATTICE: kernels.FULL,
    WalkClass.PLANE: kernels.FULL,
}


class EnumerationError(RuntimeError):
    pass


class CountOverflowError(EnumerationError, OverflowError):
    def __init__(self, n, v, h):
        super().__init__(f"count overflow in cell n={n}, v={v}, h={h}")
        self.cell = (n, v, h)


class ResourceLimitError(EnumerationError):
    """The node budget ran out; no partial table is returned."""


class ClassMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CountTable:
    """Joint counts ``c_n(v, h)`` for ``0 <= n <= n_max``.

    ``counts[n]`` maps ``(v, h)`` to a count.  Exact tables hold Python
    ints; tables with ``stochastic=True`` hold float estimates.  For the
    full-lattice class cells are ``(0, z_n)``; for the plane class every
    walk of length ``n`` sits in cell ``(n, 0)`` (all its vertices are
    visits when the plane is the adsorbing surface).  ``dimension`` of a
    plane table is the dimension of the walks themselves.
    """

    dimension: int
    walk_class: WalkClass
    n_max: int
    counts: tuple
    stochastic: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "walk_class", WalkClass(self.walk_class))
        if len(self.counts) != self.n_max + 1:
            raise ValueError("counts must have one level per n in [0, n_max]")
        object.__setattr__(self, "counts", tuple(dict(level) for level in self.counts))

    def __eq__(self, other):
        if not isinstance(other, CountTable):
            return NotImplemented
        return (self.dimension, self.walk_class, self.n_max, self.stochastic, self.counts) == (
            other.dimension, other.walk_class, other.n_max, other.stochastic, other.counts)

    def __getitem__(self, n: int) -> dict:
        return self.counts[n]

    def total(self, n: int):
        return sum(self.counts[n].values())

    def totals(self) -> list:
        return [self.total(n) for n in range(self.n_max + 1)]

    def cells(self) -> Iterator[tuple[int, int, int, object]]:
        """Yield ``(n, v, h, count)`` sorted by ``(n, v, h)``."""
        for n, level in enumerate(self.counts):
            for (v, h) in sorted(level):
                yield n, v, h, level[(v, h)]

    def truncated(self, n_max: int) -> "CountTable":
        if n_max > self.n_max:
            raise ValueError("cannot extend a table by truncation")
        return CountTable(self.dimension, self.walk_class, n_max, self.counts[: n_max + 1],
                          self.stochastic, dict(self.meta))

    @cached_property
    def _arrays(self):
        out = []
        for level in self.counts:
            keys = sorted(k for k, c in level.items() if c > 0)
            v = np.array([k[0] for k in keys], dtype=float)
            h = np.array([k[1] for k in keys], dtype=float)
            logc = np.array([math.log(level[k]) for k in keys], dtype=float)
            out.append((v, h, logc))
        return out

    def arrays(self, n: int):
        """``(v, h, log count)`` arrays over the nonzero cells of level ``n``."""
        return self._arrays[n]


def workers_from_env(workers: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    if workers is not None:
        return max(1, int(workers))
    return os.cpu_count() or 1


def _prefixes(d: int, depth: int, symmetric: bool) -> list[tuple[int, ...]]:
    """Self-avoiding step sequences of length ``depth`` (no class filter)."""
    steps = kernels.directions(d)
    zax = d - 1
    out = []

    def rec(pos, occupied, seq, has_lat):
        if len(seq) == depth:
            out.append(tuple(seq))
            return
        for k, s in enumerate(steps):
            axis = k // 2
            if symmetric and not has_lat and axis != zax and k != 0:
                continue
            npos = tuple(a + b for a, b in zip(pos, s))
            if npos in occupied:
                continue
            occupied.add(npos)
            seq.append(k)
            rec(npos, occupied, seq, has_lat or axis != zax)
            seq.pop()
            occupied.discard(npos)

    origin = (0,) * d
    rec(origin, {origin}, [], False)
    return out


def _task(args):
    d, n_max, cls, prefix, symmetric, node_limit = args
    return kernels.count_walks(d, n_max, cls, prefix, symmetric, node_limit)


def _run_tasks(tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        yield from map(_task, tasks)
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        yield from ex.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * workers)))


def enumerate_walks(d: int, n_max: int, walk_class=WalkClass.POSITIVE, *,
                    workers: int | None = None, symmetric: bool = False,
                    prefix_depth: int = DEFAULT_PREFIX_DEPTH,
                    node_limit: int = 0) -> CountTable:
    """Exact counts for every length ``n <= n_max`` of one walk class.

    ``symmetric`` canonicalises the first lateral step and multiplies by the
    orbit size; it is not available for the unfolded class, whose x axis is
    special.  ``node_limit`` bounds the search per subtree; exceeding it
    raises :class:`ResourceLimitError` and discards everything.
    """
    walk_class = WalkClass(walk_class)
    min_d = 1 if walk_class is WalkClass.PLANE else 2
    if d < min_d:
        raise ValueError(f"{walk_class} walks need d >= {min_d}")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if symmetric and walk_class is WalkClass.POSITIVE_UNFOLDED:
        raise ValueError("symmetry reduction is not valid for unfolded walks")
    cls = _KERNEL_CLASS[walk_class]
    workers = workers_from_env(workers)
    depth = min(prefix_depth, n_max)

    shape = (n_max + 1, n_max + 1, 2 * n_max + 1)
    total = np.zeros(shape, dtype=object)
    try:
        if depth >= 1:
            head = kernels.count_walks(d, depth - 1, cls, (), symmetric, node_limit)
            total[:depth, :depth, n_max - depth + 1: n_max + depth] += head.astype(object)
        tasks = [(d, n_max, cls, p, symmetric, node_limit) for p in _prefixes(d, depth, symmetric)]
        for arr in _run_tasks(tasks, workers):
            total += arr.astype(object)
    except kernels.KernelOverflow as exc:
        raise CountOverflowError(*exc.cell) from exc
    except kernels.NodeLimitExceeded as exc:
        raise ResourceLimitError(str(exc)) from exc

    levels = []
    for n in range(n_max + 1):
        if walk_class is WalkClass.PLANE:
            levels.append({(n, 0): int(total[n].sum())})
            continue
        level = {}
        vs, hs = np.nonzero(total[n])
        for v, hi in zip(vs, hs):
            level[(int(v), int(hi) - n_max)] = int(total[n, v, hi])
        levels.append(level)
    log.debug("enumerated d=%d %s n<=%d with %d tasks", d, walk_class, n_max, len(tasks))
    return CountTable(d, walk_class, n_max, tuple(levels),
                      meta={"symmetric": symmetric, "kernel": kernels.IMPLEMENTATION})


def plane_from_full(full: CountTable) -> CountTable:
    """Relabel full-lattice walks of dimension k as the plane class of a
    (k + 1)-dimensional half-space (the same walks, all vertices visits)."""
    if full.walk_class is not WalkClass.FULL_LATTICE:
        raise ClassMismatchError(f"expected a full-lattice table, got {full.walk_class}")
    levels = tuple({(n, 0): full.total(n)} for n in range(full.n_max + 1))
    return CountTable(full.dimension, WalkClass.PLANE, full.n_max, levels, full.stochastic,
                      {**full.meta, "source": "full-lattice"})


def derive_loops(table: CountTable) -> list[dict[int, int]]:
    """The ``h = 0`` slice: ``l_n(v)`` for every level."""
    if table.walk_class not in (WalkClass.POSITIVE, WalkClass.POSITIVE_UNFOLDED):
        raise ClassMismatchError(f"loops need a positive table, got {table.walk_class}")
    return [{v: c for (v, h), c in level.items() if h == 0} for level in table.counts]


# -- independent oracle -----------------------------------------------------

def _oracle_walks(d: int, n: int):
    """All n-step self-avoiding walks in Z^d, by unpruned recursion."""
    steps = kernels.directions(d)

    def rec(path):
        if len(path) == n + 1:
            yield path
            return
        last = path[-1]
        for s in steps:
            nxt = tuple(a + b for a, b in zip(last, s))
            if nxt in path:  # fresh linear scan, no occupancy structure
                continue
            yield from rec(path + [nxt])

    yield from rec([(0,) * d])


def oracle_counts(d: int, n: int, walk_class) -> dict[tuple[int, int], int]:
    walk_class = WalkClass(walk_class)
    out: dict[tuple[int, int], int] = {}
    for path in _oracle_walks(d, n):
        if walk_class is WalkClass.PLANE:
            key = (n, 0)
        elif walk_class is WalkClass.FULL_LATTICE:
            key = (0, path[-1][-1])
        else:
            f = classify(Walk(tuple(path)))
            if not f.positive:
                continue
            if walk_class is WalkClass.POSITIVE_UNFOLDED and not f.unfolded_x:
                continue
            key = (f.visits, f.height)
        out[key] = out.get(key, 0) + 1
    return out


@dataclass(frozen=True)
class OracleResult:
    ok: bool
    first_mismatch: tuple | None = None  # (cell, oracle count, table count)

    def __bool__(self):
        return self.ok


def verify_oracle(d: int, n: int, walk_class, table: CountTable | Mapping) -> OracleResult:
    """Compare level ``n`` of ``table`` with a naive independent enumeration."""
    level = table[n] if isinstance(table, CountTable) else table
    expected = oracle_counts(d, n, walk_class)
    for key in sorted(set(expected) | set(level)):
        if expected.get(key, 0) != level.get(key, 0):
            return OracleResult(False, (key, expected.get(key, 0), level.get(key, 0)))
    return OracleResult(True)
