"""Walks on the hypercubic lattice and their half-space features.

Coordinates are integer tuples of length ``d``.  The first coordinate is
the unfolding direction ``x`` and the last is the height ``z`` above the
adsorbing hyperplane ``z = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

LatticePoint = tuple[int, ...]


class MalformedWalkError(ValueError):
    """Raised for vertex sequences that are not lattice walks."""


def _is_unit_step(p: Sequence[int], q: Sequence[int]) -> bool:
    if len(p) != len(q):
        return False
    return sum(abs(a - b) for a, b in zip(p, q)) == 1


def is_self_avoiding(vertices: Sequence[Sequence[int]]) -> bool:
    """True iff the unit-step path ``vertices`` never revisits a site."""
    if len(vertices) == 0:
        raise MalformedWalkError("empty vertex sequence")
    for i in range(1, len(vertices)):
        if not _is_unit_step(vertices[i - 1], vertices[i]):
            raise MalformedWalkError(
                f"step {i} from {tuple(vertices[i - 1])} to {tuple(vertices[i])} is not a unit step")
    return len({tuple(p) for p in vertices}) == len(vertices)


@dataclass(frozen=True)
class Walk:
    """A self-avoiding walk rooted at the origin.

    The occupancy set is built once so membership tests stay O(1).
    """

    vertices: tuple[LatticePoint, ...]
    occupied: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        verts = tuple(tuple(int(c) for c in p) for p in self.vertices)
        if not verts:
            raise MalformedWalkError("a walk has at least one vertex")
        d = len(verts[0])
        if d < 2:
            raise MalformedWalkError("walks live in dimension d >= 2")
        if any(len(p) != d for p in verts):
            raise MalformedWalkError("mixed dimensions in vertex sequence")
        if any(verts[0]):
            raise MalformedWalkError("walk must start at the origin")
        if not is_self_avoiding(verts):
            raise MalformedWalkError("walk is not self-avoiding")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "occupied", frozenset(verts))

    @classmethod
    def from_steps(cls, steps: Iterable[Sequence[int]], d: int | None = None) -> "Walk":
        steps = [tuple(s) for s in steps]
        if d is None:
            if not steps:
                raise MalformedWalkError("dimension needed for an empty walk")
            d = len(steps[0])
        pos = (0,) * d
        verts = [pos]
        for s in steps:
            pos = tuple(a + b for a, b in zip(pos, s))
            verts.append(pos)
        return cls(tuple(verts))

    @property
    def n(self) -> int:
        return len(self.vertices) - 1

    @property
    def d(self) -> int:
        return len(self.vertices[0])

    def __len__(self):
        return self.n

    def __contains__(self, point) -> bool:
        return tuple(point) in self.occupied


@dataclass(frozen=True)
class WalkFeatures:
    positive: bool
    visits: int
    height: int
    loop: bool
    tail: bool
    unfolded_x: bool


def is_unfolded(xs: Sequence[int]) -> bool:
    """``0 <= x_i < x_n`` for the interior vertices ``1 <= i <= n-1``.

    Vacuously true for walks of at most one step.
    """
    n = len(xs) - 1
    return all(0 <= xs[i] < xs[n] for i in range(1, n))


def classify(walk: Walk) -> WalkFeatures:
    zs = [p[-1] for p in walk.vertices]
    positive = min(zs) >= 0
    visits = sum(1 for z in zs[1:] if z == 0)
    height = zs[-1]
    return WalkFeatures(
        positive=positive,
        visits=visits,
        height=height,
        loop=positive and height == 0,
        tail=positive and visits == 0,
        unfolded_x=is_unfolded([p[0] for p in walk.vertices]),
    )


def reroot_reversed(walk: Walk) -> Walk:
    """The walk traversed backwards, translated so its old endpoint is the origin."""
    end = walk.vertices[-1]
    return Walk(tuple(tuple(a - b for a, b in zip(p, end)) for p in reversed(walk.vertices)))
