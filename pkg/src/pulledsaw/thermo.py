"""Partition functions, finite-n free energies, moments and limit estimates.

All sums are taken in the log domain: a cell ``(v, h)`` with count ``c``
contributes ``log c + v log a + h log y``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from pulledsaw.enumeration import CountTable, WalkClass

DEFAULT_LOG_GRID = np.round(np.arange(-1.0, 3.0 + 1e-9, 0.1), 10)


class Kind(str, enum.Enum):
    """Which partition function: all walks, loops (h = 0) or tails (v = 0)."""

    C = "C"
    L = "L"
    T = "T"


@dataclass(frozen=True)
class WeightPoint:
    a: float
    y: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.y > 0):
            raise ValueError(f"weights must be positive, got a={self.a}, y={self.y}")

    @property
    def log_a(self) -> float:
        return math.log(self.a)

    @property
    def log_y(self) -> float:
        return math.log(self.y)

    @classmethod
    def from_logs(cls, log_a: float, log_y: float = 0.0) -> "WeightPoint":
        return cls(math.exp(log_a), math.exp(log_y))


def _cells(table: CountTable, n: int, kind: Kind):
    if n > table.n_max or n < 0:
        raise ValueError(f"n={n} outside table range 0..{table.n_max}")
    v, h, logc = table.arrays(n)
    kind = Kind(kind)
    if kind is Kind.L:
        keep = h == 0
    elif kind is Kind.T:
        keep = v == 0
    else:
        return v, h, logc
    return v[keep], h[keep], logc[keep]


def log_partition(table: CountTable, n: int, kind=Kind.C, log_a=0.0, log_y=0.0):
    """``log Z_n`` for broadcastable arrays of log-weights.

    An empty restricted slice returns ``-inf`` (no walks of that kind).
    """
    v, h, logc = _cells(table, n, kind)
    la = np.asarray(log_a, dtype=float)
    ly = np.asarray(log_y, dtype=float)
    shape = np.broadcast_shapes(la.shape, ly.shape)
    if v.size == 0:
        return np.full(shape, -np.inf) if shape else -math.inf
    expo = logc + v * la[..., None] + h * ly[..., None]
    out = logsumexp(expo, axis=-1)
    return out if shape else float(out)


def evaluate_partition(table: CountTable, w: WeightPoint, n: int, kind=Kind.C) -> float:
    """``log Z_n(a, y)``; loops ignore ``y`` and tails ignore ``a``."""
    return log_partition(table, n, kind, w.log_a, w.log_y)


def moment_arrays(table: CountTable, n: int, which: str, kind=Kind.C, log_a=0.0, log_y=0.0):
    """Boltzmann mean and variance of ``v`` or ``h`` on broadcast log-weights."""
    v, h, logc = _cells(table, n, kind)
    x = {"visits": v, "height": h}[which]
    la = np.asarray(log_a, dtype=float)[..., None]
    ly = np.asarray(log_y, dtype=float)[..., None]
    expo = logc + v * la + h * ly
    p = np.exp(expo - logsumexp(expo, axis=-1, keepdims=True))
    mean = (p * x).sum(axis=-1)
    var = (p * (x - mean[..., None]) ** 2).sum(axis=-1)
    return mean, np.maximum(var, 0.0)


@dataclass(frozen=True)
class MomentReport:
    which: str
    n: int
    w: WeightPoint
    mean: float
    variance: float


def moment(table: CountTable, w: WeightPoint, n: int, which: str = "visits", kind=Kind.C,
           order: int = 2) -> MomentReport:
    if which not in ("visits", "height"):
        raise ValueError("which must be 'visits' or 'height'")
    if order not in (1, 2):
        raise ValueError("only first and second moments are supported")
    mean, var = moment_arrays(table, n, which, kind, w.log_a, w.log_y)
    return MomentReport(which, n, w, float(mean), float(var) if order == 2 else math.nan)


# -- extrapolation ----------------------------------------------------------

class ExtrapolationError(ValueError):
    pass


class Extrapolation(NamedTuple):
    limit: float
    half_width: float


MIN_POINTS = 6


def _fit_inverse_n(ns: np.ndarray, vals: np.ndarray):
    # shift by a data point so constant sequences are reproduced exactly
    ref = vals[-1]
    A = np.column_stack([np.ones_like(ns), 1.0 / ns])
    coef, *_ = np.linalg.lstsq(A, vals - ref, rcond=None)
    return np.array([coef[0] + ref, coef[1]]), A @ coef + ref


def extrapolate(values, ns: Sequence[int] | None = None) -> Extrapolation:
    """Fit ``value_n = limit + b/n`` on the upper half of the usable ``n``.

    ``values`` is a mapping ``n -> value`` or a sequence (paired with
    ``ns``, default ``1, 2, ...``).  The half-width is the largest fit
    residual in the window plus the shift of the limit when the two
    smallest ``n`` are dropped from the window.
    """
    if isinstance(values, Mapping):
        pairs = sorted(values.items())
    else:
        values = list(values)
        if ns is None:
            ns = range(1, len(values) + 1)
        pairs = sorted(zip(ns, values))
    pairs = [(n, v) for n, v in pairs if n > 0 and math.isfinite(v)]
    if len(pairs) < MIN_POINTS:
        raise ExtrapolationError(f"need at least {MIN_POINTS} usable values, got {len(pairs)}")
    n_arr = np.array([p[0] for p in pairs], dtype=float)
    v_arr = np.array([p[1] for p in pairs], dtype=float)
    lo = len(pairs) // 2
    wn, wv = n_arr[lo:], v_arr[lo:]
    coef, fitted = _fit_inverse_n(wn, wv)
    resid = float(np.max(np.abs(fitted - wv)))
    # window shrunk by two; a three-point window falls back to its last two
    k = 2 if len(wn) - 2 >= 2 else len(wn) - 2
    coef2, _ = _fit_inverse_n(wn[k:], wv[k:])
    return Extrapolation(float(coef[0]), resid + abs(float(coef2[0] - coef[0])))


def ratio_sequence(logz: Mapping[int, float] | Sequence[float]) -> dict[int, float]:
    """``log Z_n - log Z_{n-1}`` for consecutive finite levels."""
    if not isinstance(logz, Mapping):
        logz = dict(enumerate(logz))
    out = {}
    for n in sorted(logz):
        if n >= 1 and (n - 1) in logz:
            a, b = logz[n], logz[n - 1]
            if math.isfinite(a) and math.isfinite(b):
                out[n] = a - b
    return out


def limit_from_logz(logz, method: str = "ratio") -> Extrapolation:
    """Limit of ``(1/n) log Z_n`` from the sequence ``log Z_0, log Z_1, ...``.

    ``ratio`` extrapolates the successive log-ratios, whose leading
    correction is ``1/n``; ``direct`` extrapolates ``(1/n) log Z_n``, which
    also carries a ``log(n)/n`` term the fit cannot absorb.
    """
    if not isinstance(logz, Mapping):
        logz = dict(enumerate(logz))
    if method == "ratio":
        return extrapolate(ratio_sequence(logz))
    if method == "direct":
        return extrapolate({n: z / n for n, z in logz.items() if n > 0})
    raise ValueError(f"unknown method {method!r}")


def growth_constant(table: CountTable, method: str = "ratio") -> Extrapolation:
    """Estimate of ``log mu`` from the level totals of a table."""
    return limit_from_logz([math.log(t) if t > 0 else -math.inf for t in table.totals()], method)


# -- free-energy curves -----------------------------------------------------

@dataclass(frozen=True)
class FreeEnergyCurve:
    """``(1/n) log Z_n`` on a weight grid for ``n = 1..n_max`` plus limits.

    ``values[i, j]`` belongs to ``ns[i]`` and ``grid[j]``.
    """

    kind: Kind
    walk_class: WalkClass
    grid: tuple
    ns: np.ndarray
    values: np.ndarray
    limit: np.ndarray
    half_width: np.ndarray

    def at(self, n: int) -> np.ndarray:
        return self.values[list(self.ns).index(n)]

    @property
    def log_a(self) -> np.ndarray:
        return np.array([w.log_a for w in self.grid])

    @property
    def log_y(self) -> np.ndarray:
        return np.array([w.log_y for w in self.grid])

    @property
    def axis_log_weights(self) -> np.ndarray:
        """Log-weights along the curve's conjugate variable (y for tails, else a)."""
        return self.log_y if self.kind is Kind.T else self.log_a


def free_energy_curve(table: CountTable, grid, kind=Kind.C, method: str = "ratio") -> FreeEnergyCurve:
    kind = Kind(kind)
    if table.n_max < 4:
        raise ValueError("free-energy curves need n_max >= 4")
    grid = tuple(g if isinstance(g, WeightPoint) else WeightPoint(*g) for g in grid)
    la = np.array([w.log_a for w in grid])
    ly = np.array([w.log_y for w in grid])
    logz = np.array([log_partition(table, n, kind, la, ly) for n in range(table.n_max + 1)])
    ns = np.arange(1, table.n_max + 1)
    values = logz[1:] / ns[:, None]
    limit = np.empty(len(grid))
    hw = np.empty(len(grid))
    for j in range(len(grid)):
        e = limit_from_logz(logz[:, j], method)
        limit[j], hw[j] = e
    return FreeEnergyCurve(kind, table.walk_class, grid, ns, values, limit, hw)


def a_grid(log_a=DEFAULT_LOG_GRID, y: float = 1.0):
    return [WeightPoint(math.exp(u), y) for u in log_a]


def y_grid(log_y=DEFAULT_LOG_GRID, a: float = 1.0):
    return [WeightPoint(a, math.exp(w)) for w in log_y]


class FreeEnergyLimits:
    """Extrapolated free energies evaluated at arbitrary weights.

    ``kappa(a)`` uses all positive walks at ``y = 1``, ``lam(y)`` the tails
    and ``kappa_ay`` the full two-parameter sum.  Growth constants come from
    the full-lattice table (``log mu_d``) and the plane table
    (``log mu_{d-1}``).
    """

    def __init__(self, positive: CountTable, full: CountTable | None = None,
                 plane: CountTable | None = None, method: str = "ratio"):
        if positive.walk_class is not WalkClass.POSITIVE:
            raise ValueError("limits need a table of positive walks")
        if plane is not None and plane.dimension != positive.dimension - 1:
            raise ValueError("plane table must have dimension d - 1")
        self.positive = positive
        self.full = full
        self.plane = plane
        self.method = method
        self.d = positive.dimension
        self._cache: dict = {}

    def _limit(self, kind: Kind, log_a: float, log_y: float) -> Extrapolation:
        key = (kind, float(log_a), float(log_y))
        if key not in self._cache:
            logz = [log_partition(self.positive, n, kind, log_a, log_y)
                    for n in range(self.positive.n_max + 1)]
            self._cache[key] = limit_from_logz(logz, self.method)
        return self._cache[key]

    def kappa(self, a: float) -> Extrapolation:
        return self._limit(Kind.C, math.log(a), 0.0)

    def kappa_log(self, log_a: float) -> Extrapolation:
        return self._limit(Kind.C, log_a, 0.0)

    def lam(self, y: float) -> Extrapolation:
        return self._limit(Kind.T, 0.0, math.log(y))

    def lam_log(self, log_y: float) -> Extrapolation:
        return self._limit(Kind.T, 0.0, log_y)

    def kappa_ay(self, a: float, y: float) -> Extrapolation:
        return self._limit(Kind.C, math.log(a), math.log(y))

    def kappa_ay_log(self, log_a: float, log_y: float) -> Extrapolation:
        return self._limit(Kind.C, float(log_a), float(log_y))

    @property
    def log_mu_d(self) -> Extrapolation:
        if "mu_d" not in self._cache:
            src = self.full if self.full is not None else self.positive
            self._cache["mu_d"] = growth_constant(src, self.method)
        return self._cache["mu_d"]

    @property
    def log_mu_dm1(self) -> Extrapolation:
        if self.plane is None:
            raise ValueError("log mu_{d-1} needs a plane table of dimension d - 1")
        if "mu_dm1" not in self._cache:
            self._cache["mu_dm1"] = growth_constant(self.plane, self.method)
        return self._cache["mu_dm1"]
