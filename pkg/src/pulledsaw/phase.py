"""Phase classification, critical points, the adsorbed/ballistic boundary
and the critical force as a function of temperature.

Boltzmann's constant is 1 and the visit energy ``epsilon`` is measured in
the same units as ``T``, so ``a = exp(-epsilon / T)`` and the force follows
from ``y = exp(f / T)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from pulledsaw.enumeration import CountTable
from pulledsaw.thermo import Extrapolation, FreeEnergyLimits, Kind, moment_arrays

BISECTION_TOL = 1e-4
PEAK_GRID = np.round(np.arange(-1.0, 3.0 + 1e-9, 0.01), 10)


class Phase(str, enum.Enum):
    FREE = "free"
    ADSORBED = "adsorbed"
    BALLISTIC = "ballistic"


class BracketError(ValueError):
    """A peak or root was not bracketed inside the search window."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class PhaseCall:
    phase: Phase
    indeterminate: bool
    kappa: Extrapolation
    lam: Extrapolation
    log_mu: Extrapolation


def classify_phase(a: float, y: float, limits: FreeEnergyLimits) -> PhaseCall:
    """Free when both free energies match ``log mu_d`` within their joint
    half-widths, otherwise the larger of ``kappa(a)`` and ``lambda(y)``
    wins; overlapping half-widths set the indeterminate flag."""
    k = limits.kappa(a)
    l = limits.lam(y)
    mu = limits.log_mu_d
    free_k = abs(k.limit - mu.limit) <= k.half_width + mu.half_width
    free_l = abs(l.limit - mu.limit) <= l.half_width + mu.half_width
    if free_k and free_l:
        return PhaseCall(Phase.FREE, False, k, l, mu)
    tie = abs(k.limit - l.limit) <= k.half_width + l.half_width
    phase = Phase.ADSORBED if k.limit > l.limit else Phase.BALLISTIC
    # one side clearly above log mu while the other is flat: not a tie
    if tie and (free_k or free_l):
        tie = False
        phase = Phase.BALLISTIC if free_k else Phase.ADSORBED
    return PhaseCall(phase, tie, k, l, mu)


# -- critical points --------------------------------------------------------

@dataclass(frozen=True)
class CriticalEstimate:
    axis: str
    value: float
    half_width: float
    peaks: dict = field(default_factory=dict)  # n -> peak weight

    def __iter__(self):
        yield self.value
        yield self.half_width


VarianceFn = Callable[[int, np.ndarray], np.ndarray]


def table_variance(table: CountTable, axis: str) -> VarianceFn:
    """Visit variance along ``a`` (y = 1) or height variance along ``y`` (a = 1)."""
    if axis == "a":
        return lambda n, u: moment_arrays(table, n, "visits", Kind.C, u, 0.0)[1]
    if axis == "y":
        return lambda n, u: moment_arrays(table, n, "height", Kind.C, 0.0, u)[1]
    raise ValueError("axis must be 'a' or 'y'")


def _peak(u: np.ndarray, var: np.ndarray, n) -> float:
    j = int(np.argmax(var))
    if j == 0 or j == len(u) - 1:
        raise BracketError(f"variance peak at grid edge for n={n}", n=n, log_weight=float(u[j]),
                           grid=(float(u[0]), float(u[-1])))
    y0, y1, y2 = var[j - 1], var[j], var[j + 1]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den < 0 else 0.0
    return float(u[j] + shift * (u[j + 1] - u[j]))


def estimate_critical(axis: str, table: CountTable | None = None, ns: Sequence[int] | None = None,
                      log_grid=PEAK_GRID, variance_fn: VarianceFn | None = None) -> CriticalEstimate:
    """Critical weight from the per-n variance peak, extrapolated in 1/n.

    The half-width is the drift of the peak between the two largest ``n``.
    """
    if variance_fn is None:
        if table is None:
            raise ValueError("need a table or a variance function")
        variance_fn = table_variance(table, axis)
    if ns is None:
        if table is None:
            raise ValueError("need the list of lengths")
        top = table.n_max
        ns = [n for n in range(max(4, top // 2), top + 1, 2)] or [top]
    ns = sorted(ns)
    u = np.asarray(log_grid, dtype=float)
    peaks = {n: math.exp(_peak(u, np.asarray(variance_fn(n, u)), n)) for n in ns}
    if len(ns) == 1:
        return CriticalEstimate(axis, peaks[ns[0]], 0.0, peaks)
    inv = np.array([1.0 / n for n in ns])
    vals = np.array([peaks[n] for n in ns])
    coef = np.polyfit(inv, vals, 1)
    drift = abs(peaks[ns[-1]] - peaks[ns[-2]])
    return CriticalEstimate(axis, float(coef[-1]), drift, peaks)


# -- boundary ---------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryPoint:
    a: float
    y: float
    log_y: float
    half_width: float   # in log y
    kappa: Extrapolation
    lam: Extrapolation
    slope: float        # d lambda / d log y at the root
    lower: float        # max(1, a mu_{d-1} / mu_d), widened, in log y
    upper: float        # log(a mu_d), widened
    kappa_upper: float  # kappa(a), widened

    @property
    def in_bounds(self) -> bool:
        return self.lower <= self.log_y <= self.upper

    @property
    def in_kappa_bracket(self) -> bool:
        tol = self.half_width + self.kappa.half_width + self.lam.half_width
        return -tol <= self.log_y <= self.kappa_upper


def boundary_point(a: float, limits: FreeEnergyLimits, tol: float = BISECTION_TOL,
                   max_log_y: float | None = None) -> BoundaryPoint:
    """Solve ``lambda(y) = kappa(a)`` for ``log y`` by bisection."""
    k = limits.kappa(a)
    mu, hmu = limits.log_mu_d
    la = math.log(a)
    lo = 0.0
    hi = la + mu + 1.0 if max_log_y is None else max_log_y

    def g(w):
        return limits.lam_log(w).limit - k.limit

    glo, ghi = g(lo), g(hi)
    if not (glo < 0 < ghi):
        raise BracketError(f"no sign change of lambda(y) - kappa({a:g}) on log y in [{lo:g}, {hi:g}]",
                           a=a, g_lo=glo, g_hi=ghi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    lam = limits.lam_log(w)
    step = 0.01
    slope = (limits.lam_log(w + step).limit - limits.lam_log(w - step).limit) / (2 * step)
    if slope <= 0:
        raise BracketError(f"lambda(y) not increasing at the root for a={a:g}", a=a, slope=slope)
    hw = (k.half_width + lam.half_width) / slope
    try:
        mu1, hmu1 = limits.log_mu_dm1
    except ValueError:
        mu1, hmu1 = 0.0, math.inf
    widen = hw + k.half_width + lam.half_width + hmu + hmu1
    lower = max(0.0, la + mu1 - mu) - widen
    upper = la + mu + hw + k.half_width + lam.half_width + hmu
    kappa_upper = k.limit + hw + k.half_width + lam.half_width
    return BoundaryPoint(a, math.exp(w), w, hw, k, lam, slope, lower, upper, kappa_upper)


@dataclass(frozen=True)
class PhaseDiagram:
    a_c: CriticalEstimate | None
    y_c0: CriticalEstimate | None
    boundary: tuple
    monotone: bool
    bounds: bool
    asymptote: bool
    asymptote_ratio: float
    asymptote_tolerance: float
    skipped: tuple = ()

    def rows(self):
        """``(a, y_c, log y_c, half-width)`` tuples in grid order."""
        return [(p.a, p.y, p.log_y, p.half_width) for p in self.boundary]


def boundary_curve(a_grid: Sequence[float], limits: FreeEnergyLimits, *, critical: bool = True,
                   ratio_window: tuple = (0.8, 1.2), tol: float = BISECTION_TOL) -> PhaseDiagram:
    """Boundary samples with monotonicity, bracket and asymptote flags.

    The asymptote ratio is ``log y_c(a) / log(a mu_{d-1})`` at the largest
    ``a``; in two dimensions ``mu_1 = 1`` and the denominator is ``log a``.
    """
    a_grid = sorted(a_grid)
    points, skipped = [], []
    for a in a_grid:
        try:
            points.append(boundary_point(a, limits, tol))
        except BracketError as exc:
            skipped.append((a, str(exc)))
    monotone = all(q.log_y > p.log_y for p, q in zip(points, points[1:])) and len(points) == len(a_grid)
    bounds = all(p.in_bounds and p.in_kappa_bracket for p in points)
    ratio, rtol, asym = math.nan, math.nan, False
    if points:
        last = points[-1]
        mu1, hmu1 = limits.log_mu_dm1
        den = math.log(last.a) + mu1
        ratio = last.log_y / den
        rtol = (last.half_width + hmu1 * abs(ratio)) / den
        asym = ratio_window[0] - rtol <= ratio <= ratio_window[1] + rtol
    a_c = y_c0 = None
    if critical:
        a_c = estimate_critical("a", limits.positive)
        y_c0 = estimate_critical("y", limits.positive)
    return PhaseDiagram(a_c, y_c0, tuple(points), monotone, bounds, asym, ratio, rtol, tuple(skipped))


# -- force versus temperature -----------------------------------------------

@dataclass(frozen=True)
class ForceCurve:
    epsilon: float
    samples: tuple          # (T, f_c, half-width)
    slope_at_low_T: float
    slope_half_width: float
    skipped: tuple = ()     # (T, reason)

    @property
    def temperatures(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def forces(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])


def force_curve(epsilon: float, T_grid: Sequence[float], limits: FreeEnergyLimits,
                a_threshold: float | None = None, tol: float = BISECTION_TOL) -> ForceCurve:
    """``f_c(T) = T log y_c(exp(-epsilon / T))`` on a temperature grid.

    Temperatures whose visit weight does not clear ``a_threshold`` (or whose
    root cannot be bracketed) are skipped with a reason.  The low-T slope is
    the chord over the two smallest retained temperatures.
    """
    if epsilon >= 0:
        raise ValueError("the visit energy must be negative (attractive surface)")
    Ts = sorted(float(t) for t in T_grid)
    if any(t <= 0 for t in Ts):
        raise ValueError("temperatures must be positive")
    samples, skipped = [], []
    for T in Ts:
        a = math.exp(-epsilon / T)
        if a_threshold is not None and a <= a_threshold:
            skipped.append((T, f"a={a:.4g} not above the adsorption threshold {a_threshold:.4g}"))
            continue
        try:
            p = boundary_point(a, limits, tol)
        except BracketError as exc:
            skipped.append((T, str(exc)))
            continue
        samples.append((T, T * p.log_y, T * p.half_width))
    slope, shw = math.nan, math.nan
    if len(samples) >= 2:
        (t1, f1, h1), (t2, f2, h2) = samples[0], samples[1]
        slope = (f2 - f1) / (t2 - t1)
        shw = (h1 + h2) / (t2 - t1)
    return ForceCurve(epsilon, tuple(samples), slope, shw, tuple(skipped))
