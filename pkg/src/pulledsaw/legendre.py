"""Grid Legendre transforms, density identification and inequality sweeps.

Exact-level checks compare finite-n partition functions and must hold
for every ``n``; they pass when the log-domain slack is at least
``-EXACT_SLACK``.  Limit-level checks compare extrapolated free energies
and widen their tolerance by the half-widths of every estimate involved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import logsumexp

from pulledsaw.enumeration import CountTable, WalkClass
from pulledsaw.thermo import (
    DEFAULT_LOG_GRID,
    FreeEnergyCurve,
    FreeEnergyLimits,
    Kind,
    WeightPoint,
    log_partition,
    moment_arrays,
)

EXACT_SLACK = 1e-9
DENSITY_STEP = 0.01
TIE_TOL = 1e-12


@dataclass(frozen=True)
class LegendreTable:
    """``log P(alpha) = min_j [f(u_j) - alpha u_j]`` over a log-weight grid ``u``."""

    densities: np.ndarray
    values: np.ndarray
    argmin: np.ndarray
    boundary: np.ndarray
    log_weights: np.ndarray
    free_energy: np.ndarray
    inverse: np.ndarray
    inverse_residuals: np.ndarray

    def is_concave(self, slack: float = 1e-9) -> bool:
        return bool(np.all(concavity_defects(self.densities, self.values) >= -slack))

    @property
    def interior_residuals(self) -> np.ndarray:
        return self.inverse_residuals[1:-1]

    def maximizers(self, log_w: float) -> tuple[float, float]:
        """Smallest and largest density attaining ``sup [log P + alpha u]``."""
        g = self.values + self.densities * log_w
        top = g.max()
        hit = self.densities[g >= top - TIE_TOL * max(1.0, abs(top))]
        return float(hit.min()), float(hit.max())


def concavity_defects(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``f_i`` minus the chord of its neighbours; nonnegative iff concave."""
    if len(x) < 3:
        return np.zeros(0)
    x0, x1, x2 = x[:-2], x[1:-1], x[2:]
    chord = ((x2 - x1) * f[:-2] + (x1 - x0) * f[2:]) / (x2 - x0)
    return f[1:-1] - chord


def default_densities(log_weights: np.ndarray, free_energy: np.ndarray) -> np.ndarray:
    """Uniform 0.01 grid on [0, 1] plus the chord slopes of the curve.

    The chord slopes are the breakpoints of the transform of the piecewise
    linear interpolant, so including them makes the round trip exact at
    every interior grid point.
    """
    base = np.round(np.arange(0.0, 1.0 + 1e-12, DENSITY_STEP), 12)
    slopes = np.diff(free_energy) / np.diff(log_weights)
    slopes = slopes[np.isfinite(slopes) & (slopes >= 0.0) & (slopes <= 1.0)]
    return np.unique(np.concatenate([base, slopes]))


def legendre_transform(log_weights, free_energy, densities=None) -> LegendreTable:
    u = np.asarray(log_weights, dtype=float)
    f = np.asarray(free_energy, dtype=float)
    if u.shape != f.shape or u.ndim != 1 or len(u) < 3:
        raise ValueError("need matching 1-d grids with at least three points")
    if np.any(np.diff(u) <= 0):
        raise ValueError("log-weight grid must be strictly increasing")
    alpha = default_densities(u, f) if densities is None else np.asarray(densities, dtype=float)
    g = f[None, :] - alpha[:, None] * u[None, :]
    values = g.min(axis=1)
    argmin = g.argmin(axis=1)
    tol = TIE_TOL * np.maximum(1.0, np.abs(values))
    attained = g <= (values + tol)[:, None]
    interior = attained[:, 1:-1].any(axis=1)
    boundary = ~interior
    inverse = (values[:, None] + alpha[:, None] * u[None, :]).max(axis=0)
    return LegendreTable(alpha, values, argmin, boundary, u, f, inverse, np.abs(f - inverse))


def transform_curve(curve: FreeEnergyCurve, n: int | None = None, densities=None) -> LegendreTable:
    """Transform a one-parameter curve at length ``n`` (or its limit estimate)."""
    f = curve.limit if n is None else curve.at(n)
    return legendre_transform(curve.axis_log_weights, f, densities)


# -- density identification ------------------------------------------------

@dataclass(frozen=True)
class DensityReport:
    n: int
    which: str
    w: WeightPoint
    mean_density: float     # <v>_n / n
    floor_density: float    # floor(<v>_n) / n
    alpha_minus: float
    alpha_plus: float
    alpha_star: float
    gap: float              # |<v>_n/n - alpha_star|
    floor_gap: float        # |floor(<v>_n)/n - alpha_star|
    mean_gap: float         # distance of <v>_n/n from [alpha_minus, alpha_plus]
    e_minus: float
    e_plus: float


def density_consistency(table: CountTable, w: WeightPoint, n: int, which: str = "visits",
                        kind=None, step: float = 0.1, half_span: int = 20) -> DensityReport:
    """Compare the finite-n visit (or height) density with the maximiser of
    the finite-n inverse transform at ``w``.

    By default visits are measured on loops and height on tails.
    """
    if which not in ("visits", "height"):
        raise ValueError("which must be 'visits' or 'height'")
    if kind is None:
        kind = Kind.L if which == "visits" else Kind.T
    on_a = which == "visits"
    u0 = w.log_a if on_a else w.log_y
    u = u0 + step * np.arange(-half_span, half_span + 1)
    if on_a:
        f = log_partition(table, n, kind, u, w.log_y) / n
        mean, _ = moment_arrays(table, n, which, kind, u0, w.log_y)
    else:
        f = log_partition(table, n, kind, w.log_a, u) / n
        mean, _ = moment_arrays(table, n, which, kind, w.log_a, u0)
    lt = legendre_transform(u, f)
    lo, hi = lt.maximizers(u0)
    star = 0.5 * (lo + hi)
    mean_density = float(mean) / n
    floor_density = math.floor(float(mean) + 1e-12) / n
    mean_gap = max(0.0, lo - mean_density, mean_density - hi)
    c = half_span
    e_minus = (f[c] - f[c - 1]) / step
    e_plus = (f[c + 1] - f[c]) / step
    return DensityReport(n, which, w, mean_density, floor_density, lo, hi, star,
                         abs(mean_density - star), abs(floor_density - star), mean_gap, float(e_minus), float(e_plus))


# -- inequality sweeps ------------------------------------------------------

@dataclass(frozen=True)
class InequalityReport:
    """Instances of ``lhs <= rhs`` in the log domain; ``slack = rhs - lhs``."""

    name: str
    level: str  # "exact" or "limit"
    n: np.ndarray
    log_a: np.ndarray
    log_y: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    slack: np.ndarray
    tolerance: np.ndarray = field(default=None)

    @property
    def passed(self) -> bool:
        tol = EXACT_SLACK if self.tolerance is None else self.tolerance
        return bool(np.all(self.slack >= -tol))

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slack)) if self.slack.size else math.inf

    def instances(self) -> Iterator[tuple]:
        for row in zip(self.n, self.log_a, self.log_y, self.lhs, self.rhs, self.slack):
            yield tuple(float(x) for x in row)

    def summary(self) -> dict:
        return {"name": self.name, "level": self.level, "instances": int(self.slack.size),
                "min_slack": self.min_slack, "pass": self.passed}


def _slack(lhs, rhs):
    with np.errstate(invalid="ignore"):
        s = rhs - lhs
    # -inf <= -inf holds trivially
    return np.where(np.isneginf(lhs), np.inf, s)


def _report(name, rows, level="exact", tolerance=None):
    n, la, ly, lhs, rhs = (np.concatenate([np.ravel(r[i]) for r in rows]) for i in range(5))
    tol = None if tolerance is None else np.concatenate([np.ravel(t) for t in tolerance])
    return InequalityReport(name, level, n, la, ly, lhs, rhs, _slack(lhs, rhs), tol)


def _strict_unfolded_plane(unfolded: CountTable, m: int) -> int:
    """Plane walks of length m with every vertex left of the endpoint."""
    if m <= 1:
        return 1
    return unfolded[m].get((m, 0), 0)


def _strict_unfolded_arch(unfolded: CountTable, m: int) -> int:
    """Unfolded loops of length m whose only visit is the endpoint, x_m > 0."""
    if m == 0:
        return 0
    if m == 1:
        return 1
    return unfolded[m].get((1, 0), 0)


def inequality_report(positive: CountTable, unfolded: CountTable, plane: CountTable,
                      log_a=DEFAULT_LOG_GRID, log_y=DEFAULT_LOG_GRID,
                      n_max: int | None = None) -> list[InequalityReport]:
    """Exact finite-n inequalities for every ``1 <= n <= n_max`` and grid point.

    (i)   max[L'_n(a), T'_n(y)] <= C_n(a, y)        (primes: unfolded)
    (ii)  C_n(a, y) <= sum_m L_m(a) T_{n-m}(y)
    (iii) c^{(d-1)}_n a^n <= L_n(a)
    (iv)  y^n <= T_n(y)
    (v)   c'^{(d-1)}_{v*} l'_{n-v*}(1) a^{v*+1} <= L_n(a),  v* = floor(<v>_n)
    """
    for t, cls in ((positive, WalkClass.POSITIVE), (unfolded, WalkClass.POSITIVE_UNFOLDED),
                   (plane, WalkClass.PLANE)):
        if t is None:
            raise ValueError(f"missing {cls} table")
        if t.walk_class is not cls:
            raise ValueError(f"expected a {cls} table, got {t.walk_class}")
    d = positive.dimension
    if unfolded.dimension != d or plane.dimension != d - 1:
        raise ValueError("tables must be for d (positive, unfolded) and d - 1 (plane)")
    if n_max is None:
        n_max = min(positive.n_max, unfolded.n_max, plane.n_max)
    if n_max > min(positive.n_max, unfolded.n_max, plane.n_max):
        raise ValueError("n_max exceeds an input table")
    la = np.asarray(log_a, dtype=float)
    ly = np.asarray(log_y, dtype=float)
    A, Y = np.meshgrid(la, ly, indexing="ij")

    logL = np.array([log_partition(positive, m, Kind.L, la) for m in range(n_max + 1)])
    logT = np.array([log_partition(positive, m, Kind.T, 0.0, ly) for m in range(n_max + 1)])
    rows = {k: [] for k in ("i", "ii", "iii", "iv", "v")}
    for n in range(1, n_max + 1):
        N = np.full(A.shape, n, dtype=float)
        logC = log_partition(positive, n, Kind.C, A, Y)
        logLu = log_partition(unfolded, n, Kind.L, la)
        logTu = log_partition(unfolded, n, Kind.T, 0.0, ly)
        lhs = np.maximum(logLu[:, None], logTu[None, :])
        rows["i"].append((N, A, Y, lhs, logC))
        conv = logsumexp(np.stack([logL[m][:, None] + logT[n - m][None, :] for m in range(n + 1)]), axis=0)
        rows["ii"].append((N, A, Y, logC, conv))

        Na = np.full(la.shape, n, dtype=float)
        nan_a = np.full(la.shape, np.nan)
        plane_n = plane.total(n)
        rows["iii"].append((Na, la, nan_a, math.log(plane_n) + n * la, logL[n]))
        rows["iv"].append((np.full(ly.shape, n, dtype=float), np.full(ly.shape, np.nan), ly,
                           n * ly, logT[n]))

        mean_v, _ = moment_arrays(positive, n, "visits", Kind.L, la)
        lhs5 = np.empty_like(la)
        for j, (u, mv) in enumerate(zip(la, mean_v)):
            vs = min(n, math.floor(mv + 1e-12))
            c_pl = _strict_unfolded_plane(unfolded, vs)
            c_ar = _strict_unfolded_arch(unfolded, n - vs)
            lhs5[j] = (math.log(c_pl) + math.log(c_ar) + (vs + 1) * u) if c_pl and c_ar else -math.inf
        rows["v"].append((Na, la, nan_a, lhs5, logL[n]))

    names = {
        "i": "unfolded-lower-bound",
        "ii": "loop-tail-convolution-upper-bound",
        "iii": "plane-walk-loop-bound",
        "iv": "straight-rod-tail-bound",
        "v": "plane-walk-arch-concatenation-bound",
    }
    return [_report(names[k], rows[k]) for k in ("i", "ii", "iii", "iv", "v")]


def convexity_report(positive: CountTable, log_a=DEFAULT_LOG_GRID, log_y=DEFAULT_LOG_GRID,
                     n_max: int | None = None) -> InequalityReport:
    """Midpoint convexity of ``(1/n) log C_n(e^u, e^w)`` over all grid triples.

    On a uniform grid, every midpoint triple along a line through the grid
    is a (p, q, 2q - p) triple of indices; all directions with index steps
    in [-K, K] are checked.
    """
    if n_max is None:
        n_max = positive.n_max
    la = np.asarray(log_a, dtype=float)
    ly = np.asarray(log_y, dtype=float)
    A, Y = np.meshgrid(la, ly, indexing="ij")
    rows = []
    na, ny = A.shape
    for n in range(1, n_max + 1):
        F = log_partition(positive, n, Kind.C, A, Y) / n
        for di in range(0, na):
            for dj in range(-(ny - 1), ny):
                if di == 0 and dj <= 0:
                    continue
                # endpoints (i - di, j - dj) and (i + di, j + dj), midpoint (i, j)
                i0, i1 = di, na - di
                j0, j1 = max(dj, -dj), ny - max(dj, -dj)
                if i0 >= i1 or j0 >= j1:
                    continue
                mid = F[i0:i1, j0:j1]
                lo = F[i0 - di:i1 - di, j0 - dj:j1 - dj]
                hi = F[i0 + di:i1 + di, j0 + dj:j1 + dj]
                rows.append((np.full(mid.shape, n, dtype=float), A[i0:i1, j0:j1], Y[i0:i1, j0:j1],
                             mid, 0.5 * (lo + hi)))
    return _report("midpoint-convexity", rows)


# -- limit-level checks -----------------------------------------------------

def limit_inequality_report(limits: FreeEnergyLimits, log_a=DEFAULT_LOG_GRID,
                            log_y=DEFAULT_LOG_GRID) -> list[InequalityReport]:
    """Asymptotic bounds on extrapolated free energies, tolerance-widened."""
    mu, hmu = limits.log_mu_d
    mu1, hmu1 = limits.log_mu_dm1
    la = np.asarray(log_a, dtype=float)
    ly = np.asarray(log_y, dtype=float)
    kap = np.array([limits.kappa_log(u) for u in la])
    lam = np.array([limits.lam_log(w) for w in ly])
    nan_a, nan_y = np.full(la.shape, np.nan), np.full(ly.shape, np.nan)
    inf_a, inf_y = np.full(la.shape, np.inf), np.full(ly.shape, np.inf)
    reps = []
    lower_k = np.maximum(mu, mu1 + la)
    tol_k = kap[:, 1] + hmu + hmu1 + EXACT_SLACK
    reps.append(_report("kappa-lower-bound", [(inf_a, la, nan_a, lower_k, kap[:, 0])], "limit", [tol_k]))
    reps.append(_report("kappa-upper-bound", [(inf_a, la, nan_a, kap[:, 0], mu + np.maximum(0.0, la))],
                        "limit", [kap[:, 1] + hmu + EXACT_SLACK]))
    tol_l = lam[:, 1] + hmu + EXACT_SLACK
    reps.append(_report("lambda-lower-bound", [(inf_y, nan_y, ly, np.maximum(mu, ly), lam[:, 0])],
                        "limit", [tol_l]))
    reps.append(_report("lambda-upper-bound", [(inf_y, nan_y, ly, lam[:, 0], mu + np.maximum(0.0, ly))],
                        "limit", [tol_l]))
    return reps


@dataclass(frozen=True)
class AsymptoteReport:
    a_max: float
    y_max: float
    kappa_ratio: float
    kappa_tolerance: float
    lambda_ratio: float
    lambda_tolerance: float
    ratio_scan: tuple          # (a, ratio, widening) for a > mu_d / mu_{d-1}
    monotone: bool

    @property
    def kappa_pass(self) -> bool:
        return abs(self.kappa_ratio - 1.0) <= self.kappa_tolerance

    @property
    def lambda_pass(self) -> bool:
        return abs(self.lambda_ratio - 1.0) <= self.lambda_tolerance

    @property
    def passed(self) -> bool:
        return self.kappa_pass and self.lambda_pass and self.monotone


def asymptote_check(limits: FreeEnergyLimits, a_max: float = math.e ** 3, y_max: float = math.e ** 3,
                    base_tolerance: float = 0.1, scan_step: float = 0.1,
                    scan_offset: float = 0.2) -> AsymptoteReport:
    """Large-weight ratios of the extrapolated free energies.

    ``(kappa(a) - log mu_{d-1}) / log a`` and ``lambda(y) / log y`` should
    approach 1.  The scan checks that
    ``(kappa(a) - log mu_d) / (log a - log(mu_d / mu_{d-1}))`` does not
    increase for ``a`` beyond ``mu_d / mu_{d-1}`` (offset by
    ``scan_offset`` in log a, where the denominator is not tiny).
    """
    mu, hmu = limits.log_mu_d
    mu1, hmu1 = limits.log_mu_dm1
    k, hk = limits.kappa(a_max)
    l, hl = limits.lam(y_max)
    la, ly = math.log(a_max), math.log(y_max)
    kr = (k - mu1) / la
    lr = l / ly
    shift = mu - mu1
    start = shift + scan_offset + hmu + hmu1
    us = np.arange(start, la + 1e-9, scan_step)
    scan = []
    for u in us:
        kv, kh = limits.kappa_log(u)
        den = u - shift
        scan.append((math.exp(u), (kv - mu) / den, (kh + hmu + (hmu + hmu1) * abs(kv - mu) / den) / den))
    monotone = all(b[1] <= a[1] + a[2] + b[2] + EXACT_SLACK for a, b in zip(scan, scan[1:]))
    return AsymptoteReport(a_max, y_max, kr, base_tolerance + (hk + hmu1) / la,
                           lr, base_tolerance + hl / ly, tuple(scan), monotone)


def max_identity_report(limits: FreeEnergyLimits, log_a=DEFAULT_LOG_GRID,
                        log_y=DEFAULT_LOG_GRID) -> InequalityReport:
    """Two-sided check of ``kappa(a, y) = max[kappa(a), lambda(y)]`` on
    extrapolated values.  ``slack`` is minus the absolute discrepancy and
    ``tolerance`` the summed half-widths; near the phase boundary the
    finite-n sequences mix both phases and the fit is expected to lag.
    """
    la = np.asarray(log_a, dtype=float)
    ly = np.asarray(log_y, dtype=float)
    A, Y = np.meshgrid(la, ly, indexing="ij")
    lhs = np.empty(A.shape)
    rhs = np.empty(A.shape)
    tol = np.empty(A.shape)
    for i, u in enumerate(la):
        k = limits.kappa_log(u)
        for j, w in enumerate(ly):
            l = limits.lam_log(w)
            both = limits.kappa_ay_log(u, w)
            top = k if k.limit >= l.limit else l
            lhs[i, j] = both.limit
            rhs[i, j] = top.limit
            tol[i, j] = both.half_width + top.half_width + EXACT_SLACK
    slack = -np.abs(lhs - rhs)
    inf = np.full(A.shape, np.inf)
    return InequalityReport("two-phase-max-identity", "limit", inf.ravel(), A.ravel(), Y.ravel(),
                            lhs.ravel(), rhs.ravel(), slack.ravel(), tol.ravel())
