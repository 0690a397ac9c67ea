import math

import numpy as np
import pytest

from pulledsaw.phase import (
    BracketError,
    Phase,
    boundary_curve,
    boundary_point,
    classify_phase,
    estimate_critical,
    force_curve,
)

E3 = math.exp(3.0)
A_GRID = (4, 6, 8, 10, 15, 20)


@pytest.mark.parametrize("a,y,phase", [(1.0, 1.0, Phase.FREE), (E3, 1.0, Phase.ADSORBED),
                                       (1.0, E3, Phase.BALLISTIC), (0.5, 0.5, Phase.FREE)])
def test_classify_examples(d2_limits, a, y, phase):
    call = classify_phase(a, y, d2_limits)
    assert call.phase is phase and not call.indeterminate


def test_classify_near_boundary_compares_free_energies(d2_limits):
    p = boundary_point(10.0, d2_limits)
    above = classify_phase(10.0, p.y * 2, d2_limits)
    below = classify_phase(10.0, p.y / 2, d2_limits)
    assert above.phase is Phase.BALLISTIC and below.phase is Phase.ADSORBED


def _planted(center):
    # peak of -(u - log(center + 1/n))^2 sits at exactly center + 1/n
    return lambda n, u: -(u - math.log(center + 1.0 / n)) ** 2


def test_planted_peak_is_recovered():
    est = estimate_critical("a", ns=[8, 10, 12, 14, 16], variance_fn=_planted(2.0))
    assert est.value == pytest.approx(2.0, abs=0.01)
    assert est.half_width == pytest.approx(1 / 14 - 1 / 16, rel=1e-3)
    value, hw = est
    assert (value, hw) == (est.value, est.half_width)


def test_peak_on_grid_edge_raises():
    with pytest.raises(BracketError) as info:
        estimate_critical("a", ns=[8, 10], variance_fn=_planted(100.0))
    assert info.value.diagnostics["n"] == 8


def test_critical_estimate_needs_inputs(d2_positive):
    with pytest.raises(ValueError):
        estimate_critical("a")
    with pytest.raises(ValueError):
        estimate_critical("z", d2_positive)


def test_critical_points_two_dimensions(d2_positive):
    a_c = estimate_critical("a", d2_positive)
    y_c = estimate_critical("y", d2_positive)
    # adsorption sits above the free point and below the first boundary sample
    assert 1.5 < a_c.value < 3.0 and a_c.half_width < 0.1
    assert 1.0 <= y_c.value + y_c.half_width and y_c.value < 1.1
    peaks = list(a_c.peaks.values())
    assert all(p >= q for p, q in zip(peaks, peaks[1:]))


@pytest.fixture(scope="module")
def d2_diagram(d2_limits):
    return boundary_curve(A_GRID, d2_limits, critical=False)


def test_boundary_brackets_and_monotone(d2_diagram):
    assert not d2_diagram.skipped
    assert d2_diagram.monotone and d2_diagram.bounds
    for p in d2_diagram.boundary:
        assert p.in_bounds and p.in_kappa_bracket and p.slope > 0
    assert 0.8 <= d2_diagram.asymptote_ratio <= 1.2 and d2_diagram.asymptote


def test_boundary_root_solves_equation(d2_limits, d2_diagram):
    for p in d2_diagram.boundary:
        gap = d2_limits.lam_log(p.log_y).limit - p.kappa.limit
        assert abs(gap) <= p.slope * 1e-4


def test_boundary_stable_under_tolerance_refinement(d2_limits, d2_diagram):
    fine = boundary_curve(A_GRID, d2_limits, critical=False, tol=1e-7)
    for p, q in zip(d2_diagram.boundary, fine.boundary):
        assert abs(p.log_y - q.log_y) <= 1e-4


def test_boundary_rows(d2_diagram):
    rows = d2_diagram.rows()
    assert [r[0] for r in rows] == list(A_GRID)
    assert all(r[1] == pytest.approx(math.exp(r[2])) for r in rows)


def test_unbracketed_root_is_skipped(d2_limits):
    # a below adsorption: kappa(a) = log mu and lambda(1) already matches
    diag = boundary_curve([0.5, 8.0], d2_limits, critical=False)
    assert [s[0] for s in diag.skipped] == [0.5]
    assert not diag.monotone
    with pytest.raises(BracketError):
        boundary_point(8.0, d2_limits, max_log_y=0.5)


def test_force_curve_two_dimensions(d2_limits):
    fc = force_curve(-1.0, (0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0), d2_limits)
    assert abs(fc.slope_at_low_T) <= 0.05
    # zero-temperature limit: force equals the visit energy magnitude
    assert fc.forces[0] == pytest.approx(1.0, abs=0.02)
    assert np.all(np.diff(fc.temperatures) > 0)


def test_force_curve_threshold_and_validation(d2_limits):
    fc = force_curve(-1.0, (0.2, 0.5, 2.0), d2_limits, a_threshold=2.3)
    assert [s[0] for s in fc.skipped] == [2.0]
    with pytest.raises(ValueError):
        force_curve(0.5, (0.2,), d2_limits)
    with pytest.raises(ValueError):
        force_curve(-1.0, (0.0, 0.2), d2_limits)
    one = force_curve(-1.0, (0.2,), d2_limits)
    assert math.isnan(one.slope_at_low_T)
