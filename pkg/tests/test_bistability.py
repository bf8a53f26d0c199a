import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringlat.adiabatic import DriveValues, rhs_complex, rhs_eliminated, rhs_eliminated_slope
from ringlat.bistability import (bistability_range, continuation_scan, hysteresis_sweep,
                                 steady_states, threshold_scan)
from ringlat.localization import knobs_from_eta
from ringlat.params import ScaledParams


def setup(chi, a0=None):
    sp = ScaledParams(UN=0.0, eta_ax=0.5, eta_rad=0.3, a0_mod=math.sqrt(chi) if a0 is None else a0)
    return sp, knobs_from_eta(sp, 1 - chi)


def dense_roots(UN, chi, knobs, step=1e-4):
    phi = np.arange(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6, step)
    F = rhs_eliminated(phi, knobs, 1 - chi, chi, UN)
    idx = np.flatnonzero(F[:-1] * F[1:] < 0)
    return 0.5 * (phi[idx] + phi[idx + 1])


def test_three_roots_inside_window():
    """Dense sign-change scan as the oracle for root positions."""
    sp, knobs = setup(0.48)
    states = steady_states(3.5, 0.48, knobs)
    oracle = dense_roots(3.5, 0.48, knobs)
    assert len(states) == len(oracle) == 3
    assert [s.phi for s in states] == pytest.approx(list(oracle), abs=1e-4)
    assert [s.stable for s in states] == [True, False, True]


def test_slope_matches_finite_difference():
    _, knobs = setup(0.45)
    for phi in np.linspace(-1.4, 1.4, 15):
        h = 1e-6
        fd = (rhs_eliminated(phi + h, knobs, 0.55, 0.45, 2.7)
              - rhs_eliminated(phi - h, knobs, 0.55, 0.45, 2.7)) / (2 * h)
        assert rhs_eliminated_slope(phi, knobs, 0.55, 0.45, 2.7) == pytest.approx(fd, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(chi=st.floats(0.3, 0.7), UN=st.floats(0.0, 6.0))
def test_roots_are_fixed_points_of_complex_equation(chi, UN):
    sp, knobs = setup(chi)
    sp = sp.with_(UN=UN)
    drive = DriveValues(chi, UN)
    for s in steady_states(UN, chi, knobs):
        a = s.a_mod * complex(math.cos(s.phi), math.sin(s.phi))
        assert abs(rhs_complex(a, drive, sp)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(chi=st.floats(0.3, 0.7), UN=st.floats(0.0, 6.0))
def test_stability_matches_complex_jacobian(chi, UN):
    sp, knobs = setup(chi)
    sp = sp.with_(UN=UN)
    drive = DriveValues(chi, UN)

    def f(v):
        d = rhs_complex(complex(v[0], v[1]), drive, sp)
        return np.array([d.real, d.imag])

    for s in steady_states(UN, chi, knobs):
        slope = rhs_eliminated_slope(s.phi, knobs, 1 - chi, chi, UN)
        if abs(slope) < 1e-3:
            continue  # too close to a fold to classify numerically
        x = np.array([s.a_mod * math.cos(s.phi), s.a_mod * math.sin(s.phi)])
        J = np.zeros((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = 1e-7
            J[:, j] = (f(x + e) - f(x - e)) / 2e-7
        assert (np.max(np.linalg.eigvals(J).real) < 0) == s.stable


def test_no_atoms_single_state():
    _, knobs = setup(0.4)
    (s,) = steady_states(0.0, 0.4, knobs)
    assert s.phi == pytest.approx(0.0, abs=1e-9)
    assert s.intensity == pytest.approx(0.4)


def test_invalid_split():
    _, knobs = setup(0.4)
    with pytest.raises(ValueError):
        steady_states(1.0, 1.0, knobs)


def test_continuation_folds_and_outputs(tmp_path):
    _, knobs = setup(0.48)
    d = continuation_scan((0.0, 6.0), 121, 0.48, knobs)
    assert len(d.folds) == 2
    lo, hi = sorted(u for u, _ in d.folds)
    # fold UN marks where the root count changes
    assert len(steady_states(lo - 1e-3, 0.48, knobs)) == 1
    assert len(steady_states(lo + 1e-3, 0.48, knobs)) == 3
    assert len(steady_states(hi + 1e-3, 0.48, knobs)) == 1
    d.to_csv(tmp_path / "b.csv")
    d.to_json(tmp_path / "f.json")
    summary = json.load(open(tmp_path / "f.json"))
    assert summary["bistability_range"]["low"] == pytest.approx(lo)
    ids = {b for row in d.branch_ids for b in row}
    assert len(ids) >= 2


def test_monostable_and_unbounded():
    _, k38 = setup(0.38)
    assert bistability_range(0.38, k38, 6.0) is None
    _, k50 = setup(0.50)
    lo, hi = bistability_range(0.50, k50, 20.0)
    assert math.isinf(hi) and lo < 20


def test_hysteresis_loop():
    _, knobs = setup(0.48)
    grid = np.linspace(2.0, 5.0, 121)
    up = hysteresis_sweep("up", grid, 0.48, knobs)
    down = hysteresis_sweep("down", grid[::-1], 0.48, knobs)
    up_jump = next(p.UN for p in up if p.jumped)
    down_jump = next(p.UN for p in down if p.jumped)
    assert up_jump > down_jump
    assert up[0].intensity > up[-1].intensity  # bright at low UN, dim at high UN
    with pytest.raises(ValueError):
        hysteresis_sweep("up", grid[::-1], 0.48, knobs)


def test_threshold_scan():
    th, ranges = threshold_scan([0.40, 0.44, 0.46, 0.48], lambda c: setup(c)[1], 6.0, 121)
    assert th == 0.46
    assert ranges[0.40] is None and ranges[0.48] is not None
