import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringlat.adiabatic import (FLAG_FLOOR, DriveSchedule, DriveValues, FieldState, StepFunction,
                               atom_number, integrate, rhs_complex, rhs_phase_amplitude, un_schedule)
from ringlat.localization import adiabatic_L
from ringlat.ode import dopri5
from ringlat.params import ScaledParams

SP = ScaledParams(UN=2.0, eta_ax=0.5, eta_rad=0.3, a0_mod=math.sqrt(0.45))


def test_polar_round_trip():
    s = FieldState.from_polar(0.3, -0.7)
    assert s.a_mod == pytest.approx(0.3)
    assert s.phi == pytest.approx(-0.7)


def test_drive_values_validation():
    with pytest.raises(ValueError):
        DriveValues(1.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        DriveValues(0.4, -1.0, 1.0)


@settings(max_examples=1000)
@given(a_mod=st.floats(0.01, 1.5), phi=st.floats(-math.pi, math.pi), chi=st.floats(0.05, 0.95),
       UN=st.floats(0.0, 8.0), f=st.floats(0.2, 2.0))
def test_complex_and_polar_forms_agree(a_mod, phi, chi, UN, f):
    drive = DriveValues(chi, UN, f)
    sp = SP.with_(UN=UN)
    a = a_mod * complex(math.cos(phi), math.sin(phi))
    d = rhs_complex(a, drive, sp)
    d_mod, d_phi = rhs_phase_amplitude(a_mod, phi, drive, sp)
    # project the complex derivative onto radial and tangential directions
    unit = a / a_mod
    assert (d * unit.conjugate()).real == pytest.approx(d_mod, abs=1e-10)
    assert (d * unit.conjugate()).imag / a_mod == pytest.approx(d_phi, abs=1e-10 / a_mod)


def test_i0_factor_scales_both_pumps():
    """With UN = 0 the field relaxes to sqrt(f chi0-)."""
    drive = DriveValues(0.3, 0.0, 0.5)
    a = math.sqrt(0.5 * 0.3)
    assert abs(rhs_complex(a, drive, SP)) < 1e-15


@pytest.mark.parametrize("UN", [0.0, 1.0, 5.0])
def test_symmetric_pumping_fixed_point(UN):
    a0 = math.sqrt(0.5)
    trace = integrate(a0, DriveSchedule(0.5, UN), (0.0, 100.0),
                      SP.with_(UN=UN, a0_mod=a0), output_stride=1.0)
    assert np.max(np.abs(np.abs(trace.a) - a0)) < 1e-8
    assert np.max(np.abs(trace.phi)) < 1e-8


def test_empty_cavity_closed_form():
    a_init = 0.2 - 0.1j
    trace = integrate(a_init, DriveSchedule(0.4, 0.0), (0.0, 10.0), SP, output_stride=0.1,
                      rtol=1e-10, atol=1e-12)
    exact = math.sqrt(0.4) + (a_init - math.sqrt(0.4)) * np.exp(-trace.tau)
    assert np.max(np.abs(trace.a - exact)) < 1e-9


def test_step_function():
    f = StepFunction([1.0, 2.0], [1.0, 0.5, 1.0])
    assert [f(0.5), f(1.0), f(1.5), f(2.0)] == [1.0, 0.5, 0.5, 1.0]
    assert f.breakpoints == (1.0, 2.0)
    with pytest.raises(ValueError):
        StepFunction([1.0], [1.0])
    with pytest.raises(ValueError):
        StepFunction([2.0, 1.0], [1, 2, 3])


def test_schedule_collects_breakpoints():
    sched = DriveSchedule(0.4, 1.0, StepFunction([3.0], [1.0, 0.5]), breakpoints=(7.0,))
    assert sched.all_breakpoints() == [3.0, 7.0]


def test_step_in_pump_is_resolved():
    """UN = 0: after the step the field relaxes to the new sqrt(f chi0-)."""
    sched = DriveSchedule(0.4, 0.0, StepFunction([5.0], [1.0, 0.5]))
    trace = integrate(math.sqrt(0.4), sched, (0.0, 30.0), SP, output_stride=0.5)
    assert trace.chi_minus[trace.tau < 5.0] == pytest.approx(0.4)
    assert trace.chi_minus[-1] == pytest.approx(0.2, rel=1e-8)


def test_floor_flag_set_when_starting_at_zero():
    trace = integrate(0j, DriveSchedule(0.45, 2.0), (0.0, 5.0), SP, output_stride=0.5)
    assert trace.flags[0] == FLAG_FLOOR
    assert trace.stats["floor_events"] >= 1
    assert np.all(np.isfinite(trace.a))


def test_trace_csv(tmp_path):
    trace = integrate(0.3, DriveSchedule(0.45, 2.0), (0.0, 2.0), SP, output_stride=1.0)
    trace.to_csv(tmp_path / "t.csv", gamma_c=2.0)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["tau", "t_seconds", "chi_minus", "phi", "UN", "L", "flags"]
    assert len(rows) == 4
    assert float(rows[2][1]) == pytest.approx(0.5)


def test_trace_L_column_matches_formula():
    trace = integrate(0.3, DriveSchedule(0.45, 2.0), (0.0, 3.0), SP, output_stride=1.0)
    for a, L in zip(trace.a, trace.L):
        assert L == pytest.approx(adiabatic_L(abs(a), SP, 0.55))


@pytest.mark.parametrize("gamma,q", [(0.5, 0.0), (1 / 1.7, 2.0), (0.0, 1.0)])
def test_bernoulli_closed_form(gamma, q):
    t_out = list(np.linspace(0.1, 5.0, 20))
    ys, _ = dopri5(lambda t, n: -gamma * n - q * n * n, 0.0, 3.0, t_out, rtol=1e-12, atol=1e-14)
    assert np.allclose(ys, atom_number(np.array(t_out), 3.0, gamma, q), rtol=1e-8, atol=0)


def test_un_schedule():
    gc = 100.0
    un = un_schedule(2.0, 0.5, 1.0, gc, scale=1.5)
    assert un(0.0) == pytest.approx(3.0)
    assert un(gc * 1.0) == pytest.approx(3.0 * atom_number(1.0, 1.0, 0.5, 1.0))
