import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringlat.localization import (GaussianMoments, LocalizationKnobs, adiabatic_L,
                                  discrete_localization, gaussian_localization, knobs_from_eta,
                                  ltilde, mode_splitting, refractive_indices)
from ringlat.params import PhysicalParams, ScaledParams

RB = PhysicalParams.rb85()


def test_perfect_localization():
    pos = np.zeros((10, 3))
    state = discrete_localization(pos, RB.k, RB.w0)
    assert state.g == pytest.approx(1.0)
    assert state.g_r == pytest.approx(1.0)


def test_uniform_axial_spread_delocalizes():
    z = np.linspace(0, math.pi / RB.k, 400, endpoint=False)
    pos = np.column_stack((np.zeros_like(z), np.zeros_like(z), z))
    assert abs(discrete_localization(pos, RB.k, RB.w0).g) < 1e-12


def test_discrete_matches_gaussian_for_large_sample():
    rng = np.random.default_rng(3)
    m = GaussianMoments(sigma_z=0.3 / RB.k, sigma_r=0.2 * RB.w0, z_cm=0.1 / RB.k)
    n = 400_000
    pos = np.column_stack((rng.normal(0, m.sigma_r, n), rng.normal(0, m.sigma_r, n),
                           rng.normal(m.z_cm, m.sigma_z, n)))
    d = discrete_localization(pos, RB.k, RB.w0)
    gauss = gaussian_localization(m, RB.k, RB.w0)
    assert abs(d.g - gauss.g) < 5e-3
    assert d.g_r == pytest.approx(gauss.g_r, abs=5e-3)


def test_phase_convention():
    z = 0.25 / RB.k
    state = discrete_localization(np.array([[0.0, 0.0, z]]), RB.k, RB.w0)
    assert state.g_phase == pytest.approx(-2 * RB.k * z)


@settings(max_examples=200)
@given(phi=st.floats(-1.5, 1.5), chi=st.floats(0.05, 0.95), eta_ax=st.floats(0, 2),
       eta_rad=st.floats(0, 2), a0=st.floats(0.05, 1.0))
def test_ltilde_equals_L_through_knobs(phi, chi, eta_ax, eta_rad, a0):
    sp = ScaledParams(UN=1.0, eta_ax=eta_ax, eta_rad=eta_rad, a0_mod=a0)
    knobs = knobs_from_eta(sp, 1 - chi)
    a_mod = math.sqrt(chi) * math.cos(phi)
    assert ltilde(phi, knobs, 1 - chi, chi) == pytest.approx(adiabatic_L(a_mod, sp, 1 - chi),
                                                             rel=1e-12, abs=1e-300)


def test_L_reference_point():
    sp = ScaledParams(UN=1.0, eta_ax=0.5, eta_rad=0.3, a0_mod=0.4)
    assert adiabatic_L(0.4, sp, 0.5) == pytest.approx(math.exp(-0.5) / 1.3)


def test_L_singular_at_zero():
    with pytest.raises(ZeroDivisionError):
        adiabatic_L(0.0, ScaledParams(UN=1.0, eta_ax=0.5, a0_mod=0.3), 0.5)


def test_ltilde_rejects_edge():
    with pytest.raises(ValueError):
        ltilde(math.pi / 2 + 1e-9, LocalizationKnobs(0.1, 0.1), 0.5, 0.5)


def test_mode_splitting():
    up, down = mode_splitting(2.0, 0.25)
    assert (up, down) == (2.5, 1.5)
    assert up - down == pytest.approx(2 * 2.0 * 0.25)
    assert mode_splitting(3.0, 0.0) == (3.0, 3.0)


def test_refractive_indices_symmetric():
    n_p, n_m = refractive_indices(1e6, 0.091, RB.omega_c, 0.5, 10.0, 10.0)
    assert n_p == n_m
    assert n_p - 1 == pytest.approx(1e6 * 0.091 / RB.omega_c * 1.5)
