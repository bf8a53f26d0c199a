import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringlat.thermo import (DecayFit, FitError, NoiseSpectrum, fit_temperature, fit_trap_decay,
                            heating_rates, psd_one_sided, spot_spectrum, temperature_evolution)


def test_spot_values():
    spectrum = spot_spectrum({900.0: 3e-9, 700e3: 1.5e-13})
    r = heating_rates(350e3, 450.0, spectrum)
    assert r.gamma_a == pytest.approx(math.pi ** 2 * 350e3 ** 2 * 1.5e-13)
    assert r.gamma_a == pytest.approx(0.181, abs=0.002)
    assert r.gamma_r == pytest.approx(6.0e-3, abs=0.1e-3)
    assert r.tau_h == pytest.approx(15.5, abs=0.5)


def test_spectrum_range_checked():
    spectrum = spot_spectrum({900.0: 3e-9, 700e3: 1.5e-13})
    with pytest.raises(ValueError):
        heating_rates(400e3, 450.0, spectrum)
    with pytest.raises(ValueError):
        NoiseSpectrum(np.array([1.0, 2.0]), np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        NoiseSpectrum(np.array([2.0, 1.0]), np.array([1.0, 1.0]))


def test_parseval():
    rng = np.random.default_rng(11)
    x = 1.0 + 0.01 * rng.normal(size=2 ** 18)
    spectrum = psd_one_sided(x, 1e5, 4096)
    assert spectrum.integral() == pytest.approx(np.var(x / x.mean()), rel=0.01)


def test_sinusoid_at_twice_axial_frequency_dominates():
    fs, nu_ax, nu_rad = 1e5, 1e4, 1e3
    t = np.arange(2 ** 17) / fs
    rng = np.random.default_rng(5)
    x = 1.0 + 1e-3 * np.sin(2 * math.pi * 2 * nu_ax * t) + 1e-5 * rng.normal(size=t.size)
    r = heating_rates(nu_ax, nu_rad, psd_one_sided(x, fs, 4096))
    assert r.gamma_a > 1e3 * r.gamma_r


def test_constant_series_does_not_heat():
    spectrum = psd_one_sided(np.full(8192, 3.0), 1e4, 1024)
    assert np.all(spectrum.S == 0)
    assert heating_rates(1e3, 100.0, spectrum).tau_h is None


def test_psd_validation():
    with pytest.raises(ValueError):
        psd_one_sided(np.ones(100), 1e3, 128)
    with pytest.raises(ValueError):
        psd_one_sided(np.zeros(4096), 1e3, 256)


@settings(max_examples=25, deadline=None)
@given(gamma=st.floats(0.1, 2.0), b=st.floats(0.0, 3.0), N0=st.floats(1e4, 1e7))
def test_decay_fit_recovers_parameters(gamma, b, N0):
    t = np.linspace(0, 6, 40)
    fit = fit_trap_decay(t, DecayFit(gamma, b / N0, N0)(t))
    assert fit.gamma_bg == pytest.approx(gamma, rel=1e-4, abs=1e-6)
    assert fit.two_body_rate == pytest.approx(b, rel=1e-4, abs=1e-5)
    assert fit.N0 == pytest.approx(N0, rel=1e-6)


def test_decay_fit_validation():
    with pytest.raises(ValueError):
        fit_trap_decay([0, 1, 2], [3, 2, 1])
    with pytest.raises(ValueError):
        fit_trap_decay([0, 1, 2, 3], [3, 2, 0, 1])
    with pytest.raises(ValueError):
        DecayFit(-1.0, 0.0, 1.0)


def test_temperature_round_trip():
    decay = DecayFit(1 / 1.7, 1.0 / 1e6, 1e6)
    t = np.linspace(0, 5, 30)
    T = temperature_evolution(100e-6, 0.23, decay.two_body_rate / decay.gamma_bg, decay.gamma_bg, t)
    assert fit_temperature(t, T, decay) == pytest.approx(0.23, abs=1e-6)


def test_temperature_evolution_limits():
    assert temperature_evolution(1.0, 0.23, 2.0, 0.5, 0.0) == 1.0
    assert temperature_evolution(1.0, 0.23, 2.0, 0.5, 1e3) == pytest.approx(1 - 0.23 * 2.0 / 4)
    with pytest.raises(ValueError):
        temperature_evolution(1.0, 0.2, 1.0, 1.0, -1.0)


def test_temperature_fit_needs_information():
    with pytest.raises(FitError):
        fit_temperature([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], DecayFit(0.5, 1e-6, 1e6))
