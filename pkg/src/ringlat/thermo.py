"""Intensity-noise heating, trap decay and evaporative cooling of the sample."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from .adiabatic import atom_number


@dataclass(frozen=True)
class NoiseSpectrum:
    f: np.ndarray  # Hz
    S: np.ndarray  # 1/Hz, one-sided, of the fractional intensity

    def __post_init__(self):
        if np.any(np.asarray(self.S) < 0):
            raise ValueError("spectral density must be non-negative")
        if np.any(np.diff(self.f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")

    def at(self, nu: float) -> float:
        if not self.f[0] <= nu <= self.f[-1]:
            raise ValueError(f"{nu} Hz outside the spectrum range [{self.f[0]}, {self.f[-1]}]")
        return float(np.interp(nu, self.f, self.S))

    def integral(self) -> float:
        """Total power, counting each bin as a rectangle of the grid spacing."""
        if len(self.f) < 2:
            return 0.0
        return float(np.sum(self.S) * (self.f[1] - self.f[0]))


def psd_one_sided(samples, sample_rate: float, segment_length: int, overlap: float = 0.5) -> NoiseSpectrum:
    """Hann-windowed, segment-averaged PSD of the fractional intensity fluctuation.

    The signal is divided by its mean, so S integrates to the variance of
    I / <I> - 1.
    """
    x = np.asarray(samples, dtype=float)
    if segment_length < 2 or len(x) < 2 * segment_length * (1.0 - overlap) + segment_length * overlap:
        raise ValueError("need at least two segments")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    mean = float(np.mean(x))
    if mean == 0.0:
        raise ValueError("fractional intensity undefined for a zero-mean signal")
    frac = x / mean - 1.0
    f, S = signal.welch(frac, fs=sample_rate, window="hann", nperseg=segment_length,
                        noverlap=int(round(overlap * segment_length)), detrend="constant",
                        scaling="density", return_onesided=True)
    return NoiseSpectrum(f, S)


@dataclass(frozen=True)
class HeatingRates:
    gamma_a: float
    gamma_r: float
    tau_h: float | None  # None when the spectrum vanishes at both frequencies


def heating_rates(nu_ax: float, nu_rad: float, spectrum: NoiseSpectrum) -> HeatingRates:
    """Parametric heating rates pi^2 nu^2 S(2 nu) and the e-folding time of the mean energy."""
    gamma_a = math.pi ** 2 * nu_ax ** 2 * spectrum.at(2.0 * nu_ax)
    gamma_r = math.pi ** 2 * nu_rad ** 2 * spectrum.at(2.0 * nu_rad)
    rate = gamma_a / 3.0 + 2.0 * gamma_r / 3.0
    return HeatingRates(gamma_a, gamma_r, None if rate == 0 else 1.0 / rate)


def spot_spectrum(points: dict[float, float]) -> NoiseSpectrum:
    """Spectrum that only knows a few (frequency: S) values; linear in between."""
    f = np.array(sorted(points))
    return NoiseSpectrum(f, np.array([points[k] for k in f], dtype=float))


@dataclass(frozen=True)
class DecayFit:
    gamma_bg: float  # 1/s
    q: float  # 1/s per atom; q * N0 is the initial two-body loss rate
    N0: float
    residual_rms: float = 0.0

    def __post_init__(self):
        if self.gamma_bg < 0 or self.q < 0 or self.N0 < 0:
            raise ValueError("decay parameters must be non-negative")

    @property
    def two_body_rate(self) -> float:
        return self.q * self.N0

    def __call__(self, t):
        return atom_number(t, self.N0, self.gamma_bg, self.q)


class FitError(RuntimeError):
    """A fit failed to converge."""


def _shape(t, gamma, b):
    """N(t) / N0 for background rate gamma and initial two-body rate b."""
    return atom_number(t, 1.0, gamma, b)


def fit_trap_decay(times, populations, *, max_iter: int = 4000) -> DecayFit:
    """Least-squares fit of the background plus two-body decay law.

    For fixed (gamma, b = q N0) the model is linear in N0, which is solved
    exactly; (gamma, b) are seeded on a log grid and refined by bounded
    Nelder-Mead on their logarithms.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(populations, dtype=float)
    if len(t) < 4 or len(t) != len(y):
        raise ValueError("need at least four matched samples")
    if np.any(y <= 0):
        raise ValueError("populations must be positive")
    span = float(t.max() - t.min())
    if span <= 0:
        raise ValueError("samples must span a positive time interval")

    def profile(gamma, b):
        m = _shape(t, gamma, b)
        n0 = float(np.dot(m, y) / np.dot(m, m))
        r = y - n0 * m
        return float(np.dot(r, r)), n0

    lo, hi = 1e-4 / span, 1e3 / span
    grid = np.concatenate(([0.0], np.geomspace(lo, hi, 41)))
    best = min(((profile(g, b)[0], g, b) for g in grid for b in grid), key=lambda x: x[0])

    eps = lo * 1e-3

    def objective(v):
        g, b = math.exp(v[0]) - eps, math.exp(v[1]) - eps
        return profile(max(g, 0.0), max(b, 0.0))[0]

    x0 = [math.log(best[1] + eps), math.log(best[2] + eps)]
    bounds = [(math.log(eps), math.log(hi + eps))] * 2
    res = optimize.minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                            options={"maxiter": max_iter, "xatol": 1e-12, "fatol": 1e-30})
    if not res.success and res.status != 2:
        raise FitError(f"trap-decay fit did not converge: {res.message}")
    g = max(math.exp(res.x[0]) - eps, 0.0)
    b = max(math.exp(res.x[1]) - eps, 0.0)
    sse, n0 = profile(g, b)
    return DecayFit(g, b / n0, n0, math.sqrt(sse / len(t)))


def temperature_evolution(T0: float, epsilon: float, beta_rho0_over_gamma: float, gamma_bg: float, t):
    """Evaporative temperature evolution T0 (1 - eps beta rho0 / (4 gamma) (1 - e^{-gamma t}))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    out = T0 * (1.0 - epsilon * beta_rho0_over_gamma / 4.0 * -np.expm1(-gamma_bg * t))
    return float(out) if out.ndim == 0 else out


def fit_temperature(times, temperatures, decay: DecayFit, rho0: float = 1.0) -> float:
    """Evaporation efficiency epsilon from a temperature record.

    The two-body coefficient of ``decay`` is already normalised per atom, so
    beta rho0 is its initial two-body rate and ``rho0`` is accepted only to
    mirror the measured inputs. The model is linear in (T0, T0 epsilon), so
    the fit is an exact linear least-squares solve.
    """
    t = np.asarray(times, dtype=float)
    T = np.asarray(temperatures, dtype=float)
    if len(t) < 3 or len(t) != len(T):
        raise ValueError("need at least three matched samples")
    if not rho0 > 0:
        raise ValueError("rho0 must be positive")
    if decay.gamma_bg <= 0:
        raise ValueError("the decay fit needs a positive background rate")
    c = decay.two_body_rate / decay.gamma_bg / 4.0 * -np.expm1(-decay.gamma_bg * t)
    if not np.any(c > 0):
        raise FitError("temperature samples carry no information on epsilon")
    design = np.column_stack((np.ones_like(t), -c))
    (T0, T0_eps), *_ = np.linalg.lstsq(design, T, rcond=None)
    if not T0 > 0:
        raise FitError("fitted initial temperature is not positive")
    return float(T0_eps / T0)
