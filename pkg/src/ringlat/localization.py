"""Atom-field overlap quantities.

Discrete and Gaussian localization parameters, the adiabatic localization
factors of the reduced field model, and the mode-splitting and refractive
index diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ScaledParams


@dataclass(frozen=True)
class LocalizationState:
    g: complex
    g_r: float

    @property
    def g_mod(self) -> float:
        return abs(self.g)

    @property
    def g_phase(self) -> float:
        return math.atan2(self.g.imag, self.g.real)


@dataclass(frozen=True)
class GaussianMoments:
    sigma_z: float
    sigma_r: float
    z_cm: float = 0.0

    def __post_init__(self):
        if self.sigma_z < 0 or self.sigma_r < 0:
            raise ValueError("spreads must be non-negative")


@dataclass(frozen=True)
class LocalizationKnobs:
    """Composite coefficients of the phase-only localization factor.

    ``ax_knob`` multiplies sqrt(8 / (sqrt(chi0+ chi0-) cos phi)) in the
    exponent, ``rad_knob`` is divided by sqrt(chi0+) + sqrt(chi0-) cos phi in
    the radial denominator.
    """

    ax_knob: float
    rad_knob: float

    def __post_init__(self):
        if self.ax_knob < 0 or self.rad_knob < 0:
            raise ValueError("localization knobs must be non-negative")


def discrete_localization(positions, k: float, w0: float) -> LocalizationState:
    """g and g_r of an explicit set of atom positions (N x 3 array, metres)."""
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[0] == 0 or pos.shape[1] != 3:
        raise ValueError("positions must be a non-empty N x 3 array")
    radial = np.exp(-2.0 * (pos[:, 0] ** 2 + pos[:, 1] ** 2) / (w0 * w0))
    g = np.mean(radial * np.exp(-2j * k * pos[:, 2]))
    return LocalizationState(complex(g), float(np.mean(radial)))


def gaussian_localization(m: GaussianMoments, k: float, w0: float) -> LocalizationState:
    """Closed form of g for uncorrelated Gaussian axial and radial spreads."""
    g_r = 1.0 / (1.0 + 4.0 * (m.sigma_r / w0) ** 2)
    mod = g_r * math.exp(-2.0 * (k * m.sigma_z) ** 2)
    return LocalizationState(complex(mod * np.exp(-2j * k * m.z_cm)), g_r)


def adiabatic_L(a_mod: float, sp: ScaledParams, chi0_plus: float, i0_factor: float = 1.0) -> float:
    """Localization factor of the adiabatic field model.

    exp(-eta_ax sqrt(|a0| / |a|)) / (1 + eta_rad (sqrt(chi0+) + |a0|) / (sqrt(chi0+) + |a|))

    ``i0_factor`` rescales the total pumped power relative to the reference
    state in which the eta ratios were measured; both travelling waves (the
    locked one included) scale with its square root. The default 1 gives the
    plain expression.
    """
    if not a_mod > 0:
        raise ZeroDivisionError("adiabatic_L is singular at |a| = 0")
    sf = math.sqrt(i0_factor)
    sp_plus = math.sqrt(chi0_plus)
    axial = math.exp(-sp.eta_ax * math.sqrt(sp.a0_mod / (sf * a_mod)))
    radial = 1.0 + sp.eta_rad * (sp_plus + sp.a0_mod) / (sf * sp_plus + a_mod)
    return axial / radial


def knobs_from_eta(sp: ScaledParams, chi0_plus: float) -> LocalizationKnobs:
    """Map (eta_ax, eta_rad, |a0|) onto the phase-only parameterization.

    Chosen so that ``ltilde(phi)`` equals ``adiabatic_L(sqrt(chi0-) cos phi)``.
    """
    return LocalizationKnobs(
        ax_knob=sp.eta_ax * math.sqrt(sp.a0_mod * math.sqrt(chi0_plus) / 8.0),
        rad_knob=sp.eta_rad * (math.sqrt(chi0_plus) + sp.a0_mod),
    )


def ltilde(phi, knobs: LocalizationKnobs, chi0_plus: float, chi0_minus: float):
    """Localization factor with the amplitude eliminated (|a| = sqrt(chi0-) cos phi).

    Accepts scalars or arrays; requires |phi| < pi/2.
    """
    cos_phi = np.cos(phi)
    if np.any(cos_phi <= 0):
        raise ValueError("ltilde requires |phi| < pi/2")
    product = math.sqrt(chi0_plus * chi0_minus)
    axial = np.exp(-knobs.ax_knob * np.sqrt(8.0 / (product * cos_phi)))
    radial = 1.0 + knobs.rad_knob / (math.sqrt(chi0_plus) + math.sqrt(chi0_minus) * cos_phi)
    out = axial / radial
    return float(out) if np.ndim(out) == 0 else out


def mode_splitting(N_delta0: float, g_mod: float) -> tuple[float, float]:
    """Frequency shifts of the lattice-supporting and the empty eigenmode (1/s)."""
    if N_delta0 < 0 or g_mod < 0:
        raise ValueError("inputs must be non-negative")
    return N_delta0 * (1.0 + g_mod), N_delta0 * (1.0 - g_mod)


def refractive_indices(N, delta0, omega_c, g_mod, alpha_plus_mod, alpha_minus_mod):
    """First-order refractive indices (n+, n-) of the two travelling waves."""
    if alpha_plus_mod <= 0 or alpha_minus_mod <= 0:
        raise ZeroDivisionError("refractive_indices needs non-zero field moduli")
    base = N * delta0 / omega_c
    n_plus = 1.0 + base * (1.0 + g_mod * alpha_minus_mod / alpha_plus_mod)
    n_minus = 1.0 + base * (1.0 + g_mod * alpha_plus_mod / alpha_minus_mod)
    return n_plus, n_minus
