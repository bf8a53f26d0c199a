"""Physical constants, parameter records and trap geometry.

All simulation-internal time is scaled time ``tau = gamma_c * t``; dimensional
quantities only appear at the input/output boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy import constants as _const

HBAR = _const.hbar
K_B = _const.k
AMU = _const.physical_constants["atomic mass constant"][0]
C_LIGHT = _const.c

RB85_MASS = 84.911789738 * AMU
RB85_D2_WAVELENGTH = 780.241e-9


class ParameterError(ValueError):
    """Raised when a parameter record violates its invariants."""


def recoil_frequency(k: float, mass: float) -> float:
    """Recoil frequency hbar k^2 / 2m in rad/s."""
    return HBAR * k * k / (2.0 * mass)


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional cavity and atom constants.

    ``omega_R`` is redundant with ``k`` and ``mass``; passing ``None`` fills
    it in, anything else is checked against hbar k^2 / 2m.
    """

    gamma_c: float
    delta0: float
    N: float
    omega_c: float
    delta_c: float
    k: float
    w0: float
    mass: float
    omega_R: float | None = None

    def __post_init__(self):
        if not self.gamma_c > 0:
            raise ParameterError(f"gamma_c must be positive, got {self.gamma_c}")
        if not self.w0 > 0:
            raise ParameterError(f"w0 must be positive, got {self.w0}")
        if not self.k > 0:
            raise ParameterError(f"k must be positive, got {self.k}")
        if not self.mass > 0:
            raise ParameterError(f"mass must be positive, got {self.mass}")
        if not self.N >= 0:
            raise ParameterError(f"N must be non-negative, got {self.N}")
        expected = recoil_frequency(self.k, self.mass)
        if self.omega_R is None:
            object.__setattr__(self, "omega_R", expected)
        elif abs(self.omega_R - expected) > 1e-12 * expected:
            raise ParameterError(
                f"omega_R={self.omega_R} inconsistent with hbar k^2/2m={expected}"
            )

    @classmethod
    def rb85(cls, **overrides) -> "PhysicalParams":
        """Preset for 85Rb in the strong-coupling ring-cavity configuration.

        Photon lifetime 1/(2 gamma_c) = 9.3 us, light shift per photon
        0.091 1/s, mode radius as the geometric mean of the sagittal and
        vertical waists (134 um, 129 um).
        """
        k = 2.0 * math.pi / RB85_D2_WAVELENGTH
        values = dict(
            gamma_c=1.0 / (2.0 * 9.3e-6),
            delta0=0.091,
            N=0.0,
            omega_c=C_LIGHT * k,
            delta_c=0.0,
            k=k,
            w0=math.sqrt(134e-6 * 129e-6),
            mass=RB85_MASS,
        )
        values.update(overrides)
        return cls(**values)

    def with_(self, **changes) -> "PhysicalParams":
        if ("k" in changes or "mass" in changes) and "omega_R" not in changes:
            changes["omega_R"] = None
        return replace(self, **changes)

    @property
    def U(self) -> float:
        """Scaled single-atom interaction strength delta0 / gamma_c."""
        return self.delta0 / self.gamma_c


@dataclass(frozen=True)
class PumpConfig:
    """Split of the empty-cavity intensity between the two travelling waves."""

    chi0_minus: float
    I0: float = 1.0
    chi0_plus: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.chi0_minus <= 1.0:
            raise ParameterError(f"chi0_minus must lie in [0, 1], got {self.chi0_minus}")
        if not self.I0 >= 0:
            raise ParameterError(f"I0 must be non-negative, got {self.I0}")
        object.__setattr__(self, "chi0_plus", 1.0 - self.chi0_minus)

    def field_moduli(self, a_mod: float | None = None, i0_factor: float = 1.0):
        """Travelling-wave moduli |alpha_+|, |alpha_-| in photon-number units.

        ``a_mod`` is the scaled unlocked amplitude; ``None`` means the
        empty-cavity value sqrt(chi0_minus).
        """
        if a_mod is None:
            a_mod = math.sqrt(i0_factor * self.chi0_minus)
        scale = math.sqrt(self.I0)
        return math.sqrt(i0_factor * self.chi0_plus) * scale, a_mod * scale


@dataclass(frozen=True)
class ScaledParams:
    UN: float
    eta_ax: float = 0.0
    eta_rad: float = 0.0
    a0_mod: float = 0.0

    def __post_init__(self):
        for name in ("UN", "eta_ax", "eta_rad", "a0_mod"):
            value = getattr(self, name)
            if not value >= 0:
                raise ParameterError(f"{name} must be non-negative, got {value}")

    def with_(self, **changes) -> "ScaledParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SampleThermo:
    """Temperatures and Boltzmann factors of the trapped sample.

    The xi factors are kept for bookkeeping only; the simulation works with
    the eta ratios (thermal energy over well depth), see ``scale_params``.
    """

    xi_ax: float = 0.0
    xi_rad: float = 0.0
    T_ax: float = 0.0
    T_rad: float = 0.0
    omega_V: float = 0.0

    def __post_init__(self):
        for name in ("xi_ax", "xi_rad", "T_ax", "T_rad", "omega_V"):
            value = getattr(self, name)
            if not value >= 0:
                raise ParameterError(f"{name} must be non-negative, got {value}")


def scale_params(
    phys: PhysicalParams,
    pump: PumpConfig,
    thermo: SampleThermo | None = None,
    *,
    eta_ax: float | None = None,
    eta_rad: float | None = None,
    a0_mod: float | None = None,
) -> ScaledParams:
    """Dimensionless parameters of the field model.

    ``UN = N delta0 / gamma_c``. The eta ratios pass through when given;
    otherwise they are computed from the sample temperatures and the well
    depths of the reference field ``a0_mod`` (default: the empty-cavity
    amplitude sqrt(chi0_minus)).
    """
    if not phys.gamma_c > 0:
        raise ParameterError("gamma_c must be positive")
    if a0_mod is None:
        a0_mod = math.sqrt(pump.chi0_minus)
    if (eta_ax is None or eta_rad is None) and thermo is not None:
        ap, am = pump.field_moduli(a0_mod)
        geo = trap_geometry(ap, am, phys)
        if eta_ax is None:
            eta_ax = K_B * thermo.T_ax / geo.well_depth if geo.well_depth > 0 else 0.0
        if eta_rad is None:
            eta_rad = K_B * thermo.T_rad / geo.antinode_depth if geo.antinode_depth > 0 else 0.0
    return ScaledParams(
        UN=phys.N * phys.delta0 / phys.gamma_c,
        eta_ax=0.0 if eta_ax is None else eta_ax,
        eta_rad=0.0 if eta_rad is None else eta_rad,
        a0_mod=a0_mod,
    )


@dataclass(frozen=True)
class TrapGeometry:
    well_depth: float  # J, peak-to-peak axial modulation
    nu_ax: float  # Hz
    nu_rad: float  # Hz
    antinode_depth: float  # J, on-axis intensity maximum

    def __iter__(self):
        # unpacks as (well_depth, nu_ax, nu_rad)
        return iter((self.well_depth, self.nu_ax, self.nu_rad))


def trap_geometry(alpha_plus_mod: float, alpha_minus_mod: float, phys: PhysicalParams) -> TrapGeometry:
    """Well depth and harmonic vibrational frequencies of the lattice.

    The potential is hbar |delta0| |alpha_+ e^{ikz} + alpha_- e^{-ikz}|^2
    times the Gaussian mode envelope. The axial modulation has depth
    4 hbar |delta0| |alpha_+||alpha_-|; the radial frequency comes from the
    envelope curvature at the on-axis antinode intensity
    hbar |delta0| (|alpha_+| + |alpha_-|)^2.
    """
    light_shift = HBAR * abs(phys.delta0)
    depth = 4.0 * light_shift * alpha_plus_mod * alpha_minus_mod
    antinode = light_shift * (alpha_plus_mod + alpha_minus_mod) ** 2
    omega_ax = phys.k * math.sqrt(2.0 * depth / phys.mass)
    omega_rad = (2.0 / phys.w0) * math.sqrt(antinode / phys.mass)
    return TrapGeometry(depth, omega_ax / (2 * math.pi), omega_rad / (2 * math.pi), antinode)


def depth_for_axial_frequency(nu_ax: float, phys: PhysicalParams) -> float:
    """Axial well depth (J) whose harmonic frequency is ``nu_ax`` (Hz)."""
    omega = 2 * math.pi * nu_ax
    return phys.mass * omega * omega / (2.0 * phys.k * phys.k)


def symmetric_modulus_for_depth(depth: float, phys: PhysicalParams) -> float:
    """Travelling-wave modulus that gives ``depth`` with symmetric pumping."""
    return math.sqrt(depth / (4.0 * HBAR * abs(phys.delta0)))


def photon_scale_for_omega_v(nu_v: float, phys: PhysicalParams) -> float:
    """Total empty-cavity photon number I0 for a symmetric-pumping axial frequency ``nu_v``."""
    depth = depth_for_axial_frequency(nu_v, phys)
    return depth / (2.0 * HBAR * abs(phys.delta0))


def to_scaled_time(t, phys: PhysicalParams):
    return phys.gamma_c * t


def to_seconds(tau, phys: PhysicalParams):
    return tau / phys.gamma_c
