"""Coupled atom/field simulation of the full 6N+2 system.

Internally every atom is stored in lattice-scaled coordinates: ``zeta = k z``
along the cavity axis, ``rho = (x, y) / w0`` across it, with velocities taken
with respect to scaled time ``tau = gamma_c t``. The dipole potential is

    V = -hbar delta0 I0 |s e^{i zeta} + a e^{-i zeta}|^2 exp(-2 rho^2)

with ``s = sqrt(f chi0+)`` the locked amplitude (``f`` the total-power
multiplier) and ``a`` the unlocked one, both in units of sqrt(I0). Atoms
collect at 2 zeta = arg a, which is where the backscatter term of the field
equation pulls the unlocked phase.

Only the product hbar delta0 I0 and UN enter the equations, so a run with
fewer simulated atoms and a proportionally larger light shift per photon
(and proportionally smaller photon numbers) is the same system.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass

import numba
import numpy as np
from scipy import signal

from .adiabatic import DriveSchedule
from .params import HBAR, K_B, PhysicalParams, PumpConfig, depth_for_axial_frequency

FASTEST_STEPS_PER_PERIOD = 50


class NonFiniteState(RuntimeError):
    """The joint state picked up a NaN or infinity."""


@dataclass
class ParticleEnsemble:
    positions: np.ndarray  # (N, 3) m
    momenta: np.ndarray  # (N, 3) kg m/s

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        self.momenta = np.ascontiguousarray(self.momenta, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3 or self.positions.shape[0] < 1:
            raise ValueError("positions must be an N x 3 array with N >= 1")
        if self.momenta.shape != self.positions.shape:
            raise ValueError("momenta must match positions in shape")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.momenta))):
            raise ValueError("ensemble coordinates must be finite")

    @property
    def N_sim(self) -> int:
        return self.positions.shape[0]


def init_ensemble(seed: int, N_sim: int, sigma_z0: float, sigma_r0: float, T_ax: float,
                  T_rad: float, mass: float, z_center: float = 0.0) -> ParticleEnsemble:
    """Gaussian cloud about one well centre with Maxwell-Boltzmann momenta.

    ``sigma_r0`` is the rms spread of each transverse coordinate.
    """
    if N_sim < 1:
        raise ValueError("N_sim must be at least 1")
    for name, v in (("sigma_z0", sigma_z0), ("sigma_r0", sigma_r0), ("T_ax", T_ax), ("T_rad", T_rad)):
        if not v >= 0:
            raise ValueError(f"{name} must be non-negative")
    rng = np.random.Generator(np.random.PCG64(seed))
    pos = np.empty((N_sim, 3))
    mom = np.empty((N_sim, 3))
    pos[:, 0:2] = rng.normal(0.0, 1.0, (N_sim, 2)) * sigma_r0
    pos[:, 2] = z_center + rng.normal(0.0, 1.0, N_sim) * sigma_z0
    mom[:, 0:2] = rng.normal(0.0, 1.0, (N_sim, 2)) * math.sqrt(mass * K_B * T_rad)
    mom[:, 2] = rng.normal(0.0, 1.0, N_sim) * math.sqrt(mass * K_B * T_ax)
    return ParticleEnsemble(pos, mom)


def thermal_spreads(eta_ax: float, eta_rad: float, k: float, w0: float):
    """(sigma_z, sigma_r) of a harmonic thermal cloud with the given eta ratios."""
    return math.sqrt(eta_ax / 2.0) / k, 0.5 * w0 * math.sqrt(eta_rad)


@dataclass(frozen=True)
class RescalePlan:
    N_real: float
    N_sim: int
    delta0_scaled: float
    intensity_factor: float

    def apply(self, phys: PhysicalParams, I0: float):
        """(params with N_sim atoms and the enlarged light shift, rescaled I0)."""
        return phys.with_(N=float(self.N_sim), delta0=self.delta0_scaled), I0 * self.intensity_factor


def rescale_for_simulation(N_real: float, N_sim: int, phys: PhysicalParams,
                           pump: PumpConfig | None = None) -> RescalePlan:
    if N_sim < 1:
        raise ValueError("N_sim must be at least 1")
    if not N_real > 0:
        raise ValueError("N_real must be positive")
    ratio = N_real / N_sim
    return RescalePlan(float(N_real), int(N_sim), phys.delta0 * ratio, 1.0 / ratio)


@dataclass(frozen=True)
class LatticeScales:
    """Conversion between SI and lattice-scaled units for one configuration."""

    k: float
    w0: float
    mass: float
    gamma_c: float
    light_shift_energy: float  # hbar delta0 I0 (J)

    @property
    def omega_ax_sq(self) -> float:
        return self.k ** 2 * self.light_shift_energy / (self.mass * self.gamma_c ** 2)

    @property
    def omega_rad_sq(self) -> float:
        return self.light_shift_energy / (self.mass * self.w0 ** 2 * self.gamma_c ** 2)

    @classmethod
    def from_axial_frequency(cls, phys: PhysicalParams, nu_v: float) -> "LatticeScales":
        """Scales for a photon number set by the symmetric-pumping axial frequency ``nu_v`` (Hz)."""
        # symmetric empty cavity: depth = 4 hbar delta0 I0 / 2 = 2 hbar delta0 I0
        energy = depth_for_axial_frequency(nu_v, phys) / 2.0
        return cls(phys.k, phys.w0, phys.mass, phys.gamma_c, energy)

    def axial_period_tau(self, s: float, a_mod: float) -> float:
        """Harmonic axial period (scaled time) for field moduli ``s``, ``a_mod``."""
        omega = math.sqrt(8.0 * s * a_mod * self.omega_ax_sq)
        return 2.0 * math.pi / omega

    def to_scaled(self, ens: ParticleEnsemble):
        pos = np.empty_like(ens.positions)
        vel = np.empty_like(ens.momenta)
        pos[:, 0] = ens.positions[:, 2] * self.k
        pos[:, 1] = ens.positions[:, 0] / self.w0
        pos[:, 2] = ens.positions[:, 1] / self.w0
        vel[:, 0] = ens.momenta[:, 2] * self.k / (self.mass * self.gamma_c)
        vel[:, 1] = ens.momenta[:, 0] / (self.mass * self.w0 * self.gamma_c)
        vel[:, 2] = ens.momenta[:, 1] / (self.mass * self.w0 * self.gamma_c)
        return pos, vel

    def to_si(self, pos, vel) -> ParticleEnsemble:
        positions = np.column_stack((pos[:, 1] * self.w0, pos[:, 2] * self.w0, pos[:, 0] / self.k))
        momenta = np.column_stack((
            vel[:, 1] * self.mass * self.w0 * self.gamma_c,
            vel[:, 2] * self.mass * self.w0 * self.gamma_c,
            vel[:, 0] * self.mass * self.gamma_c / self.k,
        ))
        return ParticleEnsemble(positions, momenta)


# ---------------------------------------------------------------- kernels


# Symmetric 6-stage fourth-order Runge-Kutta-Nystrom composition
# (kick-drift-...-kick) with small error constants.
_KICK = np.array([
    0.0829844064174052, 0.396309801498368, -0.0390563049223486,
    1.0 - 2.0 * (0.0829844064174052 + 0.396309801498368 - 0.0390563049223486),
    -0.0390563049223486, 0.396309801498368, 0.0829844064174052,
])
_DRIFT = np.array([
    0.245298957184271, 0.604872665711080, 0.5 - (0.245298957184271 + 0.604872665711080),
    0.5 - (0.245298957184271 + 0.604872665711080), 0.604872665711080, 0.245298957184271,
])


@numba.njit(cache=True)
def _field_rate(a, g, UN, s, sqrt_chi_m):
    return 1j * (UN / s) * g * a * a - a - 1j * UN * g.conjugate() * s + sqrt_chi_m


@numba.njit(cache=True)
def _kick(pos, vel, a, h, s, sqrt_chi_m, UN, oax2, orad2, frozen, env, ph):
    """Advance velocities and the field by ``h`` with the atoms held in place.

    At fixed positions g is constant, the field obeys a scalar ODE (one RK4
    step) and the forces are affine in a and |a|^2, so the velocity change
    only needs Simpson averages of those two along the field path. With a
    frozen field the kick is exact.
    """
    n = pos.shape[0]
    total = 0j
    for i in range(n):
        x = pos[i, 1]
        y = pos[i, 2]
        env[i] = math.exp(-2.0 * (x * x + y * y))
        ph[i] = complex(math.cos(2.0 * pos[i, 0]), -math.sin(2.0 * pos[i, 0]))
        total += ph[i] * env[i]  # fixed order: reproducible reduction
    g = total / n
    if frozen:
        a_new = a
        a_bar = a
        q_bar = a.real * a.real + a.imag * a.imag
    else:
        k1 = _field_rate(a, g, UN, s, sqrt_chi_m)
        k2 = _field_rate(a + 0.5 * h * k1, g, UN, s, sqrt_chi_m)
        k3 = _field_rate(a + 0.5 * h * k2, g, UN, s, sqrt_chi_m)
        k4 = _field_rate(a + h * k3, g, UN, s, sqrt_chi_m)
        a_new = a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        k_end = _field_rate(a_new, g, UN, s, sqrt_chi_m)
        a_mid = 0.5 * (a + a_new) + h / 8.0 * (k1 - k_end)
        a_bar = (a + 4.0 * a_mid + a_new) / 6.0
        q_bar = (abs(a) ** 2 + 4.0 * abs(a_mid) ** 2 + abs(a_new) ** 2) / 6.0
    base = s * s + q_bar
    for i in range(n):
        w = a_bar * ph[i]
        vel[i, 0] += h * oax2 * 4.0 * s * w.imag * env[i]
        radial = -h * orad2 * 4.0 * (base + 2.0 * s * w.real) * env[i]
        vel[i, 1] += radial * pos[i, 1]
        vel[i, 2] += radial * pos[i, 2]
    return a_new


@numba.njit(cache=True, nogil=True)
def _srkn_run(pos, vel, a, nsteps, dt, s, sqrt_chi_m, UN, oax2, orad2, frozen, kick, drift):
    n = pos.shape[0]
    env = np.empty(n)
    ph = np.empty(n, dtype=np.complex128)
    for _ in range(nsteps):
        for stage in range(drift.shape[0]):
            a = _kick(pos, vel, a, kick[stage] * dt, s, sqrt_chi_m, UN, oax2, orad2, frozen, env, ph)
            hd = drift[stage] * dt
            for i in range(n):
                pos[i, 0] += hd * vel[i, 0]
                pos[i, 1] += hd * vel[i, 1]
                pos[i, 2] += hd * vel[i, 2]
        a = _kick(pos, vel, a, kick[-1] * dt, s, sqrt_chi_m, UN, oax2, orad2, frozen, env, ph)
    return a


@numba.njit(cache=True)
def _energy(pos, vel, a, s, oax2, orad2):
    """Total atomic energy in units of hbar delta0 I0."""
    total = 0.0
    for i in range(pos.shape[0]):
        z = pos[i, 0]
        x = pos[i, 1]
        y = pos[i, 2]
        env = math.exp(-2.0 * (x * x + y * y))
        w = a * complex(math.cos(2.0 * z), -math.sin(2.0 * z))
        intensity = s * s + a.real * a.real + a.imag * a.imag + 2.0 * s * w.real
        kin = 0.5 * vel[i, 0] ** 2 / oax2 + 0.5 * (vel[i, 1] ** 2 + vel[i, 2] ** 2) / orad2
        total += kin - intensity * env
    return total


def thread_count() -> int:
    """Worker threads for independent runs, capped by RINGLAT_THREADS (default 1).

    The integration kernel releases the GIL, so separate simulations can
    share a thread pool; each run is still sequential and reproducible.
    """
    value = os.environ.get("RINGLAT_THREADS")
    if not value:
        return 1
    n = int(value)
    if n < 1:
        raise ValueError("RINGLAT_THREADS must be a positive integer")
    return n


# ------------------------------------------------------------- public API


def potential(pos_si, alpha_plus: complex, alpha_minus: complex, phys: PhysicalParams):
    """Dipole potential (J) of atoms at ``pos_si`` (N x 3) for photon-number amplitudes."""
    pos = np.atleast_2d(np.asarray(pos_si, dtype=float))
    kz = phys.k * pos[:, 2]
    field = alpha_plus * np.exp(1j * kz) + alpha_minus * np.exp(-1j * kz)
    env = np.exp(-2.0 * (pos[:, 0] ** 2 + pos[:, 1] ** 2) / phys.w0 ** 2)
    return -HBAR * phys.delta0 * np.abs(field) ** 2 * env


def forces(ensemble: ParticleEnsemble, alpha_plus: complex, alpha_minus: complex,
           phys: PhysicalParams) -> np.ndarray:
    """Analytic dipole forces (N x 3, newtons) for photon-number amplitudes.

    ``alpha_plus`` is taken real (the lock fixes the reference phase).
    """
    x, y, z = ensemble.positions.T
    k, w0 = phys.k, phys.w0
    ap = complex(alpha_plus)
    am = complex(alpha_minus)
    env = np.exp(-2.0 * (x ** 2 + y ** 2) / w0 ** 2)
    field = ap * np.exp(1j * k * z) + am * np.exp(-1j * k * z)
    intensity = np.abs(field) ** 2
    # only the interference term 2 Re(ap conj(am) e^{2ikz}) depends on z
    d_int_z = -4.0 * k * np.imag(ap * np.conj(am) * np.exp(2j * k * z))
    pref = HBAR * phys.delta0
    out = np.empty_like(ensemble.positions)
    out[:, 0] = pref * intensity * env * (-4.0 * x / w0 ** 2)
    out[:, 1] = pref * intensity * env * (-4.0 * y / w0 ** 2)
    out[:, 2] = pref * d_int_z * env
    return out


def field_rhs(a: complex, ensemble: ParticleEnsemble, chi0_minus: float, UN: float,
              phys: PhysicalParams, i0_factor: float = 1.0) -> complex:
    """da/dtau of the unlocked mode driven by the instantaneous atom distribution."""
    from .localization import discrete_localization

    g = discrete_localization(ensemble.positions, phys.k, phys.w0).g
    s = math.sqrt(i0_factor * (1.0 - chi0_minus))
    return complex(_field_rate(complex(a), complex(g), float(UN), s,
                               math.sqrt(i0_factor * chi0_minus)))


@dataclass
class ObservableTrace:
    tau: np.ndarray
    a: np.ndarray
    sigma_z: np.ndarray
    sigma_r: np.ndarray
    sigma_pr: np.ndarray
    g_mod: np.ndarray
    E_kin_ax: np.ndarray
    E_kin_rad: np.ndarray
    gamma_c: float
    energy: np.ndarray | None = None
    radial: np.ndarray | None = None  # (samples, N, 2) m
    manifest: dict | None = None

    @property
    def chi_minus(self):
        return np.abs(self.a) ** 2

    @property
    def phi(self):
        return np.angle(self.a)

    @property
    def t_seconds(self):
        return self.tau / self.gamma_c

    COLUMNS = ("tau", "t_seconds", "chi_minus", "phi", "sigma_z", "sigma_r", "g_mod",
               "E_kin_ax", "E_kin_rad")

    def to_csv(self, path):
        cols = [self.tau, self.t_seconds, self.chi_minus, self.phi, self.sigma_z, self.sigma_r,
                self.g_mod, self.E_kin_ax, self.E_kin_rad]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])

    def write_manifest(self, path):
        with open(path, "w") as fh:
            json.dump(self.manifest or {}, fh, indent=2, sort_keys=True)


def _observe(pos, vel, a, scales: LatticeScales):
    m = scales.mass
    wrap = np.mod(pos[:, 0] - 0.5 * np.angle(a) + 0.5 * math.pi, math.pi) - 0.5 * math.pi
    sigma_z = float(np.std(wrap)) / scales.k
    rho2 = pos[:, 1] ** 2 + pos[:, 2] ** 2
    sigma_r = math.sqrt(float(np.mean(rho2)) / 2.0) * scales.w0
    v_rad = scales.w0 * scales.gamma_c
    v_ax = scales.gamma_c / scales.k
    sigma_pr = math.sqrt(float(np.mean(vel[:, 1] ** 2 + vel[:, 2] ** 2)) / 2.0) * m * v_rad
    g = np.mean(np.exp(-2j * pos[:, 0] - 2.0 * rho2))
    e_ax = 0.5 * m * v_ax ** 2 * float(np.mean(vel[:, 0] ** 2))
    e_rad = 0.5 * m * v_rad ** 2 * float(np.mean(vel[:, 1] ** 2 + vel[:, 2] ** 2))
    return sigma_z, sigma_r, sigma_pr, float(abs(g)), e_ax, e_rad


def integrate_full(ensemble: ParticleEnsemble, a_init: complex, schedule: DriveSchedule, tau_span,
                   dt: float, output_stride: float, scales: LatticeScales, *,
                   frozen_field: bool = False, track_energy: bool = False,
                   record_radial: bool = False) -> ObservableTrace:
    """Fixed-step fourth-order integration of positions, velocities and the unlocked field.

    A symplectic Runge-Kutta-Nystrom composition: with the field frozen the
    atomic energy error stays bounded instead of drifting.

    ``output_stride`` is rounded to a whole number of steps. The drive is
    evaluated at the start of each output interval and held over it.
    ``frozen_field`` keeps ``a`` fixed (atoms in a static lattice).
    ``record_radial`` stores every atom's transverse coordinates (metres) at
    each sample, for single-atom spectra.
    """
    tau0, tau1 = float(tau_span[0]), float(tau_span[1])
    if not (tau1 > tau0 and dt > 0 and output_stride > 0):
        raise ValueError("need tau1 > tau0, dt > 0 and output_stride > 0")
    steps_per_out = max(1, int(round(output_stride / dt)))
    n_out = int(math.floor((tau1 - tau0) / (steps_per_out * dt) + 1e-9))
    pos, vel = scales.to_scaled(ensemble)
    a = complex(a_init)
    oax2, orad2 = scales.omega_ax_sq, scales.omega_rad_sq

    rows = []
    energies = []
    radial = []

    def sample(tau, s):
        rows.append((tau, a) + _observe(pos, vel, a, scales))
        if track_energy:
            energies.append(_energy(pos, vel, a, s, oax2, orad2))
        if record_radial:
            radial.append(pos[:, 1:3] * scales.w0)

    chi_m, UN, f = schedule.raw(tau0)
    sample(tau0, math.sqrt(f * (1.0 - chi_m)))
    tau = tau0
    for i in range(n_out):
        chi_m, UN, f = schedule.raw(tau)
        s = math.sqrt(f * (1.0 - chi_m))
        if s <= 0:
            raise ValueError("the locked mode must carry power")
        a = complex(_srkn_run(pos, vel, a, steps_per_out, dt, s, math.sqrt(f * chi_m), UN,
                              oax2, orad2, frozen_field, _KICK, _DRIFT))
        tau = tau0 + (i + 1) * steps_per_out * dt
        if not (np.isfinite(a.real) and np.isfinite(a.imag) and np.all(np.isfinite(pos))
                and np.all(np.isfinite(vel))):
            raise NonFiniteState(f"non-finite state at tau={tau}")
        sample(tau, s)

    cols = list(zip(*rows))
    return ObservableTrace(
        tau=np.array(cols[0]),
        a=np.array(cols[1], dtype=complex),
        sigma_z=np.array(cols[2]),
        sigma_r=np.array(cols[3]),
        sigma_pr=np.array(cols[4]),
        g_mod=np.array(cols[5]),
        E_kin_ax=np.array(cols[6]),
        E_kin_rad=np.array(cols[7]),
        gamma_c=scales.gamma_c,
        energy=np.array(energies) if track_energy else None,
        radial=np.array(radial) if record_radial else None,
        manifest={"dt": dt, "steps_per_output": steps_per_out, "frozen_field": frozen_field,
                  "scales": asdict(scales)},
    )


def thermal_ensemble(seed: int, N_sim: int, scales: LatticeScales, s: float, a: complex,
                     eta_ax: float, eta_rad: float) -> ParticleEnsemble:
    """Cloud whose thermal energy is ``eta`` times the well depths of the field (s, a).

    The axial reference is the peak-to-peak lattice modulation, the radial
    one the antinode depth; the cloud sits in the well selected by arg a.
    """
    a_mod = abs(a)
    depth_ax = 4.0 * scales.light_shift_energy * s * a_mod
    depth_rad = scales.light_shift_energy * (s + a_mod) ** 2
    sigma_z, sigma_r = thermal_spreads(eta_ax, eta_rad, scales.k, scales.w0)
    z_center = 0.5 * np.angle(a) / scales.k
    return init_ensemble(seed, N_sim, sigma_z, sigma_r, eta_ax * depth_ax / K_B,
                         eta_rad * depth_rad / K_B, scales.mass, z_center)


def simulate(schedule: DriveSchedule, a_init: complex, scales: LatticeScales, *, N_sim: int,
             seed: int, eta_ax: float, eta_rad: float, t_end: float, stride: float,
             steps_per_period: int = FASTEST_STEPS_PER_PERIOD, record_radial: bool = False):
    """Full-model run from a thermal cloud matched to the initial field.

    ``t_end`` and ``stride`` are in seconds. The step resolves the axial
    period of the symmetric empty-cavity lattice, the deepest one the
    pump can build, ``steps_per_period`` times.
    """
    gc = scales.gamma_c
    chi_m, _, f = schedule.raw(0.0)
    s = math.sqrt(f * (1.0 - chi_m))
    ens = thermal_ensemble(seed, N_sim, scales, s, a_init, eta_ax, eta_rad)
    sym = math.sqrt(0.5 * max(f, 1.0))
    dt = scales.axial_period_tau(sym, sym) / steps_per_period
    trace = integrate_full(ens, a_init, schedule, (0.0, gc * t_end), dt, gc * stride, scales,
                           record_radial=record_radial)
    trace.manifest.update({"seed": seed, "N_sim": N_sim, "eta_ax": eta_ax, "eta_rad": eta_rad})
    return trace


# ------------------------------------------------------------ spectral tools


def _moving_mean(x, n):
    if n <= 1:
        return np.zeros_like(x)
    kernel = np.ones(n) / n
    padded = np.pad(x, (n // 2, n - 1 - n // 2), mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def _detrended(t, x, window, detrend_time):
    """Slice ``window`` out of one or several equally sampled records and remove a moving mean."""
    t = np.asarray(t, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    t, x = t[sel], x[:, sel]
    if len(t) < 16:
        raise ValueError("window holds too few samples")
    dt = float(np.median(np.diff(t)))
    n = max(1, int(round(detrend_time / dt)))
    return t, np.array([row - _moving_mean(row, n) for row in x]), dt


def _parabolic_peak(freqs, power, band):
    idx = np.flatnonzero((freqs >= band[0]) & (freqs <= band[1]))
    if len(idx) < 3:
        raise ValueError("frequency band too narrow for this window")
    j = idx[np.argmax(power[idx])]
    offset = 0.0
    if 0 < j < len(power) - 1:
        p0, p1, p2 = power[j - 1], power[j], power[j + 1]
        denom = p0 - 2 * p1 + p2
        if denom != 0:
            offset = 0.5 * (p0 - p2) / denom
    return j, float(freqs[j] + offset * (freqs[1] - freqs[0])), idx


@dataclass(frozen=True)
class BreathingPeak:
    f_peak: float
    amplitude: float


def breathing_frequency(t, x, window, *, detrend_time: float = 2e-3, band=(100.0, 1e4),
                        min_periods: float = 8.0, significance: float = 10.0):
    """Dominant oscillation frequency (Hz) of ``x(t)`` inside ``window`` (seconds).

    Subtracts a moving mean of length ``detrend_time``, takes a Hann-windowed
    periodogram and refines the strongest bin in ``band`` by a parabola
    through its neighbours. ``x`` may hold several independent records on
    the same time grid (one per row); their periodograms are averaged.
    Returns None if the peak does not stand out by ``significance`` over the
    median in-band power.
    """
    t, y, dt = _detrended(t, x, window, detrend_time)
    freqs, power = signal.periodogram(y, fs=1.0 / dt, window="hann", scaling="spectrum", axis=-1)
    power = power.mean(axis=0)
    j, f_peak, idx = _parabolic_peak(freqs, power, band)
    if power[j] == 0 or power[j] <= significance * np.median(power[idx]):
        return None
    if (t[-1] - t[0]) * f_peak < min_periods:
        raise ValueError(f"window spans fewer than {min_periods} periods at {f_peak:.1f} Hz")
    # spectrum scaling reports (rms)^2; a sinusoid's amplitude is sqrt(2 P)
    return BreathingPeak(f_peak, float(math.sqrt(2.0 * power[j])))


def breathing_centroid(t, x, window, *, highpass: float = 200.0, band=(100.0, 5e3),
                       floor_band=(1e4, 4e4)) -> float:
    """Mean frequency (Hz) of the floor-subtracted power of ``x(t)`` inside ``band``.

    A broad breathing band has an unstable argmax but a stable centroid.
    Slow drifts are removed by a zero-phase Butterworth high-pass, which
    unlike a moving mean leaves the pass band flat. The white floor is the
    mean power in ``floor_band``. Several records are analysed one by one
    and their centroids averaged with equal weight, so a run with an
    unusually strong excursion does not dominate.
    """
    t = np.asarray(t, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sel = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(sel) < 64:
        raise ValueError("window holds too few samples")
    dt = float(np.median(np.diff(t[sel])))
    if floor_band[1] > 0.5 / dt:
        raise ValueError("floor band extends past the Nyquist frequency")
    sos = signal.butter(4, highpass, btype="highpass", fs=1.0 / dt, output="sos")
    y = signal.sosfiltfilt(sos, x[:, sel], axis=-1)
    freqs, power = signal.periodogram(y, fs=1.0 / dt, window="hann", scaling="spectrum", axis=-1)
    floor = power[:, (freqs >= floor_band[0]) & (freqs <= floor_band[1])].mean(axis=1)
    in_band = (freqs >= band[0]) & (freqs <= band[1])
    excess = power[:, in_band] - floor[:, None]
    weight = excess.sum(axis=1)
    if not np.all(weight > 0):
        raise ValueError("a record has no power above the floor inside the band")
    return float(np.mean(excess @ freqs[in_band] / weight))


def radial_vibration_frequency(traces, window, *, band=(50.0, 5e3), bound_radius: float = 2.0):
    """Peak of the atom-averaged spectrum of single-atom transverse coordinates (Hz).

    Atoms that leave ``bound_radius`` mode radii inside the window are
    skipped. Accepts one trace or a list; all need ``record_radial``.
    """
    if isinstance(traces, ObservableTrace):
        traces = [traces]
    columns = []
    freqs = None
    for trace in traces:
        if trace.radial is None:
            raise ValueError("trace holds no per-atom radial coordinates")
        t = trace.t_seconds
        sel = (t >= window[0]) & (t <= window[1])
        xy = trace.radial[sel]
        w0 = trace.manifest["scales"]["w0"]
        bound = np.all(np.hypot(xy[:, :, 0], xy[:, :, 1]) < bound_radius * w0, axis=0)
        if not np.any(bound):
            continue
        dt = float(np.median(np.diff(t[sel])))
        coords = xy[:, bound, :].reshape(xy.shape[0], -1)
        freqs, power = signal.periodogram(coords, fs=1.0 / dt, window="hann", axis=0,
                                          scaling="spectrum")
        columns.append(power)
    if not columns:
        return None
    mean_power = np.concatenate(columns, axis=1).mean(axis=1)
    return _parabolic_peak(freqs, mean_power, band)[1]


def phase_lag(t, x, y, f, window, *, detrend_time: float = 2e-3) -> float:
    """Phase of ``x`` relative to ``y`` (rad, in (-pi, pi]) at frequency ``f``.

    With several records per argument the cross terms are summed first.
    """
    tx, xd, _ = _detrended(t, x, window, detrend_time)
    _, yd, _ = _detrended(t, y, window, detrend_time)
    w = np.hanning(len(tx))
    basis = np.exp(-2j * math.pi * f * (tx - tx[0]))
    cx = (xd * w * basis).sum(axis=1)
    cy = (yd * w * basis).sum(axis=1)
    return float(np.angle(np.sum(cx * np.conj(cy))))


def power_law_exponent(x, y) -> float:
    """Least-squares slope of log y against log x."""
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)
