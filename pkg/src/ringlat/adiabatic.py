"""Reduced field dynamics of the unlocked cavity mode.

The production path is the complex equation for the scaled amplitude ``a``
with the atoms adiabatically following the lattice. The phase/amplitude split
and the one-dimensional phase flow (amplitude eliminated) are kept for
analysis and cross-checks.
"""

from __future__ import annotations

import bisect
import cmath
import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .localization import LocalizationKnobs, adiabatic_L, ltilde
from .ode import dopri5
from .params import ScaledParams

A_MIN = 1e-9
FLAG_FLOOR = 1


@dataclass(frozen=True)
class FieldState:
    a: complex

    @classmethod
    def from_polar(cls, a_mod: float, phi: float) -> "FieldState":
        return cls(cmath.rect(a_mod, phi))

    @property
    def a_mod(self) -> float:
        return abs(self.a)

    @property
    def phi(self) -> float:
        return cmath.phase(self.a)


@dataclass(frozen=True)
class DriveValues:
    chi0_minus: float
    UN: float
    i0_factor: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.chi0_minus <= 1.0:
            raise ValueError(f"chi0_minus out of [0, 1]: {self.chi0_minus}")
        if not self.UN >= 0:
            raise ValueError(f"UN must be non-negative: {self.UN}")
        if not self.i0_factor >= 0:
            raise ValueError(f"i0_factor must be non-negative: {self.i0_factor}")

    @property
    def chi0_plus(self) -> float:
        return 1.0 - self.chi0_minus


class StepFunction:
    """Right-continuous piecewise-constant function of scaled time.

    ``values[0]`` applies before ``edges[0]``, ``values[i]`` on
    ``[edges[i-1], edges[i])``.
    """

    def __init__(self, edges, values):
        edges = [float(e) for e in edges]
        values = [float(v) for v in values]
        if len(values) != len(edges) + 1:
            raise ValueError("need exactly one more value than edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly increasing")
        self.edges = edges
        self.values = values

    @property
    def breakpoints(self):
        return tuple(self.edges)

    def __call__(self, tau):
        return self.values[bisect.bisect_right(self.edges, tau)]


def _as_callable(value):
    if callable(value):
        return value
    constant = float(value)
    return lambda tau: constant


@dataclass
class DriveSchedule:
    """Pump split, total-power multiplier and interaction strength versus tau.

    Each entry is a constant or a callable of scaled time. Callables that
    carry a ``breakpoints`` attribute (``StepFunction``) contribute their
    discontinuities automatically; others can be listed in ``breakpoints``.
    """

    chi0_minus: float | Callable[[float], float]
    UN: float | Callable[[float], float]
    i0_factor: float | Callable[[float], float] = 1.0
    breakpoints: tuple = ()
    _funcs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self._funcs = (
            _as_callable(self.chi0_minus),
            _as_callable(self.UN),
            _as_callable(self.i0_factor),
        )

    def all_breakpoints(self):
        points = set(float(b) for b in self.breakpoints)
        for entry in (self.chi0_minus, self.UN, self.i0_factor):
            points.update(getattr(entry, "breakpoints", ()))
        return sorted(points)

    def raw(self, tau):
        fc, fu, fi = self._funcs
        return fc(tau), fu(tau), fi(tau)

    def at(self, tau) -> DriveValues:
        return DriveValues(*self.raw(tau))


@dataclass
class FieldTrace:
    tau: np.ndarray
    a: np.ndarray
    UN: np.ndarray
    L: np.ndarray
    flags: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def chi_minus(self) -> np.ndarray:
        return np.abs(self.a) ** 2

    @property
    def phi(self) -> np.ndarray:
        return np.angle(self.a)

    def to_csv(self, path, gamma_c: float):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau", "t_seconds", "chi_minus", "phi", "UN", "L", "flags"])
            for row in zip(self.tau, self.chi_minus, self.phi, self.UN, self.L, self.flags):
                tau, chi, phi, un, lval, flag = row
                writer.writerow([repr(float(tau)), repr(float(tau / gamma_c)), repr(float(chi)),
                                 repr(float(phi)), repr(float(un)), repr(float(lval)), int(flag)])


def _localization(a_mod, chi_p, f, eta_ax, eta_rad, a0):
    sf = math.sqrt(f)
    sp_plus = math.sqrt(chi_p)
    axial = math.exp(-eta_ax * math.sqrt(a0 / (sf * a_mod))) if eta_ax else 1.0
    return axial / (1.0 + eta_rad * (sp_plus + a0) / (sf * sp_plus + a_mod))


def _derivative(a, UN, chi_m, f, eta_ax, eta_rad, a0, a_min):
    """Complex derivative, localization factor and floor flag."""
    a_mod = abs(a)
    clamped = a_mod < a_min
    if clamped:
        a_mod = a_min
    chi_p = 1.0 - chi_m
    sf = math.sqrt(f)
    sp_plus = sf * math.sqrt(chi_p)
    L = _localization(a_mod, chi_p, f, eta_ax, eta_rad, a0)
    d = (1j * (UN / sp_plus) * L * a_mod * a - a + sf * math.sqrt(chi_m)
         - 1j * UN * sp_plus * L * (a / a_mod))
    return d, L, clamped


def rhs_complex(a: complex, drive: DriveValues, sp: ScaledParams, a_min: float = A_MIN) -> complex:
    """da/dtau of the adiabatic model.

    i (UN/sqrt(chi0+)) L |a| a - a + sqrt(chi0-) - i UN sqrt(chi0+) L a/|a|,
    with both pump amplitudes (the locked one included) multiplied by
    sqrt(i0_factor). Below ``a_min`` the modulus is clamped.
    """
    d, _, _ = _derivative(complex(a), drive.UN, drive.chi0_minus, drive.i0_factor,
                          sp.eta_ax, sp.eta_rad, sp.a0_mod, a_min)
    return d


def rhs_phase_amplitude(a_mod: float, phi: float, drive: DriveValues, sp: ScaledParams,
                        a_min: float = A_MIN) -> tuple[float, float]:
    """(d|a|/dtau, dphi/dtau) of the polar form of the adiabatic model."""
    m = max(a_mod, a_min)
    sf = math.sqrt(drive.i0_factor)
    sp_plus = sf * math.sqrt(drive.chi0_plus)
    sp_minus = sf * math.sqrt(drive.chi0_minus)
    L = adiabatic_L(m, sp, drive.chi0_plus, drive.i0_factor)
    d_mod = sp_minus * math.cos(phi) - a_mod
    d_phi = (drive.UN * L * (m * m / sp_plus - sp_plus) - sp_minus * math.sin(phi)) / m
    return d_mod, d_phi


def rhs_eliminated(phi, knobs: LocalizationKnobs, chi0_plus: float, chi0_minus: float, UN: float):
    """dphi/dtau with the amplitude slaved to sqrt(chi0-) cos phi.

    Obtained by dividing the phase equation by |a| = sqrt(chi0-) cos phi, so
    its zeros are exactly the fixed points of the complex field equation.

    Vectorized over ``phi``; requires |phi| < pi/2.
    """
    cos_phi = np.cos(phi)
    Lt = ltilde(phi, knobs, chi0_plus, chi0_minus)
    out = (UN / math.sqrt(chi0_minus * chi0_plus) * Lt * (chi0_minus * cos_phi - chi0_plus / cos_phi)
           - np.tan(phi))
    return float(out) if np.ndim(out) == 0 else out


def rhs_eliminated_slope(phi, knobs: LocalizationKnobs, chi0_plus: float, chi0_minus: float, UN: float):
    """Analytic d/dphi of ``rhs_eliminated``."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    sq_p, sq_m = math.sqrt(chi0_plus), math.sqrt(chi0_minus)
    P = 8.0 / math.sqrt(chi0_plus * chi0_minus)
    E = np.exp(-knobs.ax_knob * np.sqrt(P / c))
    dE = -E * knobs.ax_knob * math.sqrt(P) * s / (2.0 * c ** 1.5)
    denom_r = sq_p + sq_m * c
    D = 1.0 + knobs.rad_knob / denom_r
    dD = knobs.rad_knob * sq_m * s / denom_r ** 2
    Lt = E / D
    dLt = (dE * D - E * dD) / D ** 2
    h = chi0_minus * c - chi0_plus / c
    dh = -chi0_minus * s - chi0_plus * s / c ** 2
    A = UN / math.sqrt(chi0_minus * chi0_plus)
    out = A * (dLt * h + Lt * dh) - 1.0 / c ** 2
    return float(out) if out.ndim == 0 else out


def atom_number(t, N0: float, gamma_bg: float, q: float):
    """Closed-form solution of dN/dt = -gamma_bg N - q N^2 (t in seconds)."""
    t = np.asarray(t, dtype=float)
    if gamma_bg > 0:
        growth = -np.expm1(-gamma_bg * t) / gamma_bg
    else:
        growth = t
    out = N0 * np.exp(-gamma_bg * t) / (1.0 + q * N0 * growth)
    return float(out) if out.ndim == 0 else out


def atom_number_schedule(N0: float, gamma_bg: float, q: float) -> Callable:
    """N(t) for background loss ``gamma_bg`` (1/s) and two-body coefficient ``q`` (1/s per atom)."""
    if not (N0 > 0 and gamma_bg >= 0 and q >= 0):
        raise ValueError("need N0 > 0, gamma_bg >= 0, q >= 0")

    def N(t):
        return atom_number(t, N0, gamma_bg, q)

    return N


def un_schedule(UN0: float, gamma_bg: float, two_body_rate: float, gamma_c: float,
                scale: float = 1.0) -> Callable:
    """UN(tau) for an initial interaction strength decaying with the atom number.

    ``two_body_rate`` is q N0 (1/s); ``scale`` multiplies UN0 (the calibration
    factor between measured and model atom numbers, 1 by default).
    """
    N = atom_number_schedule(1.0, gamma_bg, two_body_rate)
    UN0 = UN0 * scale

    def UN(tau):
        return UN0 * N(tau / gamma_c)

    return UN


def integrate(initial: FieldState | complex, schedule: DriveSchedule, tau_span, sp: ScaledParams, *,
              output_stride: float = 1.0, rtol: float = 1e-8, atol: float = 1e-10,
              a_min: float = A_MIN, max_step: float = math.inf) -> FieldTrace:
    """Integrate the adiabatic model over ``tau_span`` and sample on a fixed stride.

    The integration restarts at every schedule breakpoint so that no step
    straddles a discontinuity. Samples where the field modulus was clamped
    to ``a_min`` since the previous sample carry ``FLAG_FLOOR``.
    """
    tau0, tau1 = float(tau_span[0]), float(tau_span[1])
    if not (math.isfinite(tau0) and math.isfinite(tau1) and tau1 > tau0):
        raise ValueError("tau_span must be finite and increasing")
    a = initial.a if isinstance(initial, FieldState) else complex(initial)

    n_out = int(math.floor((tau1 - tau0) / output_stride + 1e-9))
    samples = [tau0 + i * output_stride for i in range(n_out + 1)]
    if tau1 - samples[-1] > 1e-9 * output_stride:
        samples.append(tau1)
    edges = [b for b in schedule.all_breakpoints() if tau0 < b < tau1]
    bounds = [tau0] + edges + [tau1]

    eta_ax, eta_rad, a0 = sp.eta_ax, sp.eta_rad, sp.a0_mod
    raw = schedule.raw
    latch = {"clamped": False}
    out_a = [a]
    out_flags = [FLAG_FLOOR if abs(a) < a_min else 0]

    def record(tau, y):
        out_flags.append(FLAG_FLOOR if latch["clamped"] else 0)
        latch["clamped"] = False

    stats = {"accepted": 0, "rejected": 0, "nfev": 0}
    sample_iter = 1
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        hi_left = math.nextafter(hi, -math.inf)

        def rhs(tau, y, hi_left=hi_left):
            chi_m, UN, f = raw(tau if tau < hi_left else hi_left)
            d, _, clamped = _derivative(y, UN, chi_m, f, eta_ax, eta_rad, a0, a_min)
            if clamped:
                latch["clamped"] = True
            return d

        seg_samples = []
        while sample_iter < len(samples) and samples[sample_iter] <= hi + 1e-12 * abs(hi):
            seg_samples.append(samples[sample_iter])
            sample_iter += 1
        t_targets = list(seg_samples)
        if not t_targets or t_targets[-1] < hi:
            t_targets.append(hi)
        n_keep = len(seg_samples)
        calls = {"n": 0}

        def on_output(tau, y, n_keep=n_keep, calls=calls):
            calls["n"] += 1
            if calls["n"] <= n_keep:
                record(tau, y)

        ys, st = dopri5(rhs, lo, a, t_targets, rtol=rtol, atol=atol, max_step=max_step,
                        on_output=on_output)
        for key in ("accepted", "rejected", "nfev"):
            stats[key] += st[key]
        out_a.extend(ys[:n_keep])
        a = ys[-1]

    tau_arr = np.array(samples)
    a_arr = np.array(out_a, dtype=complex)
    UN_arr = np.empty(len(samples))
    L_arr = np.empty(len(samples))
    for i, (tau, av) in enumerate(zip(samples, out_a)):
        chi_m, UN, f = raw(tau)
        _, L, _ = _derivative(av, UN, chi_m, f, eta_ax, eta_rad, a0, a_min)
        UN_arr[i] = UN
        L_arr[i] = L
    flags = np.array(out_flags, dtype=np.int64)
    stats["floor_events"] = int(np.count_nonzero(flags))
    return FieldTrace(tau_arr, a_arr, UN_arr, L_arr, flags, stats)
