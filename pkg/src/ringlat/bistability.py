"""Steady states and fold structure of the eliminated phase flow.

Roots are bracketed on a uniform phase grid and refined by bisection; the
sign of the analytic slope decides stability. Branches over UN are stitched
by nearest-phase matching, and folds are pinned down by bisecting on UN
where the root count changes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .adiabatic import rhs_eliminated, rhs_eliminated_slope
from .localization import LocalizationKnobs

GRID_POINTS = 4096
EDGE = 1e-6
PHI_TOL = 1e-10
MATCH_THRESHOLD = 0.2
FOLD_TOL = 1e-4


@dataclass(frozen=True)
class SteadyState:
    phi: float
    a_mod: float
    stable: bool

    @property
    def intensity(self) -> float:
        return self.a_mod * self.a_mod


def _grid(n=GRID_POINTS):
    return np.linspace(-math.pi / 2 + EDGE, math.pi / 2 - EDGE, n)


def _bisect(f, lo, hi, f_lo, tol=PHI_TOL):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def steady_states(UN: float, chi0_minus: float, knobs: LocalizationKnobs,
                  n_grid: int = GRID_POINTS) -> list[SteadyState]:
    """All zeros of the eliminated flow on (-pi/2, pi/2), sorted by phase."""
    if not 0.0 < chi0_minus < 1.0:
        raise ValueError("chi0_minus must lie strictly between 0 and 1")
    chi0_plus = 1.0 - chi0_minus
    phi = _grid(n_grid)
    values = rhs_eliminated(phi, knobs, chi0_plus, chi0_minus, UN)

    def F(p):
        return rhs_eliminated(p, knobs, chi0_plus, chi0_minus, UN)

    roots = []
    brackets = np.flatnonzero((values[:-1] == 0.0) | (values[:-1] * values[1:] < 0))
    for i in brackets:
        if values[i] == 0.0:
            roots.append(float(phi[i]))
        else:
            roots.append(_bisect(F, float(phi[i]), float(phi[i + 1]), float(values[i])))
    if not roots:
        raise RuntimeError(f"no steady state found at UN={UN}, chi0_minus={chi0_minus}")
    sq_m = math.sqrt(chi0_minus)
    return [
        SteadyState(p, sq_m * math.cos(p),
                    rhs_eliminated_slope(p, knobs, chi0_plus, chi0_minus, UN) < 0)
        for p in roots
    ]


@dataclass
class BranchDiagram:
    chi0_minus: float
    UN: np.ndarray
    states: list[list[SteadyState]]
    branch_ids: list[list[int]]
    folds: list[tuple[float, float]] = field(default_factory=list)

    def rows(self):
        for un, row, ids in zip(self.UN, self.states, self.branch_ids):
            for s, b in zip(row, ids):
                yield float(un), s.phi, s.intensity, s.stable, b

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["UN", "phi", "intensity", "stable", "branch_id"])
            for un, phi, inten, stable, b in self.rows():
                w.writerow([repr(un), repr(phi), repr(inten), int(stable), b])

    def summary(self) -> dict:
        rng = range_from_folds(self)
        return {
            "chi0_minus": self.chi0_minus,
            "folds": [{"UN": u, "phi": p} for u, p in self.folds],
            "bistability_range": None if rng is None else
            {"low": rng[0], "high": None if math.isinf(rng[1]) else rng[1]},
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def _match(prev_phis, prev_ids, phis, next_id):
    """Assign branch ids by nearest phase; unmatched roots open new branches."""
    ids = [-1] * len(phis)
    taken = set()
    pairs = sorted(
        (abs(p - q), i, j) for i, p in enumerate(phis) for j, q in enumerate(prev_phis)
    )
    for dist, i, j in pairs:
        if dist > MATCH_THRESHOLD or ids[i] != -1 or j in taken:
            continue
        ids[i] = prev_ids[j]
        taken.add(j)
    for i in range(len(ids)):
        if ids[i] == -1:
            ids[i] = next_id
            next_id += 1
    return ids, next_id


def _locate_fold(lo, hi, n_lo, chi0_minus, knobs, n_grid):
    """Bisect on UN between two samples with different root counts."""
    while hi - lo > FOLD_TOL:
        mid = 0.5 * (lo + hi)
        if len(steady_states(mid, chi0_minus, knobs, n_grid)) == n_lo:
            lo = mid
        else:
            hi = mid
    # the merging pair sits on the many-root side; report its midpoint phase
    lo_states = steady_states(lo, chi0_minus, knobs, n_grid)
    hi_states = steady_states(hi, chi0_minus, knobs, n_grid)
    many = lo_states if len(lo_states) > len(hi_states) else hi_states
    few = hi_states if many is lo_states else lo_states
    survivors = {min(range(len(many)), key=lambda i: abs(many[i].phi - s.phi)) for s in few}
    merged = [many[i].phi for i in range(len(many)) if i not in survivors]
    phi = float(np.mean(merged)) if merged else float("nan")
    return 0.5 * (lo + hi), phi


def continuation_scan(UN_range, n_samples: int, chi0_minus: float, knobs: LocalizationKnobs,
                      n_grid: int = GRID_POINTS) -> BranchDiagram:
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    UN = np.linspace(UN_range[0], UN_range[1], n_samples)
    states, ids = [], []
    next_id = 0
    for un in UN:
        row = steady_states(float(un), chi0_minus, knobs, n_grid)
        if not states:
            row_ids = list(range(len(row)))
            next_id = len(row)
        else:
            row_ids, next_id = _match([s.phi for s in states[-1]], ids[-1], [s.phi for s in row],
                                      next_id)
        states.append(row)
        ids.append(row_ids)
    folds = []
    for i in range(n_samples - 1):
        if len(states[i]) != len(states[i + 1]):
            folds.append(_locate_fold(float(UN[i]), float(UN[i + 1]), len(states[i]),
                                      chi0_minus, knobs, n_grid))
    return BranchDiagram(chi0_minus, UN, states, ids, folds)


def range_from_folds(diagram: BranchDiagram):
    """(low, high) of the three-state window; high is inf if it reaches the scan end."""
    counts = [len(r) for r in diagram.states]
    if max(counts) < 3:
        return None
    multi = [i for i, c in enumerate(counts) if c >= 3]
    first, last = multi[0], multi[-1]
    fold_uns = [u for u, _ in diagram.folds]

    def nearest_fold(x):
        return min(fold_uns, key=lambda u: abs(u - x)) if fold_uns else x

    low = nearest_fold(0.5 * (diagram.UN[first] + diagram.UN[max(first - 1, 0)])) \
        if first > 0 else float(diagram.UN[0])
    if last == len(counts) - 1:
        high = math.inf
    else:
        high = nearest_fold(0.5 * (diagram.UN[last] + diagram.UN[last + 1]))
    return float(low), float(high)


def bistability_range(chi0_minus: float, knobs: LocalizationKnobs, UN_max: float,
                      n_samples: int | None = None, n_grid: int = GRID_POINTS):
    """Window of UN with coexisting stable states, or None if monostable up to ``UN_max``."""
    if n_samples is None:
        n_samples = max(64, int(round(UN_max * 40)) + 1)
    diagram = continuation_scan((0.0, UN_max), n_samples, chi0_minus, knobs, n_grid)
    return range_from_folds(diagram)


@dataclass(frozen=True)
class HysteresisPoint:
    UN: float
    phi: float
    intensity: float
    jumped: bool


def hysteresis_sweep(direction: str, UN_samples, chi0_minus: float, knobs: LocalizationKnobs,
                     n_grid: int = GRID_POINTS) -> list[HysteresisPoint]:
    """Quasi-static branch following in the order given by ``direction``."""
    samples = np.asarray(UN_samples, dtype=float)
    diffs = np.diff(samples)
    if direction == "up":
        ok = np.all(diffs >= 0)
    elif direction == "down":
        ok = np.all(diffs <= 0)
    else:
        raise ValueError("direction must be 'up' or 'down'")
    if not ok:
        raise ValueError(f"UN samples are not monotone for a {direction} sweep")

    trace = []
    phi_prev = None
    for un in samples:
        stable = [s for s in steady_states(float(un), chi0_minus, knobs, n_grid) if s.stable]
        if phi_prev is None:
            # start on the state reached by slowly approaching from the sweep origin
            pick = min(stable, key=lambda s: abs(s.phi))
            jumped = False
        else:
            pick = min(stable, key=lambda s: abs(s.phi - phi_prev))
            jumped = abs(pick.phi - phi_prev) > MATCH_THRESHOLD
        trace.append(HysteresisPoint(float(un), pick.phi, pick.intensity, jumped))
        phi_prev = pick.phi
    return trace


def threshold_scan(chi_values, knobs_for, UN_max: float = 6.0, n_samples: int = 241):
    """First chi0_minus on the grid showing bistability below ``UN_max``.

    ``knobs_for(chi)`` supplies the localization knobs for each asymmetry.
    Returns (threshold or None, {chi: range}).
    """
    ranges = {}
    threshold = None
    for chi in sorted(chi_values):
        rng = bistability_range(chi, knobs_for(chi), UN_max, n_samples)
        ranges[chi] = rng
        if rng is not None and threshold is None:
            threshold = chi
    return threshold, ranges
