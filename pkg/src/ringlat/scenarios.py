"""Named scenarios: each reads a resolved parameter dict and writes CSV/JSON files."""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.integrate import solve_ivp

from .adiabatic import (DriveSchedule, DriveValues, FieldState, StepFunction, atom_number,
                        integrate, rhs_complex, un_schedule)
from .bistability import continuation_scan, range_from_folds, steady_states, threshold_scan
from .config import ScenarioConfig
from .dynamics import (LatticeScales, breathing_centroid, breathing_frequency, phase_lag,
                       power_law_exponent, radial_vibration_frequency, rescale_for_simulation,
                       simulate, thread_count)
from .io import OutputDir
from .localization import knobs_from_eta
from .params import PhysicalParams, ScaledParams
from .thermo import fit_trap_decay, heating_rates, psd_one_sided, spot_spectrum, NoiseSpectrum


class ScenarioError(RuntimeError):
    """A scenario precondition failed."""


PHYS = PhysicalParams.rb85()


def _pct(chi: float) -> str:
    return f"{chi * 100:.0f}"


def _knobs(chi, eta_ax, eta_rad, a0):
    return knobs_from_eta(ScaledParams(UN=0.0, eta_ax=eta_ax, eta_rad=eta_rad, a0_mod=a0), 1.0 - chi)


def low_intensity_state(UN: float, chi: float, eta_ax: float, eta_rad: float, a0: float) -> complex:
    """Field of the steady state with the largest |phi|, i.e. the dimmest one."""
    states = steady_states(UN, chi, _knobs(chi, eta_ax, eta_rad, a0))
    s = max(states, key=lambda q: abs(q.phi))
    return FieldState.from_polar(s.a_mod, s.phi).a


def crossing_time(t, x, level):
    """First time ``x`` reaches ``level`` from below, linearly interpolated; None if never."""
    x = np.asarray(x)
    if x[0] >= level:
        return None
    idx = np.flatnonzero(x >= level)
    if not len(idx):
        return None
    i = int(idx[0])
    t0, t1, x0, x1 = t[i - 1], t[i], x[i - 1], x[i]
    return float(t0 + (level - x0) * (t1 - t0) / (x1 - x0))


def _parallel(fn, items):
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _write_field_trace(out: OutputDir, name: str, trace, gamma_c: float, offset: float = 0.0):
    rows = ((float(tau), float(tau / gamma_c - offset), float(abs(a) ** 2), float(np.angle(a)),
             float(un), float(lval))
            for tau, a, un, lval in zip(trace.tau, trace.a, trace.UN, trace.L))
    out.write_csv(name, ["tau", "t_seconds", "chi_minus", "phi", "UN", "L"], rows)


def _save_trace(out: OutputDir, name: str, trace):
    if "csv" in out.formats:
        trace.to_csv(out.path(name))
        out.adopt(name)


# ----------------------------------------------------------------- scenarios


def fig2_diagram(p: dict, out: OutputDir, seed: int) -> dict:
    ranges = {}
    for chi in p["chi0_minus"]:
        knobs = _knobs(chi, p["eta_ax"], p["eta_rad"], math.sqrt(chi))
        diagram = continuation_scan((0.0, p["UN_max"]), p["n_samples"], chi, knobs)
        out.write_csv(f"branches_{_pct(chi)}.csv", ["UN", "phi", "intensity", "stable", "branch_id"],
                      ((un, phi, inten, int(stable), b)
                       for un, phi, inten, stable, b in diagram.rows()))
        out.write_json(f"folds_{_pct(chi)}.json", diagram.summary())
        rng = range_from_folds(diagram)
        ranges[_pct(chi)] = None if rng is None else list(rng)

    th = p["threshold"]
    n = int(round((th["chi_max"] - th["chi_min"]) / th["chi_step"])) + 1
    grid = [round(th["chi_min"] + i * th["chi_step"], 10) for i in range(n)]
    threshold, scan = threshold_scan(
        grid, lambda c: _knobs(c, p["eta_ax"], p["eta_rad"], math.sqrt(c)), p["UN_max"],
        p["n_samples"])
    summary = {
        "bistability_ranges": ranges,
        "threshold_chi0_minus": threshold,
        "threshold_scan": {_pct(c): (None if r is None else list(r)) for c, r in scan.items()},
    }
    out.write_json("threshold.json", summary)
    return summary


def empty_cavity(p: dict, out: OutputDir, seed: int) -> dict:
    gc = PHYS.gamma_c
    chi = p["chi0_minus"]
    a_init = complex(p["a_init_re"], p["a_init_im"])
    sp = ScaledParams(UN=0.0)
    trace = integrate(a_init, DriveSchedule(chi, 0.0), (0.0, gc * p["t_end"]), sp,
                      output_stride=gc * p["stride"], rtol=1e-10, atol=1e-12)
    target = math.sqrt(chi)
    exact = target + (a_init - target) * np.exp(-trace.tau)
    err = float(np.max(np.abs(trace.a - exact)))
    out.write_csv("trace.csv", ["tau", "t_seconds", "chi_minus", "chi_minus_exact"],
                  ((float(t), float(t / gc), float(abs(a) ** 2), float(abs(e) ** 2))
                   for t, a, e in zip(trace.tau, trace.a, exact)))
    summary = {"max_abs_error": err, "final_chi_minus": float(abs(trace.a[-1]) ** 2)}
    out.write_json("summary.json", summary)
    return summary


def _synthetic_decay(d: dict, seed: int):
    """Noisy samples of the background plus two-body law and their least-squares fit."""
    rng = np.random.Generator(np.random.PCG64(seed))
    t = np.linspace(0.0, d["t_max"], d["samples"])
    clean = atom_number(t, 1.0, d["gamma_bg"], d["two_body_rate"])
    data = clean * (1.0 + d["noise"] * rng.normal(size=len(t)))
    return t, data, fit_trap_decay(t, data)


def fig7_adiabatic(p: dict, out: OutputDir, seed: int) -> dict:
    if len(p["chi0_minus"]) != len(p["UN0"]):
        raise ScenarioError("chi0_minus and UN0 must have equal length")
    gc = PHYS.gamma_c
    t, data, fit = _synthetic_decay(p["decay"], seed)
    out.write_csv("decay.csv", ["t_seconds", "N_over_N0", "fit"],
                  zip(map(float, t), map(float, data), map(float, fit(t))))
    a0 = math.sqrt(p["a0_sq"])
    jumps = []
    for chi, un0 in zip(p["chi0_minus"], p["UN0"]):
        sp = ScaledParams(UN=un0, eta_ax=p["eta_ax"], eta_rad=p["eta_rad"], a0_mod=a0)
        a_init = low_intensity_state(un0, chi, p["eta_ax"], p["eta_rad"], a0)
        sched = DriveSchedule(chi, un_schedule(un0, fit.gamma_bg, fit.two_body_rate, gc))
        trace = integrate(a_init, sched, (0.0, gc * p["t_end"]), sp, output_stride=gc * p["stride"])
        _write_field_trace(out, f"trace_{_pct(chi)}.csv", trace, gc)
        t_jump = crossing_time(trace.tau / gc, trace.chi_minus, p["jump_fraction"] * chi)
        jumps.append({"chi0_minus": chi, "UN0": un0, "jump_time_s": t_jump,
                      "initial_chi_minus": float(abs(a_init) ** 2)})
    summary = {
        "decay_fit": {"gamma_bg": fit.gamma_bg, "two_body_rate": fit.two_body_rate,
                      "N0": fit.N0, "residual_rms": fit.residual_rms},
        "jumps": jumps,
    }
    out.write_json("jumps.json", summary)
    return summary


def plateau_windows(t_end: float, t_jump, settle: float):
    """(pre, post) windows of a trace, skipping ``settle`` around start and jump."""
    if t_jump is None:
        return (settle, t_end), None
    pre = (settle, t_jump - settle) if t_jump - settle > settle else None
    post = (t_jump + settle, t_end) if t_end - (t_jump + settle) > 0 else None
    return pre, post


def rms_relative_deviation(t, x, ref, window) -> float:
    sel = (t >= window[0]) & (t <= window[1])
    if not np.any(sel):
        raise ScenarioError(f"no samples inside window {window}")
    rel = (np.asarray(x)[sel] - np.asarray(ref)[sel]) / np.asarray(ref)[sel]
    return float(np.sqrt(np.mean(rel ** 2)))


def fig7_full(p: dict, out: OutputDir, seed: int) -> dict:
    """Full-model runs under the fig7 drive, compared with the adiabatic trace."""
    gc = PHYS.gamma_c
    a0 = math.sqrt(p["a0_sq"])
    scales = LatticeScales.from_axial_frequency(PHYS, p["nu_v"])
    cases = []
    for ci, (chi, un0) in enumerate(zip(p["chi0_minus"], p["UN0"])):
        sp = ScaledParams(UN=un0, eta_ax=p["eta_ax"], eta_rad=p["eta_rad"], a0_mod=a0)
        a_init = low_intensity_state(un0, chi, p["eta_ax"], p["eta_rad"], a0)
        sched = DriveSchedule(chi, un_schedule(un0, p["gamma_bg"], p["two_body_rate"], gc))
        ad = integrate(a_init, sched, (0.0, gc * p["t_end"]), sp, output_stride=gc * p["stride"])
        _write_field_trace(out, f"adiabatic_{_pct(chi)}.csv", ad, gc)
        t_ad = ad.tau / gc
        t_jump = crossing_time(t_ad, ad.chi_minus, p["jump_fraction"] * chi)
        pre, post = plateau_windows(p["t_end"], t_jump, p["settle"])

        def run(item, chi=chi, a_init=a_init, sched=sched, ci=ci):
            j, n_sim = item
            return simulate(sched, a_init, scales, N_sim=n_sim, seed=seed + 1000 * ci + j,
                            eta_ax=p["eta_ax"], eta_rad=p["eta_rad"], t_end=p["t_end"],
                            stride=p["stride"])

        traces = _parallel(run, list(enumerate(p["N_sim"])))
        per_n = []
        for n_sim, tr in zip(p["N_sim"], traces):
            _save_trace(out, f"full_{_pct(chi)}_N{n_sim}.csv", tr)
            m = min(len(tr.tau), len(ad.tau))
            x, ref, t = tr.chi_minus[:m], ad.chi_minus[:m], t_ad[:m]
            plan = rescale_for_simulation(p["N_real"], n_sim, PHYS)
            entry = {"N_sim": n_sim, "delta0_scaled": plan.delta0_scaled,
                     "intensity_factor": plan.intensity_factor,
                     "t_jump_s": crossing_time(t, x, p["jump_fraction"] * chi)}
            for label, w in (("pre", pre), ("post", post)):
                if w is None:
                    entry[f"{label}_rms"] = None
                    entry[f"{label}_level"] = None
                    continue
                sel = (t >= w[0]) & (t <= w[1])
                entry[f"{label}_rms"] = rms_relative_deviation(t, x, ref, w)
                entry[f"{label}_level"] = float(np.mean(x[sel]))
            per_n.append(entry)
        spread = {}
        for label in ("pre", "post"):
            levels = [e[f"{label}_level"] for e in per_n if e[f"{label}_level"] is not None]
            spread[label] = (None if len(levels) < 2 else
                             float((max(levels) - min(levels)) / np.mean(levels)))
        cases.append({"chi0_minus": chi, "UN0": un0, "adiabatic_jump_s": t_jump,
                      "pre_window": pre, "post_window": post, "runs": per_n,
                      "level_spread": spread})
    summary = {"cases": cases}
    out.write_json("crossval.json", summary)
    return summary


def fig8_step(p: dict, out: OutputDir, seed: int) -> dict:
    gc = PHYS.gamma_c
    chi = p["chi0_minus"]
    settle = p["settle"]
    if not (p["t_step"] < p["t_restore"] < p["t_end"]):
        raise ScenarioError("need t_step < t_restore < t_end")
    sp = ScaledParams(UN=p["UN"], eta_ax=p["eta_ax"], eta_rad=p["eta_rad"], a0_mod=math.sqrt(chi))
    edges = [gc * (settle + p["t_step"]), gc * (settle + p["t_restore"])]
    f = StepFunction(edges, [1.0, p["step_factor"], 1.0])
    sched = DriveSchedule(chi, p["UN"], f)
    trace = integrate(0j, sched, (0.0, gc * (settle + p["t_end"])), sp,
                      output_stride=gc * p["stride"])
    _write_field_trace(out, "trace.csv", trace, gc, offset=settle)
    t = trace.tau / gc - settle
    x = trace.chi_minus
    eps = 0.5 * p["stride"]
    pre = float(x[t <= p["t_step"] + eps][-1])
    during = (t > p["t_step"] + eps) & (t < p["t_restore"] - eps)
    low = float(x[during].min())
    t_min = float(t[during][np.argmin(x[during])])
    held = float(x[t < p["t_restore"] - eps][-1])
    final = float(x[-1])
    summary = {
        "pre_step": pre, "transient_min": low, "t_transient_min_s": t_min,
        "steady_during_step": held, "final": final,
        "anomalous": bool(low < held and held > pre),
        "restored_within_10pct": bool(abs(final - pre) <= 0.1 * pre),
    }
    out.write_json("summary.json", summary)
    return summary


def _breathing_runs(p, scales, seeds):
    sched = DriveSchedule(p["chi0_minus"], p["UN"])
    a_init = complex(math.sqrt(p["a0_sq"]))

    def run(s):
        return simulate(sched, a_init, scales, N_sim=p["N_sim"], seed=s, eta_ax=p["eta_ax"],
                        eta_rad=p["eta_rad"], t_end=p["t_end"], stride=p["stride"],
                        record_radial=True)

    return _parallel(run, list(seeds))


def harmonic_radial_frequency(scales: LatticeScales, s: float, a_mod: float) -> float:
    """Radial frequency (Hz) at the on-axis antinode for field moduli s and |a|."""
    omega = 2.0 * (s + a_mod) * math.sqrt(scales.light_shift_energy / scales.mass) / scales.w0
    return omega / (2.0 * math.pi)


def fig10_breathing(p: dict, out: OutputDir, seed: int) -> dict:
    window = tuple(p["window"])
    scales = LatticeScales.from_axial_frequency(PHYS, p["nu_v"])
    traces = _breathing_runs(p, scales, [seed + i for i in range(p["n_runs"])])
    for i, tr in enumerate(traces):
        _save_trace(out, f"trace_run{i}.csv", tr)
    t = traces[0].t_seconds
    chi = np.array([tr.chi_minus for tr in traces])
    peak = breathing_frequency(t, chi, window)
    nu_rad = radial_vibration_frequency(traces, window)
    sel = (t >= window[0]) & (t <= window[1])
    s = math.sqrt(1.0 - p["chi0_minus"])
    a_mean = float(np.sqrt(chi[:, sel].mean()))
    nu_rad_harm = harmonic_radial_frequency(scales, s, a_mean)
    lag = None
    if peak is not None:
        sig_r = np.array([tr.sigma_r for tr in traces])
        sig_p = np.array([tr.sigma_pr for tr in traces])
        lag = phase_lag(t, sig_r, sig_p, peak.f_peak, window)

    rows = []
    for k, factor in enumerate(p["depth"]["factors"]):
        if factor == 1.0:
            runs = traces  # identical configuration to the runs above
        else:
            sc = LatticeScales.from_axial_frequency(PHYS, p["nu_v"] * math.sqrt(factor))
            seeds = [seed + 10_000 * (k + 1) + i for i in range(p["depth"]["n_runs"])]
            runs = _breathing_runs(p, sc, seeds)
        rt = runs[0].t_seconds
        x = np.array([r.chi_minus for r in runs])
        pk = breathing_frequency(rt, x, window)
        rows.append((factor, p["nu_v"] * math.sqrt(factor), None if pk is None else pk.f_peak,
                     breathing_centroid(rt, x, window)))
    out.write_csv("depth_scan.csv", ["depth_factor", "nu_v", "f_peak", "f_centroid"],
                  ((f, n, "" if v is None else v, c) for f, n, v, c in rows))
    exponent = power_law_exponent([r[0] for r in rows], [r[3] for r in rows]) if len(rows) >= 2 else None

    summary = {
        "f_peak_hz": None if peak is None else peak.f_peak,
        "peak_amplitude": None if peak is None else peak.amplitude,
        "nu_rad_measured_hz": nu_rad,
        "two_nu_rad_measured_hz": None if nu_rad is None else 2.0 * nu_rad,
        "nu_rad_harmonic_hz": nu_rad_harm,
        "antiphase_rad": lag,
        "depth_exponent": exponent,
        "f_centroid_hz": breathing_centroid(t, chi, window),
        "depth_scan": [{"factor": f, "nu_v": n, "f_peak_hz": v, "f_centroid_hz": c}
                       for f, n, v, c in rows],
    }
    out.write_json("breathing.json", summary)
    return summary


def mot_switching_rhs(p: dict, sp: ScaledParams):
    """Joint field and UN flow; loading is linear in the axial well depth, clamped."""
    gc = PHYS.gamma_c
    chi = p["chi0_minus"]
    ref = math.sqrt(chi)
    R, cap, gbg, q = p["loading_rate"], p["depth_cap"], p["gamma_bg"], p["two_body"]

    def rhs(tau, y):
        a = complex(y[0], y[1])
        un = max(y[2], 0.0)
        d = rhs_complex(a, DriveValues(chi, un, 1.0), sp)
        depth = min(max(abs(a) / ref, 0.0), cap)
        dun = (R * depth - gbg * un - q * un * un) / gc
        return [d.real, d.imag, dun]

    return rhs


def switching_events(t, chi, level):
    """Times where chi crosses ``level`` (either direction)."""
    above = np.asarray(chi) >= level
    idx = np.flatnonzero(above[1:] != above[:-1]) + 1
    return [float(t[i]) for i in idx]


def fig11_mot_switching(p: dict, out: OutputDir, seed: int) -> dict:
    gc = PHYS.gamma_c
    chi = p["chi0_minus"]
    a0 = math.sqrt(p["a0_sq"])
    sp = ScaledParams(UN=p["UN0"], eta_ax=p["eta_ax"], eta_rad=p["eta_rad"], a0_mod=a0)
    a_init = low_intensity_state(p["UN0"], chi, p["eta_ax"], p["eta_rad"], a0)
    n = int(round(p["t_end"] / p["stride"]))
    t_eval = gc * p["stride"] * np.arange(n + 1)
    sol = solve_ivp(mot_switching_rhs(p, sp), (0.0, t_eval[-1]), [a_init.real, a_init.imag, p["UN0"]],
                    method="LSODA", t_eval=t_eval, rtol=1e-8, atol=1e-10)
    if not sol.success:
        raise ScenarioError(f"integration failed: {sol.message}")
    t = sol.t / gc
    chi_m = sol.y[0] ** 2 + sol.y[1] ** 2
    out.write_csv("trace.csv", ["t_seconds", "chi_minus", "phi", "UN"],
                  ((float(a), float(b), float(math.atan2(c, d)), float(e))
                   for a, b, c, d, e in zip(t, chi_m, sol.y[1], sol.y[0], sol.y[2])))
    events = switching_events(t, chi_m, p["jump_fraction"] * chi)
    ups = events[0::2] if chi_m[0] < p["jump_fraction"] * chi else events[1::2]
    periods = np.diff(ups)
    summary = {
        "model": "phenomenological MOT loading, linear in axial well depth",
        "switch_times_s": events,
        "cycles": max(len(ups) - 1, 0),
        "mean_period_s": float(periods.mean()) if len(periods) else None,
        "UN_range": [float(sol.y[2].min()), float(sol.y[2].max())],
    }
    out.write_json("switching.json", summary)
    return summary


def read_series(path: str):
    """One- or two-column CSV (intensity, or time and intensity); header line optional."""
    if not os.path.exists(path):
        raise ScenarioError(f"{path}: no such file")
    times, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                nums = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and not values:
                    continue  # header
                raise ScenarioError(f"{path}:{lineno}: not a number: {row!r}") from None
            if len(nums) == 1:
                values.append(nums[0])
            elif len(nums) == 2:
                times.append(nums[0])
                values.append(nums[1])
            else:
                raise ScenarioError(f"{path}:{lineno}: expected 1 or 2 columns, got {len(nums)}")
    if times and len(times) != len(values):
        raise ScenarioError(f"{path}: mixed one- and two-column rows")
    return (np.array(times) if times else None), np.array(values)


def noise_budget(p: dict, out: OutputDir, seed: int) -> dict:
    if p["series_path"]:
        times, values = read_series(p["series_path"])
        rate = p["sample_rate"]
        if rate <= 0:
            if times is None:
                raise ScenarioError("sample_rate is required for a one-column series")
            rate = 1.0 / float(np.median(np.diff(times)))
        seg = min(p["segment_length"], len(values) // 2)
        try:
            spectrum = psd_one_sided(values, rate, seg)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        out.write_csv("spectrum.csv", ["f_hz", "S_per_hz"],
                      zip(map(float, spectrum.f), map(float, spectrum.S)))
        source = "series"
    else:
        spot = p["spectrum"]
        if len(spot["f"]) != len(spot["S"]):
            raise ScenarioError("spectrum.f and spectrum.S differ in length")
        spectrum = spot_spectrum(dict(zip(spot["f"], spot["S"])))
        source = "spot values"
    if not isinstance(spectrum, NoiseSpectrum):
        raise ScenarioError("no spectrum")
    try:
        rates = heating_rates(p["nu_ax"], p["nu_rad"], spectrum)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    summary = {
        "source": source,
        "gamma_a": rates.gamma_a,
        "gamma_r": rates.gamma_r,
        "tau_h_s": math.inf if rates.tau_h is None else rates.tau_h,
    }
    out.write_json("heating.json", summary)
    return summary


REGISTRY = {
    "fig2-diagram": fig2_diagram,
    "empty-cavity": empty_cavity,
    "fig7-adiabatic": fig7_adiabatic,
    "fig7-full": fig7_full,
    "fig8-step": fig8_step,
    "fig10-breathing": fig10_breathing,
    "fig11-mot-switching": fig11_mot_switching,
    "noise-budget": noise_budget,
}


def run(cfg: ScenarioConfig) -> dict:
    """Run one scenario and write its manifest; on failure no data files are left behind."""
    out = OutputDir(cfg.out_dir, cfg.formats)
    start = time.perf_counter()
    try:
        summary = REGISTRY[cfg.scenario](cfg.params, out, cfg.seed)
    except BaseException:
        for name in out.files:
            try:
                os.remove(out.path(name))
            except OSError:
                pass
        raise
    duration = time.perf_counter() - start
    return out.write_manifest(scenario=cfg.scenario, config=cfg.params, seed=cfg.seed,
                              duration=duration, summary=summary)
