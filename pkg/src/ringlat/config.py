"""Scenario configuration: per-scenario defaults, strict TOML merging and --set overrides."""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Bad configuration; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


FORMATS = ("csv", "json")


def _common(seed=0):
    return {"seed": seed, "formats": list(FORMATS)}


DEFAULTS: dict[str, dict] = {
    "fig2-diagram": {
        **_common(),
        "chi0_minus": [0.51, 0.50, 0.48, 0.43, 0.38],
        "eta_ax": 0.5,
        "eta_rad": 0.3,
        "UN_max": 6.0,
        "n_samples": 241,
        "threshold": {"chi_min": 0.38, "chi_max": 0.50, "chi_step": 0.01},
    },
    "empty-cavity": {
        **_common(),
        "chi0_minus": 0.45,
        "a_init_re": 0.0,
        "a_init_im": 0.0,
        "t_end": 0.5e-3,
        "stride": 1e-6,
    },
    "fig7-adiabatic": {
        **_common(),
        "chi0_minus": [0.49, 0.46, 0.43, 0.36],
        "UN0": [2.38, 2.23, 2.15, 1.75],
        "eta_ax": 0.5,
        "eta_rad": 0.3,
        "a0_sq": 0.1,
        "t_end": 0.6,
        "stride": 1e-4,
        "jump_fraction": 0.9,
        "decay": {
            "gamma_bg": 1.0 / 1.7,
            "two_body_rate": 1.0,
            "samples": 40,
            "t_max": 6.0,
            "noise": 0.01,
        },
    },
    "fig7-full": {
        **_common(),
        "chi0_minus": [0.49, 0.36],
        "UN0": [2.38, 1.75],
        "eta_ax": 0.5,
        "eta_rad": 0.3,
        "a0_sq": 0.1,
        "gamma_bg": 1.0 / 1.7,
        "two_body_rate": 1.0,
        "nu_v": 550e3,
        "N_sim": [50, 100, 200],
        "N_real": 1e6,
        "t_end": 0.03,
        "stride": 1e-5,
        "jump_fraction": 0.9,
        "settle": 2e-3,
    },
    "fig8-step": {
        **_common(),
        "chi0_minus": 0.45,
        "UN": 3.0,
        "eta_ax": 0.5,
        "eta_rad": 0.3,
        "settle": 5e-3,
        "step_factor": 0.5,
        "t_step": 0.0,
        "t_restore": 2e-3,
        "t_end": 4e-3,
        "stride": 1e-6,
    },
    "fig10-breathing": {
        **_common(),
        "chi0_minus": 0.43,
        "UN": 2.0,
        "eta_ax": 0.5,
        "eta_rad": 0.3,
        "a0_sq": 0.1,
        "nu_v": 550e3,
        "N_sim": 100,
        "n_runs": 8,
        "t_end": 12e-3,
        "stride": 1e-5,
        "window": [1e-3, 12e-3],
        "depth": {"factors": [1.0, 2.0, 4.0], "n_runs": 6},
    },
    "fig11-mot-switching": {
        **_common(),
        "chi0_minus": 0.48,
        "UN0": 2.6,
        "eta_ax": 0.5,
        "eta_rad": 0.3,
        "a0_sq": 0.1,
        "loading_rate": 2.4,
        "depth_cap": 1.0,
        "gamma_bg": 1.0 / 1.7,
        "two_body": 0.0,
        "t_end": 12.0,
        "stride": 2e-3,
        "jump_fraction": 0.6,
    },
    "noise-budget": {
        **_common(),
        "nu_ax": 350e3,
        "nu_rad": 450.0,
        "spectrum": {"f": [900.0, 700e3], "S": [3e-9, 1.5e-13]},
        "series_path": "",
        "sample_rate": 0.0,
        "segment_length": 4096,
    },
}

SCENARIOS = tuple(DEFAULTS)


def _type_name(v):
    return type(v).__name__


def _coerce(path: str, default, value):
    """Check ``value`` against the type of ``default``; ints are accepted for floats."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected bool, got {_type_name(value)}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected float, got {_type_name(value)}")
        return float(value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected int, got {_type_name(value)}")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected string, got {_type_name(value)}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(path, f"expected array, got {_type_name(value)}")
        if default:
            proto = default[0]
            return [_coerce(f"{path}[{i}]", proto, v) for i, v in enumerate(value)]
        return list(value)
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected table, got {_type_name(value)}")
        return _merge(default, value, path)
    raise ConfigError(path, f"unsupported default type {_type_name(default)}")


def _merge(base: dict, overrides: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in base:
            raise ConfigError(path, "unknown key")
        out[key] = _coerce(path, base[key], value)
    return out


def parse_override(item: str) -> tuple[list[str], object]:
    """Split ``a.b=value``; the value is read as a TOML literal, else kept as a string."""
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigError(item, "empty key in override")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.split("."), value


def _nest(parts, value):
    out = value
    for p in reversed(parts):
        out = {p: out}
    return out


def _deep_update(target: dict, extra: dict):
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(target.get(k), dict):
            _deep_update(target[k], v)
        else:
            target[k] = v


@dataclass
class ScenarioConfig:
    scenario: str
    params: dict
    out_dir: str
    seed: int
    formats: tuple = field(default=FORMATS)


def resolve(scenario: str, file_text: str | None = None, overrides=(), *, seed: int | None = None,
            out_dir: str | None = None) -> ScenarioConfig:
    """Merge defaults, the TOML file and --set overrides (in that order of precedence)."""
    if scenario not in DEFAULTS:
        raise ConfigError("scenario", f"unknown scenario {scenario!r}")
    raw: dict = {}
    if file_text:
        try:
            raw = tomllib.loads(file_text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("", f"TOML parse error: {exc}") from exc
    for item in overrides:
        parts, value = parse_override(item)
        _deep_update(raw, _nest(parts, value))
    if seed is not None:
        raw["seed"] = seed
    params = _merge(DEFAULTS[scenario], raw)
    if params["seed"] < 0 or params["seed"] >= 2 ** 64:
        raise ConfigError("seed", "must fit in an unsigned 64-bit integer")
    bad = [f for f in params["formats"] if f not in FORMATS]
    if bad:
        raise ConfigError("formats", f"unknown output format {bad[0]!r}")
    return ScenarioConfig(scenario, params, out_dir or f"runs/{scenario}", params["seed"],
                          tuple(params["formats"]))
