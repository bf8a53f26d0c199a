import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from ringlat.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from ringlat.config import DEFAULTS, ConfigError, parse_override, resolve
from ringlat.io import MANIFEST, verify_manifest
from ringlat.scenarios import ScenarioError, read_series


def test_defaults_resolve_for_every_scenario():
    for name in DEFAULTS:
        cfg = resolve(name)
        assert cfg.seed == 0
        assert cfg.out_dir == f"runs/{name}"


def test_unknown_key_names_its_path():
    with pytest.raises(ConfigError) as info:
        resolve("fig10-breathing", "[depth]\nfactor = [1, 2]\n")
    assert "depth.factor" in str(info.value)


def test_type_errors():
    with pytest.raises(ConfigError) as info:
        resolve("fig8-step", 'UN = "three"')
    assert "UN" in str(info.value)
    with pytest.raises(ConfigError):
        resolve("fig2-diagram", "chi0_minus = [0.4, true]")
    with pytest.raises(ConfigError):
        resolve("fig10-breathing", "N_sim = 10.5")
    assert resolve("fig8-step", "UN = 3").params["UN"] == 3.0


def test_precedence_file_then_set_then_seed():
    text = "seed = 5\nUN = 2.5\n"
    assert resolve("fig8-step", text).params["UN"] == 2.5
    cfg = resolve("fig8-step", text, ["UN=1.5", "seed=6"], seed=9)
    assert cfg.params["UN"] == 1.5
    assert cfg.seed == 9


def test_parse_override():
    assert parse_override("depth.n_runs=3") == (["depth", "n_runs"], 3)
    assert parse_override("window=[0.001, 0.002]") == (["window"], [0.001, 0.002])
    assert parse_override("series_path=data/x.csv") == (["series_path"], "data/x.csv")
    with pytest.raises(ConfigError):
        parse_override("no_equals")
    with pytest.raises(ConfigError):
        parse_override("a..b=1")


def test_seed_and_format_checks():
    with pytest.raises(ConfigError):
        resolve("empty-cavity", seed=-1)
    with pytest.raises(ConfigError):
        resolve("empty-cavity", seed=2 ** 64)
    with pytest.raises(ConfigError):
        resolve("empty-cavity", 'formats = ["xml"]')
    with pytest.raises(ConfigError):
        resolve("nope")
    with pytest.raises(ConfigError):
        resolve("empty-cavity", "UN = [")


def test_cli_list(capsys):
    assert main(["list"]) == EXIT_OK
    assert capsys.readouterr().out.split() == list(DEFAULTS)


def test_cli_runs_and_manifest_verifies(tmp_path):
    out = tmp_path / "ec"
    assert main(["empty-cavity", "--out", str(out), "--set", "t_end=1e-4"]) == EXIT_OK
    manifest = json.load(open(out / MANIFEST))
    assert {f["name"] for f in manifest["files"]} == {"trace.csv", "summary.json"}
    assert manifest["config"]["t_end"] == 1e-4
    assert verify_manifest(str(out)) == []
    with open(out / "trace.csv", "a") as fh:
        fh.write("tampered\n")
    assert verify_manifest(str(out)) == ["trace.csv"]


def test_cli_format_selection(tmp_path):
    out = tmp_path / "ec"
    assert main(["empty-cavity", "--out", str(out), "--set", 'formats=["json"]']) == EXIT_OK
    assert sorted(os.listdir(out)) == [MANIFEST, "summary.json"]


def test_cli_config_errors(tmp_path, capsys):
    assert main(["empty-cavity", "--set", "bogus=1", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    assert main(["empty-cavity", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    assert not (tmp_path / "x").exists()


def test_runtime_error_leaves_no_orphans(tmp_path, capsys):
    series = tmp_path / "s.csv"
    rng = np.random.default_rng(0)
    series.write_text("\n".join(f"{1 + 0.01 * v}" for v in rng.normal(size=4096)))
    out = tmp_path / "nb"
    # the series is written as spectrum.csv first, then the trap frequency is out of range
    code = main(["noise-budget", "--out", str(out), "--set", f'series_path="{series}"',
                 "--set", "sample_rate=1000.0", "--set", "segment_length=256",
                 "--set", "nu_ax=1e6"])
    assert code == EXIT_RUNTIME
    assert "noise-budget failed" in capsys.readouterr().err
    assert os.listdir(out) == []


def test_noise_budget_from_series(tmp_path):
    series = tmp_path / "s.csv"
    t = np.arange(8192) / 1e4
    series.write_text("t,I\n" + "\n".join(f"{a},{1 + 1e-3 * math.sin(2 * math.pi * 1000 * a)}"
                                          for a in t))
    out = tmp_path / "nb"
    assert main(["noise-budget", "--out", str(out), "--set", f'series_path="{series}"',
                 "--set", "nu_ax=500.0", "--set", "nu_rad=100.0"]) == EXIT_OK
    heating = json.load(open(out / "heating.json"))
    assert heating["source"] == "series"
    assert heating["gamma_a"] > 100 * heating["gamma_r"]


def test_noise_budget_unbounded_time(tmp_path):
    out = tmp_path / "nb"
    assert main(["noise-budget", "--out", str(out), "--set", "spectrum.S=[0.0, 0.0]"]) == EXIT_OK
    assert json.load(open(out / "heating.json"))["tau_h_s"] == "inf"


def test_read_series_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,value\n0.0,1.0\n0.1,oops\n")
    with pytest.raises(ScenarioError, match=r"bad.csv:3"):
        read_series(str(p))
    p.write_text("1,2,3\n")
    with pytest.raises(ScenarioError, match=r":1: expected 1 or 2 columns"):
        read_series(str(p))
    with pytest.raises(ScenarioError):
        read_series(str(tmp_path / "absent.csv"))
    p.write_text("1.0\n2.0\n")
    times, values = read_series(str(p))
    assert times is None and list(values) == [1.0, 2.0]


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "ringlat.cli", "list"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "fig10-breathing" in res.stdout
