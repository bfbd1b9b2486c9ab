import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from taxislab.cli import main
from taxislab.config import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    default_config_text,
    parse_config,
    resolve_config,
    to_ini,
)
from taxislab.harness import (
    HarnessError,
    HarnessIOError,
    ResultMismatchError,
    file_hash,
    load_result,
    run_fit,
    run_inequalities,
    run_simulate,
    run_sweep,
)
from taxislab.inequalities import FAMILIES
from taxislab.model import RegimeTag

DATA = Path(__file__).resolve().parents[1] / "src" / "taxislab" / "data"
SMALL = ["grid.points=32", "stepping.t_end=2.0", "stepping.sample_interval=0.1"]


def small(name="coexistence", extra=()):
    return resolve_config(name, SMALL + list(extra))


# -- configuration ----------------------------------------------------------

def test_default_text_round_trips():
    cfg = parse_config(default_config_text())
    assert cfg == ExperimentConfig()
    assert parse_config(to_ini(cfg)) == cfg


@pytest.mark.parametrize("name", ["h1", "coexistence", "degenerate", "strict_exclusion", "campaign"])
def test_bundled_configs_round_trip(name):
    cfg = resolve_config(name)
    assert parse_config(to_ini(cfg)) == cfg
    assert config_hash(parse_config(to_ini(cfg))) == config_hash(cfg)


def test_overrides_and_hash_change():
    cfg = resolve_config("coexistence", ["stepping.dt=0.005", "parameters.a2=0.25"])
    assert cfg.stepping.dt == 0.005 and cfg.parameters.a2 == 0.25
    assert config_hash(cfg) != config_hash(resolve_config("coexistence"))


def test_validation_collects_every_problem():
    with pytest.raises(ConfigError) as info:
        parse_config("", ["stepping.dt=-1", "grid.points=0", "parameters.chi1=0", "stepping.scheme=rk9"])
    assert len(info.value.problems) >= 4


@pytest.mark.parametrize("override", ["nosuch.key=1", "stepping.nokey=1", "stepping.dt=abc", "malformed"])
def test_bad_overrides_rejected(override):
    with pytest.raises(ConfigError):
        parse_config("", [override])


def test_unknown_bundled_name():
    with pytest.raises(ConfigError):
        resolve_config("does_not_exist")


# -- runs -------------------------------------------------------------------

def test_run_simulate_writes_hashed_artifacts(tmp_path):
    cfg = small(extra=["outputs.snapshot_times=0.0, 1.0", "stepping.t_end=10.0"])
    res = run_simulate(cfg, tmp_path)
    assert res.exit_time is None and res.selection.winner == "exponential"
    h = config_hash(cfg)
    for name in ("timeseries.csv", "monitors.csv", "fits.csv", "snapshots/snapshot_001.csv"):
        assert file_hash(tmp_path / name) == h
    assert (tmp_path / "plot_timeseries.py").exists()
    summary = load_result(tmp_path)
    assert summary["regime"] == RegimeTag.COEXISTENCE.value
    assert parse_config((tmp_path / "config.ini").read_text()) == cfg


def test_timeseries_columns_start_with_record_fields(tmp_path):
    run_simulate(small(), tmp_path)
    lines = [ln for ln in (tmp_path / "timeseries.csv").read_text().splitlines() if not ln.startswith("#")]
    assert lines[0].split(",")[:12] == ["t", "e_u0", "e_v0", "e_u1", "e_v1", "e_u2", "e_v2", "y",
                                        "mass_u", "mass_v", "w22_u", "w22_v"]
    assert all(np.isfinite(float(x)) for x in lines[5].split(","))


def test_loader_rejects_mismatched_pairs(tmp_path):
    run_simulate(small(), tmp_path)
    other = to_ini(small(extra=["parameters.a2=0.25"]))
    (tmp_path / "config.ini").write_text(other)
    with pytest.raises(ResultMismatchError):
        load_result(tmp_path)


def test_loader_rejects_tampered_csv(tmp_path):
    run_simulate(small(), tmp_path)
    ts = tmp_path / "timeseries.csv"
    ts.write_text(ts.read_text().replace("config_hash=", "config_hash=0", 1))
    with pytest.raises(ResultMismatchError):
        load_result(tmp_path)


def test_failures_name_the_stage_and_leave_a_marker(tmp_path):
    cfg = small(extra=["perturbation.u_modes=40:1.0"])
    with pytest.raises(HarnessError) as info:
        run_simulate(cfg, tmp_path)
    assert info.value.stage == "perturbation"
    assert "stage: perturbation" in (tmp_path / "FAILED").read_text()


def test_blow_up_reported_distinctly(tmp_path):
    cfg = small(extra=["perturbation.epsilon=2.0", "stepping.stability_guard=1.0",
                       "stepping.sample_interval=0.5", "stepping.dt=0.5"])
    with pytest.raises(HarnessError) as info:
        run_simulate(cfg, tmp_path)
    assert info.value.stage.startswith("simulate")


def test_sweep_crosses_the_degenerate_line(tmp_path):
    cfg = resolve_config("campaign", ["stepping.t_end=2.0"])
    rows = run_sweep(cfg, "lambda2", [0.4, 0.5, 0.6], tmp_path)
    assert [r["regime"] for r in rows] == [RegimeTag.STRICT_EXCLUSION.value,
                                           RegimeTag.DEGENERATE_EXCLUSION.value,
                                           RegimeTag.COEXISTENCE.value]
    assert file_hash(tmp_path / "sweep.csv") == config_hash(cfg)
    assert (tmp_path / "point_001" / "result.json").exists()


def test_sweep_records_point_failures_and_continues():
    rows = run_sweep(small(), "parameters.mu1", [0.0, 1.0])
    assert rows[0]["regime"] == "invalid" and rows[0]["exit_status"].startswith("failed")
    assert rows[1]["exit_status"] == "inside"


def test_sweep_epsilon_finds_basin_edge():
    rows = run_sweep(small(extra=["stepping.stability_guard=1.0"]), "perturbation.epsilon", [1e-3, 3.0])
    assert rows[0]["exit_status"] == "inside"
    assert rows[1]["exit_status"] != "inside"


def test_empty_sweep_is_noop():
    assert run_sweep(small(), "lambda2", []) == []


def test_inequality_campaign_files(tmp_path):
    cfg = resolve_config("coexistence", ["inequalities.count=10"])
    run_inequalities(cfg, tmp_path)
    for name in FAMILIES:
        assert file_hash(tmp_path / f"inequality_{name}.csv") == config_hash(cfg)


def test_fit_bundled_synthetic_series():
    sel = run_fit(DATA / "synthetic_exponential.csv")
    assert sel.exponential.K2 == pytest.approx(0.7, abs=1e-9)


def test_fit_missing_file():
    with pytest.raises(HarnessIOError):
        run_fit("/nonexistent/series.csv")


# -- command line -----------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    assert main(["classify", "--config", "coexistence"]) == 0
    assert "CoexistenceH2" in capsys.readouterr().out
    assert main(["classify", "--config", "coexistence", "--override", "parameters.chi1=0"]) == 1
    assert main(["fit", str(tmp_path / "missing.csv")]) == 2
    assert main(["fit", str(DATA / "synthetic_exponential.csv")]) == 0
    out = tmp_path / "run"
    assert main(["simulate", "--config", "coexistence", "--out", str(out), "--seed", "3"]
                + sum((["--override", o] for o in SMALL), [])) == 0
    assert json.loads((out / "result.json").read_text())["regime"] == "CoexistenceH2"


def test_cli_mu1_zero_rejected():
    assert main(["classify", "--override", "parameters.lambda1=1", "--override", "parameters.mu2=1",
                 "--override", "parameters.a1=1", "--override", "parameters.a2=1"]) == 1


def test_cli_accept_subset(tmp_path):
    assert main(["accept", "--only", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "acceptance.csv").exists()


def test_cli_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "taxislab.cli", "classify", "--config", "degenerate"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "DegenerateExclusionH2" in proc.stdout


def test_identical_runs_are_byte_identical(tmp_path):
    cfg = small()
    run_simulate(cfg, tmp_path / "a")
    run_simulate(cfg, tmp_path / "b")
    for f in (tmp_path / "a").rglob("*"):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()
    np.testing.assert_equal(load_result(tmp_path / "a"), load_result(tmp_path / "b"))
