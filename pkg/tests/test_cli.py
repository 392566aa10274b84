import json
import math

import pytest

from watched_decay.cli import (
    ConfigError,
    RunConfig,
    apply_override,
    main,
    run,
)

TOY_FAST = {"n_modes": 120, "n_channels": 40}


def read_summary(out_dir):
    return json.loads((out_dir / "summary.json").read_text())


# -- configuration ---------------------------------------------------------

def test_config_round_trip():
    config = RunConfig(scenario="toy", toy={"gamma": 0.02}, seed=3,
                       t_max=50.0)
    assert RunConfig.from_dict(config.to_dict()) == config


def test_config_json_round_trip():
    config = RunConfig(scenario="shell", shell={"n_atoms": 10}, seed=1)
    again = RunConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert again == config


def test_unknown_scenario_rejected():
    with pytest.raises(ConfigError):
        RunConfig(scenario="explode")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"scenario": "toy", "bogus": 1})


def test_sweep_section_only_for_sweep_scenario():
    with pytest.raises(ConfigError):
        RunConfig(scenario="toy",
                  sweep={"parameter": "beta", "values": [0.1]})
    with pytest.raises(ConfigError):
        RunConfig(scenario="sweep")
    with pytest.raises(ConfigError):
        RunConfig(scenario="sweep",
                  sweep={"parameter": "gamma", "values": [0.1]})


def test_apply_override_nested_and_typed():
    cfg = {"scenario": "toy", "toy": {"gamma": 0.01}}
    out = apply_override(cfg, "toy.gamma=0.02")
    assert out["toy"]["gamma"] == 0.02
    assert cfg["toy"]["gamma"] == 0.01  # original untouched
    out = apply_override(cfg, "grid.scheme=uniform")
    assert out["grid"]["scheme"] == "uniform"
    out = apply_override(cfg, 'sweep={"parameter":"r","values":[1,2]}')
    assert out["sweep"]["values"] == [1, 2]
    with pytest.raises(ConfigError):
        apply_override(cfg, "no_equals_sign")


# -- scenarios -------------------------------------------------------------

def test_shell_scenario_artifacts(tmp_path):
    config = RunConfig(scenario="shell",
                       system={"beta": 0.01},
                       shell={"n_atoms": 100, "radius_z": math.pi / 2.0,
                              "n_samples": 500}, seed=5)
    run(config, tmp_path)
    summary = read_summary(tmp_path)
    assert summary["schema_version"] == 1
    results = summary["results"]
    assert results["u_shell_printed"] == pytest.approx(0.73946, abs=1e-5)
    assert (tmp_path / "report.txt").read_text().startswith("scenario:")
    header = (tmp_path / "results.csv").read_text().splitlines()[0]
    assert header == "variant,u,stderr"


def test_shell_empty_gives_unity(tmp_path):
    config = RunConfig(scenario="shell", shell={"n_atoms": 0,
                                                "n_samples": 10})
    run(config, tmp_path)
    assert read_summary(tmp_path)["results"]["u"] == 1.0


def test_toy_scenario_trajectory_contract(tmp_path):
    config = RunConfig(scenario="toy", toy=TOY_FAST, t_max=40.0)
    run(config, tmp_path)
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == "t,re_a0,im_a0,survival,norm"
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[3]) == pytest.approx(1.0)
    assert float(first[4]) == pytest.approx(1.0)
    # plot data: three columns, reference equals exp(-analytic_rate * t)
    summary = read_summary(tmp_path)
    rate = summary["results"]["analytic_rate"]
    plot = (tmp_path / "plotdata" / "trajectory.dat").read_text().splitlines()
    assert plot[0] == "t,survival,reference"
    t, _, ref = (float(x) for x in plot[5].split(","))
    assert ref == pytest.approx(math.exp(-rate * t), rel=1e-12)


def test_byte_identical_reruns(tmp_path):
    config = RunConfig(scenario="toy", toy=TOY_FAST, t_max=40.0, seed=9)
    run(config, tmp_path / "a")
    run(config, tmp_path / "b")
    for name in ("results.csv", "summary.json", "report.txt",
                 "plotdata/trajectory.dat"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes(), name


def test_sweep_orders_rows_and_keeps_failures(tmp_path):
    config = RunConfig(
        scenario="sweep", toy=TOY_FAST, t_max=40.0,
        sweep={"parameter": "n_atoms", "values": [0, -5, 10]},
        system={"beta": 0.01})
    run(config, tmp_path)
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0].startswith("n_atoms,")
    values = [ln.split(",")[0] for ln in lines[1:]]
    assert values == ["0", "-5", "10"]
    failed = lines[2]
    assert "ValueError" in failed
    summary = read_summary(tmp_path)
    assert summary["results"]["n_failed"] == 1


def test_sweep_beta_runs_dynamics(tmp_path):
    config = RunConfig(
        scenario="sweep", toy=TOY_FAST, t_max=40.0,
        sweep={"parameter": "beta", "values": [0.0, 0.05]})
    run(config, tmp_path, jobs=2)
    rows = read_summary(tmp_path)["results"]["rows"]
    assert [r["error"] for r in rows] == ["", ""]
    assert rows[1]["fitted_rate"] < rows[0]["fitted_rate"]
    plot = (tmp_path / "plotdata" / "sweep.dat").read_text().splitlines()
    assert plot[0] == "beta,fitted_rate,analytic_rate"


# -- command line entry point ----------------------------------------------

def test_main_success_and_outputs(tmp_path, capsys):
    code = main(["shell", "--out", str(tmp_path / "o"), "--seed", "3",
                 "--set", "shell.n_samples=200"])
    assert code == 0
    assert (tmp_path / "o" / "summary.json").exists()
    assert read_summary(tmp_path / "o")["seed"] == 3


def test_main_validation_failure(tmp_path, capsys):
    code = main(["vacuum", "--out", str(tmp_path / "o"),
                 "--set", "system.omega_i=1.5"])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 1
    assert "omega_i" in err["message"]


def test_main_numerical_failure(tmp_path, capsys):
    # A vacuum grid too coarse for the sum rule is a numerical failure.
    code = main(["vacuum", "--out", str(tmp_path / "o"),
                 "--set", "grid.n_modes=60"])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "SumRuleError"


def test_main_io_failure(tmp_path, capsys):
    code = main(["toy", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o")])
    assert code == 3
    assert json.loads(capsys.readouterr().err)["exit_code"] == 3


def test_main_config_file_and_scenario_mismatch(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "toy"}))
    code = main(["vacuum", "--config", str(cfg),
                 "--out", str(tmp_path / "o")])
    assert code == 1


def test_single_detector_requires_atom(tmp_path, capsys):
    code = main(["single-detector", "--out", str(tmp_path / "o")])
    assert code == 1
    assert "detector" in json.loads(capsys.readouterr().err)["message"]
