import csv
import io
import json

import numpy as np
import pytest

from switchguard import demo
from switchguard.cli import load_bundle, main
from switchguard.synthesis import (build_performance_rows, build_residual_rows,
                                   decision_variables, evaluate_rows)


@pytest.fixture()
def nominal_config(tmp_path):
    path = tmp_path / "nominal.json"
    path.write_text(json.dumps(demo.nominal_config_dict()))
    return str(path)


@pytest.fixture()
def nominal_bundle(tmp_path, nominal_config):
    out = str(tmp_path / "nominal.bundle.json")
    assert main(["synth", nominal_config, "--out", out]) == 0
    return out


def test_validate_ok(nominal_config, capsys):
    assert main(["validate", nominal_config]) == 0
    assert "ok:" in capsys.readouterr().out


def test_validate_bad_matrix_dimensions(tmp_path, capsys):
    cfg = demo.nominal_config_dict()
    cfg["plant"]["channels"][0]["C"] = [[1.0, 0.0]]  # wrong column count
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["validate", str(path)]) == 2
    assert "plant.channels[0].C" in capsys.readouterr().err


def test_validate_empty_patterns(tmp_path, capsys):
    cfg = demo.nominal_config_dict()
    cfg["attack"]["patterns"] = []
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["validate", str(path)]) == 2
    assert "attack.patterns" in capsys.readouterr().err


def test_validate_missing_file(capsys):
    assert main(["validate", "/nonexistent/config.json"]) == 2


def test_synth_writes_bundle(nominal_bundle, capsys):
    bundle = json.load(open(nominal_bundle))
    assert abs(bundle["gamma_bar"] - 5.0275) <= 0.0503
    assert bundle["status"] == "optimal"
    assert bundle["certification"]["eps_rows"] <= 1e-7
    assert bundle["Q"]["entries"] and bundle["Z"]["entries"] and bundle["T"]["entries"]


def test_synth_switching_config(tmp_path, capsys):
    path = tmp_path / "switching.json"
    path.write_text(json.dumps(demo.demo_config_dict()))
    out = str(tmp_path / "switching.bundle.json")
    assert main(["synth", str(path), "--out", out]) == 0
    bundle = json.load(open(out))
    assert bundle["gamma_bar"] <= 32.83
    assert bundle["eps_achieved"] <= 1e-7
    assert len(bundle["T"]["entries"]) == 2 * 5  # two tap windows, five lags


def test_synth_dump_lp(tmp_path, nominal_config):
    out = str(tmp_path / "b.json")
    dump = str(tmp_path / "problem.lp")
    assert main(["synth", nominal_config, "--out", out, "--dump-lp", dump]) == 0
    text = open(dump).read()
    assert "Minimize" in text and "Subject To" in text


def test_synth_infeasible_exit_code(tmp_path, capsys):
    cfg = demo.nominal_config_dict()
    cfg["plant"]["channels"] = [{"C": [[0.0, 0.0, 0.0]], "D": [[0.0, 0.0]]}]
    cfg["attack"]["patterns"] = [[1]]
    cfg["synthesis"]["N"] = 1
    path = tmp_path / "infeasible.json"
    path.write_text(json.dumps(cfg))
    assert main(["synth", str(path), "--out", str(tmp_path / "x.json")]) == 3
    assert "infeasible" in capsys.readouterr().err


def test_synth_deterministic_bundles(tmp_path, nominal_config):
    out1 = str(tmp_path / "b1.json")
    out2 = str(tmp_path / "b2.json")
    assert main(["synth", nominal_config, "--out", out1]) == 0
    assert main(["synth", nominal_config, "--out", out2]) == 0
    assert open(out1, "rb").read() == open(out2, "rb").read()


def test_bundle_round_trip_recertifies(nominal_bundle):
    bundle, result, plant, model, automaton, syncfg, _ = load_bundle(nominal_bundle)
    variables = decision_variables(automaton, syncfg, plant.n, model.p)
    x = variables.pack(result.Q, result.Z)
    gamma_rows = np.max(evaluate_rows(
        build_performance_rows(plant, model, automaton, syncfg, variables), x))
    eps_rows = np.max(evaluate_rows(
        build_residual_rows(plant, model, automaton, syncfg, variables), x))
    assert np.isclose(gamma_rows, result.gamma_bar, atol=1e-9)
    assert eps_rows <= result.eps_achieved + 1e-9


def test_norm_constant_sigma(nominal_bundle, capsys):
    assert main(["norm", nominal_bundle, "--sigma", ",".join(["0"] * 25)]) == 0
    out = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1
    assert float(rows[0]["eps"]) <= 1e-7
    assert abs(float(rows[0]["gamma"]) - 5.0275) <= 1e-4


def test_norm_sampled(nominal_bundle, capsys):
    assert main(["norm", nominal_bundle, "--samples", "3", "--horizon", "12"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 3
    for row in rows:
        assert float(row["eps"]) <= 1e-7


def test_norm_bad_sigma(nominal_bundle, capsys):
    assert main(["norm", nominal_bundle, "--sigma", "0,7"]) == 2


def test_simulate_worst_reaches_gamma(nominal_bundle, tmp_path, capsys):
    trace_path = str(tmp_path / "trace.csv")
    assert main(["simulate", nominal_bundle, "--worst", "--horizon", "12",
                 "--trace", trace_path]) == 0
    out = capsys.readouterr().out
    sup = float([ln for ln in out.splitlines() if ln.startswith("sup_error")][0].split("=")[1])
    assert abs(sup - 5.0275) <= 1e-4
    with open(trace_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert {"t", "sigma", "x_0", "y_0", "xhat_0", "e_0"} <= set(rows[0])


def test_simulate_zero_scenario(nominal_bundle, tmp_path, capsys):
    scen = {"sigma": [0] * 6, "w": [[0.0, 0.0]] * 6, "x0": [0.0, 0.0, 0.0]}
    spath = tmp_path / "scen.json"
    spath.write_text(json.dumps(scen))
    assert main(["simulate", nominal_bundle, "--scenario", str(spath)]) == 0
    out = capsys.readouterr().out
    sup = float([ln for ln in out.splitlines() if ln.startswith("sup_error")][0].split("=")[1])
    assert sup == 0.0


def test_attack_command(nominal_bundle, capsys):
    assert main(["attack", nominal_bundle, "--horizon", "8"]) == 0
    out = capsys.readouterr().out
    assert "sigma*" in out and "certified_bound" in out
    value = float([ln for ln in out.splitlines() if ln.startswith("value")][0].split("=")[1])
    assert abs(value - 5.0275) <= 1e-4


def test_example_command(capsys):
    code = main(["example"])
    out = capsys.readouterr().out
    assert code == 0
    assert "nominal:" in out and "switching:" in out
    assert "5.0275" in out and "32.5" in out
    assert "label assumption" in out


def test_example_json_deterministic(capsys):
    assert main(["example", "--json"]) == 0
    first = capsys.readouterr().out
    assert main(["example", "--json"]) == 0
    second = capsys.readouterr().out
    assert first == second
    payload = json.loads(first)
    assert payload["nominal"]["met"] and payload["switching"]["met"]
