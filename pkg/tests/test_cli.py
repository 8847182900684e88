import json

import numpy as np
import pytest

from kgscatter import __version__
from kgscatter import cli

SMALL_SIM = {
    "L": 200.0,
    "N": 2048,
    "T": 60.0,
    "dt": 0.05,
    "record_every": 4,
    "u0": {"kind": "gaussian", "A": 1.0, "sigma": 1.0},
    "rays": [0.8660254037844386, -0.8660254037844386, 0.6],
}


def _write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


def _run(tmp_path, command, cfg, out="out", extra=()):
    path = _write(tmp_path, f"{command}.json", cfg)
    code = cli.main([command, "--config", str(path), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


# --- parser and config -----------------------------------------------------------


def test_parser_has_all_subcommands():
    p = cli.build_parser()
    for name in cli.COMMANDS:
        args = p.parse_args([name, "--seedless", "--jobs", "2"])
        assert args.command == name and args.seedless and args.jobs == 2


def test_defaults_are_explicit():
    cfg = cli.resolve_config("resonant", {})
    sim = cfg["simulation"]
    for key in ("L", "N", "alpha", "beta", "beta0", "u0", "eps", "T", "dt", "rays", "track_xi"):
        assert key in sim
    assert cfg["origin_window"] == [50.0, 300.0]
    nr = cli.resolve_config("nonresonant", {})
    assert nr["simulation"]["alpha"]["deresonate"] is True
    assert nr["simulation"]["beta0"] == 1.0


@pytest.mark.parametrize(
    "command, cfg",
    [
        ("simulate", {"simulation": {"N": 100}}),
        ("simulate", {"simulation": {"bogus": 1}}),
        ("simulate", {"simulation": {"L": 100.0, "N": 1024, "T": 200.0}}),
        ("simulate", {"simulation": {"alpha": {"kind": "triangle"}}}),
        ("resonant", {"fit_window": [300.0, 50.0]}),
        ("resonant", {"vmod_times": [5000.0]}),
        ("localdecay", {"t_min": 100.0, "t_max": 50.0}),
        ("localdecay", {"L": 500.0}),
        ("localdecay", {"W": 200.0}),
        ("localdecay", {"variants": ["laplace"]}),
        ("oscint", {"phases": [5]}),
        ("sweep", {"command": "simulate"}),
        ("sweep", {"command": "oscint", "eps": [0.1]}),
    ],
)
def test_config_errors_exit_2(tmp_path, command, cfg, capsys):
    code, _ = _run(tmp_path, command, cfg)
    assert code == cli.EXIT_CONFIG
    assert "config" in capsys.readouterr().err


def test_unreadable_and_malformed_config(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["simulate", "--config", str(bad)]) == cli.EXIT_CONFIG
    arr = _write(tmp_path, "arr.json", [1, 2])
    assert cli.main(["simulate", "--config", str(arr)]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--jobs", "0", "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


# --- guards ----------------------------------------------------------------------


def test_blowup_guard_exit_3(tmp_path, capsys):
    code, _ = _run(tmp_path, "simulate", {"simulation": {**SMALL_SIM, "T": 5.0, "blowup": 1e-6}})
    assert code == cli.EXIT_GUARD
    assert "BlowUpError" in capsys.readouterr().err


def test_resonant_alpha_in_nonresonant_pipeline_exit_3(tmp_path):
    sim = {**SMALL_SIM, "T": 5.0, "alpha": {"kind": "gaussian", "A": 1.0, "sigma": 1.0}}
    code, _ = _run(tmp_path, "nonresonant", {"simulation": sim, "predict_times": [5.0]})
    assert code == cli.EXIT_GUARD


# --- subcommands -----------------------------------------------------------------


def test_simulate_zero_data(tmp_path):
    code, out = _run(tmp_path, "simulate", {"simulation": {**SMALL_SIM, "eps": 0.0, "T": 10.0}}, extra=["--seedless"])
    assert code == cli.EXIT_OK
    rep = json.loads((out / "simulate_report.json").read_text())
    assert rep["final_sup"] == 0.0 and rep["max_sup"] == 0.0
    data = np.loadtxt(out / "series.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, 1] == 0.0)
    assert rep["version"]["version"] == __version__
    assert rep["config"]["simulation"]["eps"] == 0.0
    assert (out / "trajectory").is_dir()
    assert (out / "series.plt").exists()


@pytest.mark.slow
def test_resonant_odd_coefficient_odd_data(tmp_path):
    # the log-signature test is defined on the default window [T/16, T/2] of a
    # T = 1000 run; shorter runs are still pre-asymptotic on that window
    sim = {
        "L": 1100.0,
        "N": 8192,
        "T": 1000.0,
        "dt": 0.05,
        "record_every": 10,
        "alpha": {"kind": "sech_tanh", "A": 1.0},
        "u0": {"kind": "odd_gaussian", "A": 1.0, "sigma": 1.0},
    }
    cfg = {"simulation": sim, "extract_V": False}
    code, out = _run(tmp_path, "resonant", cfg)
    assert code == cli.EXIT_OK
    rep = json.loads((out / "asymptotics_report.json").read_text())
    re, im = rep["a0"]["value"]  # complex numbers are written as [re, im]
    assert abs(complex(re, im)) <= 1e-8
    for key, ray in rep["rays"].items():
        assert not ray["log_signature"], key
    for name in ("rays.csv", "rays.plt", "vmod.csv", "vmod_off_ray.csv", "origin.csv", "config.json"):
        assert (out / name).exists()


@pytest.fixture(scope="module")
def nonres_cfg():
    sim = {
        **SMALL_SIM,
        "T": 120.0,
        "L": 300.0,
        "N": 4096,
        "alpha": {"kind": "gaussian", "A": 1.0, "sigma": 1.0, "deresonate": True},
        "beta0": 1.0,
    }
    return {"simulation": sim, "predict_times": [60.0, 120.0]}


def test_nonresonant_report(tmp_path, nonres_cfg):
    code, out = _run(tmp_path, "nonresonant", nonres_cfg)
    assert code == cli.EXIT_OK
    rep = json.loads((out / "asymptotics_report.json").read_text())
    assert rep["alpha_hat_resonant"]["plus"] <= 1e-10
    assert rep["normal_form"]["relative"] <= 1e-8
    assert len(rep["tracked"]) == 3
    assert (out / "normalform.json").exists() and (out / "W.csv").exists()
    for name in ("sup.csv", "sup.plt", "W.plt"):
        assert (out / name).exists()


def test_nonresonant_deterministic_and_echo(tmp_path, nonres_cfg):
    code1, out1 = _run(tmp_path, "nonresonant", nonres_cfg, out="a")
    code2, out2 = _run(tmp_path, "nonresonant", nonres_cfg, out="b")
    assert code1 == code2 == cli.EXIT_OK
    first = (out1 / "asymptotics_report.json").read_bytes()
    assert first == (out2 / "asymptotics_report.json").read_bytes()
    assert (out1 / "W.csv").read_bytes() == (out2 / "W.csv").read_bytes()
    # rerun from the echoed, fully resolved config
    code3 = cli.main(["nonresonant", "--config", str(out1 / "config.json"), "--out", str(tmp_path / "c")])
    assert code3 == cli.EXIT_OK
    assert (tmp_path / "c" / "asymptotics_report.json").read_bytes() == first


def test_localdecay_small(tmp_path):
    cfg = {"t_min": 10.0, "t_max": 40.0, "n_times": 3, "L": 200.0, "N": 4096, "W": 20.0}
    code, out = _run(tmp_path, "localdecay", cfg, extra=["--jobs", "2"])
    assert code == cli.EXIT_OK
    rep = json.loads((out / "localdecay.json").read_text())
    assert set(rep["exponents"]) == {"plain", "px_over_bracket", "bracket_minus_one"}
    for v in rep["exponents"]:
        tab = np.loadtxt(out / f"localdecay_{v}.csv", delimiter=",", skiprows=1)
        assert tab.shape == (3, 2)
    assert (out / "localdecay.plt").exists()


def test_oscint_small(tmp_path):
    cfg = {"lambdas": [20.0, 40.0], "phases": [1, 3], "xi": [1.0, 30.0]}
    code, out = _run(tmp_path, "oscint", cfg)
    assert code == cli.EXIT_OK
    rep = json.loads((out / "oscint.json").read_text())
    assert len(rep["lambda_sweep"]) == 2
    assert rep["error_exponent"] < -1.0
    # phase 3 at xi = 30 has a degenerate Hessian: reported, not fatal
    bad = [c for c in rep["cubic"] if "error" in c]
    assert [(c["phase"], c["xi"]) for c in bad] == [(3, 30.0)]
    assert all(c["max_deviation"] < 1e-10 for c in rep["cubic"] if "error" not in c)


def test_sweep_eps_lattice(tmp_path):
    cfg = {"command": "simulate", "base": {"simulation": {**SMALL_SIM, "T": 10.0}}, "eps": [0.0, 0.05]}
    code, out = _run(tmp_path, "sweep", cfg, extra=["--jobs", "2"])
    assert code == cli.EXIT_OK
    rep = json.loads((out / "sweep_report.json").read_text())
    pts = rep["points"]
    assert [p["eps"] for p in pts] == [0.0, 0.05]
    assert pts[0]["summary"]["final_sup"] == 0.0
    assert pts[1]["summary"]["final_sup"] > 0.0
    assert (out / "point_001" / "simulate_report.json").exists()


def test_sweep_amplitude_sets_alpha(tmp_path):
    cfg = {"command": "simulate", "base": {"simulation": {**SMALL_SIM, "T": 5.0}}, "amplitude": [0.5]}
    resolved = cli.resolve_config("sweep", cfg)
    pts = cli.sweep_points(resolved)
    assert pts[0]["config"]["simulation"]["alpha"]["A"] == 0.5
    assert pts[0]["config"]["simulation"]["alpha"]["kind"] == "gaussian"
