import json
import subprocess
import sys

import pytest

from pulsefront import cli
from pulsefront.artifacts import read_csv
from pulsefront.config import ConfigError, echo, parse_config

NAGUMO = 0.282842712474619


def _run(tmp_path, command, cfg, name=None):
    out = tmp_path / (name or command)
    path = tmp_path / f"{name or command}.json"
    path.write_text(json.dumps(cfg))
    code = cli.main([command, "--config", str(path), "--out", str(out)])
    summary = json.loads((out / cli.SUMMARY_NAME).read_text())
    return code, out, summary


def test_minimal_config_defaults():
    c = parse_config('{"command": "front", "nonlinearity": {"family": "cubic", "theta": 0.3}}')
    assert c.grid.M == 30.0 and c.grid.dxi == 0.05
    assert c.workers == 1 and c.deterministic is True


def test_theta_rejected():
    with pytest.raises(ConfigError, match=r"nonlinearity\.theta: theta out of \(0,1\)"):
        parse_config('{"nonlinearity": {"family": "cubic", "theta": 1.5}}')


@pytest.mark.parametrize("text, key", [
    ('{"grid": {"M": 30, "dx": 0.05}}', "grid.dx"),
    ('{"bogus": 1}', "bogus"),
    ('{"grid": {"M": -1}}', "grid.M"),
    ('{"homogenize": {"T_list": [0.1, 0.2]}}', "homogenize.T_list"),
    ('{"command": "front",', "malformed JSON"),
])
def test_bad_configs_name_the_key(text, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(text)


@pytest.mark.parametrize("text", [
    "{}",
    '{"command": "perturb", "nonlinearity": {"family": "combination", "period": 0.5}, "perturb": {"eps_list": [0.1]}}',
    '{"nonlinearity": {"family": "product", "g": "logistic", "rate": 2.0}, "front": {"c_bracket": [-1, 1]}}',
])
def test_round_trip(text):
    c = parse_config(text)
    assert parse_config(echo(c)) == c
    assert echo(parse_config(echo(c))) == echo(c)


def test_analyze_three_fixed_points(tmp_path):
    code, out, summary = _run(tmp_path, "analyze", {"nonlinearity": {"family": "cubic", "theta": 0.3}})
    assert code == 0 and summary["status"] == "ok"
    assert len(summary["result"]["fixed_points"]) == 3
    cols, rows = read_csv(out / "fixed_points.csv")
    assert cols == ["alpha", "multiplier", "class", "eigenvalue"] and len(rows) == 3
    assert set(summary) == set(cli.SUMMARY_KEYS)


def test_front_speed_and_outputs(tmp_path):
    cfg = {"command": "front", "nonlinearity": {"family": "cubic", "theta": 0.3}}
    code, out, summary = _run(tmp_path, "front", cfg)
    assert code == 0
    assert abs(summary["result"]["speed"] - NAGUMO) <= 0.01
    assert sorted(p.name for p in out.iterdir()) == sorted([cli.CONFIG_NAME, "profile.csv", cli.SUMMARY_NAME])
    cols, rows = read_csv(out / "profile.csv")
    assert cols == ["t", "xi", "u"] and len(rows) == 32 * 1201
    # the effective-config echo parses back
    assert parse_config((out / cli.CONFIG_NAME).read_text()).command == "front"
    # determinism
    _, out2, _ = _run(tmp_path, "front", cfg, name="front-again")
    assert (out / "profile.csv").read_bytes() == (out2 / "profile.csv").read_bytes()


def test_homogenize_flagged_row(tmp_path):
    cfg = {"nonlinearity": {"family": "combination"}, "homogenize": {"T_list": [20.0, 0.5]}}
    code, out, summary = _run(tmp_path, "homogenize", cfg)
    assert code == 2 and summary["status"] == "flagged"
    cols, rows = read_csv(out / "sweep.csv")
    assert cols == ["param", "speed", "fixed_point", "eigenvalue", "profile_dist", "status"]
    status = {r[0]: r[-1] for r in rows}
    assert status["20"].startswith("flagged") and status["0.5"] == "ok"


def test_perturb_workers_invariance(tmp_path):
    base = {"nonlinearity": {"family": "combination", "period": 0.5},
            "perturb": {"eps_list": [0.1, 0.05], "envelope_tol": 1.0}}
    results = []
    for w in (1, 2):
        code, out, summary = _run(tmp_path, "perturb", dict(base, workers=w), name=f"perturb-{w}")
        assert code in (0, 2)
        cols, _ = read_csv(out / "sweep.csv")
        assert {"p_dev", "pprime_dev"} <= set(cols)
        results.append((out / "sweep.csv").read_bytes())
    assert results[0] == results[1]


def test_failure_exit_one(tmp_path):
    # KPP has no bistable average: the front solver refuses and the run fails cleanly
    code, out, summary = _run(tmp_path, "front", {"nonlinearity": {"family": "logistic"}})
    assert code == 1 and summary["status"] == "failed"
    assert summary["diagnostic"].startswith("ValueError:") and "bistable" in summary["diagnostic"]
    assert (out / "profile.csv").exists() and (out / cli.CONFIG_NAME).exists()


def test_usage_and_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nonlinearity": {"family": "cubic", "theta": 1.5}}')
    assert cli.main(["front", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "theta out of (0,1)" in capsys.readouterr().err
    with pytest.raises(SystemExit) as err:
        cli.main(["bogus", "--config", str(bad)])
    assert err.value.code == 1
    assert cli.main(["front", "--config", str(tmp_path / "missing.json")]) == 1


def test_command_mismatch(tmp_path):
    with pytest.raises(ConfigError, match="does not match"):
        cli.run("analyze", parse_config('{"command": "front"}'), tmp_path / "o")


def test_console_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"nonlinearity": {"family": "cubic"}}')
    proc = subprocess.run([sys.executable, "-m", "pulsefront.cli", "analyze", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_stability_command(tmp_path):
    cfg = {"nonlinearity": {"family": "cubic"}, "stability": {"n_periods": 30, "initial": {"shape": "smoothstep", "width": 4}}}
    code, out, summary = _run(tmp_path, "stability", cfg)
    assert code == 0
    res = summary["result"]
    assert res["rate_ok"] and res["D"]["stable"] and res["D"]["D"] > 0
    cols, rows = read_csv(out / "distance.csv")
    assert cols == ["t", "shift", "distance"] and len(rows) == 31


def test_verify_subsolution_command(tmp_path):
    cfg = {"nonlinearity": {"family": "cubic"}, "subsolution": {"q0": 0.05, "horizon_periods": 2}}
    code, out, summary = _run(tmp_path, "verify-subsolution", cfg)
    assert code == 0 and summary["result"]["passed"]
    assert set(summary["result"]["reports"]) == {"sub", "super"}
    cols, rows = read_csv(out / "barrier.csv")
    assert cols == ["t", "kind", "omega_minus", "omega_0", "omega_plus"]
    assert {r[1] for r in rows} == {"sub", "super"}
