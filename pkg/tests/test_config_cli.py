import json

import pytest
import yaml

from vecparisi import cli
from vecparisi.config import PRESETS, ConfigError, RunConfig, load


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name):
    cfg = RunConfig.from_dict({"preset": name})
    again = RunConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_yaml_file_round_trip(tmp_path):
    cfg = RunConfig.from_dict({"preset": "sk-mixture"})
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(cfg.to_dict()))
    assert load(path).to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "raw",
    [
        {"bogus": {}},
        {"preset": "nope"},
        {"preset": "sk-rs", "mc": {"pathz": 3}},
        {"preset": "sk-rs", "point": {"x": [0.0, 0.0]}},
        {"preset": "sk-rs", "base": {"preset": "potts", "dim": 2}},
        [1, 2],
    ],
)
def test_bad_configs(raw):
    with pytest.raises(ValueError):
        RunConfig.from_dict(raw)


def test_missing_file():
    with pytest.raises(ConfigError):
        load("/nonexistent/config.yaml")


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_phi_json(capsys):
    code, out, _ = run(["eval-phi", "--preset", "sk-rs", "--no-meta"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["schema"] == cli.SCHEMA
    assert report["command"] == "eval-phi"
    assert set(report) >= {"phi", "grad", "hess", "config", "grid", "alpha"}
    assert "meta" not in report


def test_meta_present_by_default(capsys):
    code, out, _ = run(["eval-functional", "--preset", "sk-rs"], capsys)
    assert code == 0
    assert {"version", "backend", "threads", "timestamp", "elapsed_s"} <= set(json.loads(out)["meta"])


def test_csv_outputs(tmp_path, capsys):
    code, _, _ = run(["eval-functional", "--preset", "sk-rs", "--format", "csv", "--output", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "eval-functional.csv").read_text().splitlines()
    assert lines[0] == "term,value"
    assert {l.split(",")[0] for l in lines[1:]} == {"total", "term_phi", "term_theta", "term_int", "term_int_direct"}
    assert (tmp_path / "eval-functional.json").exists()
    code, _, _ = run(["eval-phi", "--preset", "sk-rs", "--format", "csv", "--output", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "eval-phi.csv").read_text().startswith("level,q,x1,phi")


def test_csv_needs_output(capsys):
    code, _, err = run(["eval-phi", "--preset", "sk-rs", "--format", "csv"], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "validation"


def test_csv_not_offered_for_potts(tmp_path, capsys):
    code, _, _ = run(["potts", "--format", "csv", "--output", str(tmp_path)], capsys)
    assert code == 1


def test_bad_alpha_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"preset": "sk-rs", "alpha": {"qs": [0, 0.5, 1], "ms": [0.5, 0.2, 1]}}))
    code, _, err = run(["eval-phi", "--config", str(path)], capsys)
    assert code == 1
    payload = json.loads(err)
    assert "(e.m,q)" in payload["message"]
    assert payload["exit_code"] == 1


def test_missing_config_file_exit_code(capsys):
    code, _, _ = run(["eval-phi", "--config", "/nonexistent.yaml"], capsys)
    assert code == 1


def test_numerical_failure_exit_code(tmp_path, capsys):
    # a one-iteration budget cannot converge on the low-temperature model
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"preset": "sk-minimize", "optimize": {"K": 4, "max_iters": 1}}))
    code, out, err = run(["minimize", "--config", str(path), "--no-meta"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "numerical"
    assert json.loads(out)["converged"] is False


def test_oracle_only_at_zero(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"preset": "sk-rs", "mc": {"oracle": True}, "point": {"s": 0.5}}))
    code, _, _ = run(["eval-phi", "--config", str(path)], capsys)
    assert code == 1


def test_eval_phi_deterministic(capsys):
    argv = ["eval-phi", "--preset", "sk-two-level", "--no-meta", "--seed", "3"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b


def test_minimize_trace_csv(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"preset": "sk-minimize", "optimize": {"K": 3}}))
    code, _, _ = run(["minimize", "--config", str(path), "--format", "csv", "--output", str(tmp_path), "--threads", "2"], capsys)
    assert code == 0
    header = (tmp_path / "minimize.csv").read_text().splitlines()[0]
    assert header == "iter,value,grad_norm,m0,m1,m2"


def test_parse_betas():
    assert cli._parse_betas("2:1.0,3:0.5") == [[2, 1.0], [3, 0.5]]
    with pytest.raises(ConfigError):
        cli._parse_betas("2=1")


def test_dumps_handles_non_finite():
    assert json.loads(cli.dumps({"a": float("inf")}))["a"] == "inf"
