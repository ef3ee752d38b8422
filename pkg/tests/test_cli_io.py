import json
import xml.dom.minidom
from pathlib import Path

import numpy as np
import pytest

from nehari_dp import HypothesisViolation, parse_config
from nehari_dp.analysis import SWEEP_HEADER, SweepRow, SweepTable
from nehari_dp.cli import main
from nehari_dp.config import DEFAULT_CONFIG, load_config
from nehari_dp.errors import ConfigError
from nehari_dp.fibering import default_problem
from nehari_dp.report import read_sweep_csv, write_report

GOLDEN = Path(__file__).parent / "golden"
DATA = Path(__file__).parents[1] / "src" / "nehari_dp" / "data"


def small_config(tmp_path, **problem):
    cfg = json.loads(DEFAULT_CONFIG.to_json())
    cfg["problem"]["domain"] = {"kind": "square", "nx": 8, "ny": 8}
    cfg["problem"].update(problem)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_default_config_golden():
    assert DEFAULT_CONFIG.to_json() + "\n" == (GOLDEN / "default_config.json").read_text()
    assert load_config(DATA / "default.json") == DEFAULT_CONFIG


def test_default_config_builds_default_problem():
    a, b = load_config(DATA / "default.json").build_problem(), default_problem()
    assert a.exps == b.exps and a.lam == b.lam and a.mu == b.mu and a.a == b.a
    assert np.array_equal(a.mesh.nodes, b.mesh.nodes)


def test_round_trip_nondefault():
    text = json.dumps({
        "problem": {
            "domain": {"kind": "interval", "n": 20},
            "exponents": {"p": 1.5, "q": 2.5, "gamma": 0.3, "r": 4},
            "lambda": 0.2,
            "mu": {"kind": "nodal", "values": [0.0] + [1.0] * 19 + [0.0]},
            "a": {"kind": "affine", "c0": 1.0, "c1": 0.5},
        },
        "solver": {"seed": 7, "n_starts": 3, "eps_singular": 1e-9},
        "output": "elsewhere",
    })
    cfg = parse_config(text)
    assert parse_config(cfg.to_json()) == cfg
    assert cfg.domain.kind == "interval" and cfg.solver.seed == 7


@pytest.mark.parametrize("field, value, constraint", [
    ("gamma", 1.5, "0<γ<1"),
    ("r", 2.2, "q<r"),
    ("p", 0.9, "1<p"),
    ("r", 20.0, "r<p*"),
])
def test_hypothesis_violations(field, value, constraint):
    cfg = json.loads(DEFAULT_CONFIG.to_json())
    cfg["problem"]["exponents"][field] = value
    with pytest.raises(HypothesisViolation) as exc:
        parse_config(json.dumps(cfg))
    assert exc.value.constraint == constraint
    assert f"{constraint} violated" in str(exc.value)


@pytest.mark.parametrize("text, where", [
    ('{"problem": ', "line 1"),
    ('{"solvr": {}}', "<root>"),
    ('{"problem": {"exponents": {"p": 1.8, "s": 2.2}}}', "problem.exponents"),
    ('{"problem": {"exponents": {"p": "1.8"}}}', "problem.exponents.p"),
    ('{"solver": {"max_iters": 1.5}}', "solver.max_iters"),
    ('{"solver": {"step_shrink": 2.0}}', "solver"),
    ('{"problem": {"mu": {"kind": "poly"}}}', "problem.mu"),
    ('{"problem": {"domain": {"kind": "disk"}}}', "problem.domain"),
])
def test_config_errors(text, where):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert where in str(exc.value)


def test_negative_mu_rejected():
    with pytest.raises(HypothesisViolation, match="μ≥0"):
        parse_config('{"problem": {"exponents": {"p": 1.8, "q": 2.2, "gamma": 0.5, "r": 3},'
                     ' "mu": {"kind": "constant", "value": -1}}}')


def _row(lam):
    return SweepRow(lam, -0.5, 2.0, 0.0, 1e-7, 2e-7, "ok")


def test_sweep_csv_schema(tmp_path):
    table = SweepTable([_row(0.1), _row(0.2), _row(0.3)])
    path = write_report(table, tmp_path / "s.csv")
    lines = path.read_text().splitlines()
    assert lines[0] + "\n" == (GOLDEN / "sweep_header.csv").read_text()
    assert tuple(lines[0].split(",")) == SWEEP_HEADER
    assert len(lines) == 1 + len(table)
    assert read_sweep_csv(path)[1]["lambda"] == "0.2"


def _is_svg(path):
    text = Path(path).read_text()
    assert text.startswith('<?xml version="1.0"')
    doc = xml.dom.minidom.parseString(text.encode())
    return doc.documentElement.tagName == "svg"


def test_solve_cli(tmp_path, capsys):
    cfg = small_config(tmp_path)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    for branch in ("plus", "minus"):
        data = json.loads((out / f"{branch}.json").read_text())
        assert data["branch"] == branch and data["converged"]
        assert (out / f"{branch}.txt").exists()
        assert _is_svg(out / f"{branch}.svg")
    assert json.loads((out / "plus.json").read_text())["energy"] < 0 < json.loads((out / "minus.json").read_text())["energy"]
    # verify re-reads the stored field
    assert main(["verify", str(out / "plus_u.csv"), "--config", str(cfg), "--out", str(out), "--branch", "plus"]) == 0
    assert main(["verify", str(out / "plus_u.csv"), "--config", str(cfg), "--out", str(out), "--branch", "minus"]) == 3
    assert json.loads((out / "verify_plus_u.json").read_text())["pass"] is False


def test_solve_lambda_override_too_large(tmp_path):
    assert main(["solve", "--config", str(small_config(tmp_path)), "--lambda", "1e5",
                 "--out", str(tmp_path / "o")]) == 3


def test_verify_missing_file(tmp_path):
    assert main(["verify", str(tmp_path / "nope.csv"), "--config", str(small_config(tmp_path)),
                 "--out", str(tmp_path)]) == 3


def test_sweep_cli_deterministic_across_jobs(tmp_path):
    cfg = small_config(tmp_path)
    outs = []
    for jobs in (1, 8):
        out = tmp_path / f"j{jobs}"
        args = ["sweep", "--config", str(cfg), "--out", str(out), "--lambda-min", "0.01",
                "--lambda-max", "300", "--lambda-steps", "6", "--seed", "3", "--jobs", str(jobs)]
        assert main(args) == 0
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = read_sweep_csv(tmp_path / "j1" / "sweep.csv")
    assert len(rows) == 6 and rows[-1]["status"] == "lambda_too_large"
    assert _is_svg(tmp_path / "j1" / "sweep.svg")


def test_sweep_bad_grid(tmp_path):
    assert main(["sweep", "--config", str(small_config(tmp_path)), "--lambda-min", "2",
                 "--lambda-max", "1", "--out", str(tmp_path)]) == 2


def test_threshold_cli(tmp_path):
    out = tmp_path / "t"
    assert main(["threshold", "--config", str(small_config(tmp_path)), "--out", str(out),
                 "--resolution", "0.05"]) == 0
    data = json.loads((out / "threshold.json").read_text())
    assert 0 < data["lambda_lo"] < data["lambda_hi"] <= data["ray_bound"]


def test_props_cli(capsys):
    assert main(["props"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 10 and all(l.startswith("[PASS]") for l in lines)


def test_usage_and_config_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--seed", "x"])
    assert exc.value.code == 1
    bad = small_config(tmp_path, exponents={"p": 1.8, "q": 2.2, "gamma": 1.5, "r": 3})
    assert main(["solve", "--config", str(bad)]) == 2
    assert "0<γ<1 violated" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["solve", "--config", str(small_config(tmp_path)), "--lambda", "-1"]) == 2
