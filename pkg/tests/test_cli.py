import csv
import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from minmaxlab.cli import main, run_experiment
from minmaxlab.errors import ConfigError
from minmaxlab.serialization import distribution_to_csv, dump_json, function_to_dict

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
ALL_CONFIGS = sorted(p.name for p in CONFIGS.glob("*.json"))


def _run(tmp_path, name, seed=3, fmt="all", sub="out"):
    config = CONFIGS / name
    command = json.loads(config.read_text())["command"]
    out = tmp_path / sub
    code = main([command, "--config", str(config), "--seed", str(seed), "--out-dir", str(out), "--format", fmt])
    return code, out


@pytest.mark.parametrize("name", ALL_CONFIGS)
def test_shipped_configs_pass_and_are_reproducible(tmp_path, name):
    code, first = _run(tmp_path, name, sub="a")
    assert code == 0
    code, second = _run(tmp_path, name, sub="b")
    assert code == 0
    files = sorted(p.name for p in first.iterdir())
    assert {"report.json", "report.csv", "report.md", "trace.csv"} <= set(files)
    match, mismatch, errors = filecmp.cmpfiles(first, second, files, shallow=False)
    assert not mismatch and not errors


def test_report_contents(tmp_path):
    code, out = _run(tmp_path, "hardcore_parity.json")
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "pass" and report["seed"] == 3
    assert "wall_time" not in report
    names = [c["name"] for c in report["checks"]]
    assert names == ["density", "max advantage", "strategy support"]
    markdown = (out / "report.md").read_text()
    assert markdown.startswith("# hardcore: pass")
    assert "## Verification" in markdown
    certificate = json.loads((out / "certificate.json").read_text())
    assert certificate["kind"] == "hardcore"


def test_tsr_table_rows(tmp_path):
    code, out = _run(tmp_path, "tsr_table.json")
    assert code == 0
    with open(out / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["model"] for r in rows] == ["linf-minmax", "boosting", "lp-minmax"]
    assert [round(float(r["k_prime"]), 2) for r in rows] == [13.0, 18.0, 16.33]
    assert float(rows[2]["eps_prime"]) == 2.0 ** -15
    assert float(rows[2]["s_prime"]) == pytest.approx(256.0)


def test_tsr_inline_model(tmp_path, capsys):
    code = main(["tsr", "--seed", "0", "--out-dir", str(tmp_path), "--k", "100", "--lambda", "10",
                 "--A-log2", "7", "--alpha", "3"])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["rows"]) == 1
    assert abs(report["rows"][0]["k_prime"] - 83 / 5) <= 0.1
    assert "tsr: pass" in capsys.readouterr().out


def test_tsr_flags_nonunit_q(tmp_path):
    code = main(["tsr", "--seed", "0", "--out-dir", str(tmp_path), "--q", "4", "--format", "markdown"])
    assert code == 0
    assert "differs from 1" in (tmp_path / "report.md").read_text()


def test_tsr_insecure_model_fails(tmp_path):
    code = main(["tsr", "--seed", "0", "--out-dir", str(tmp_path), "--k", "40", "--lambda", "10"])
    assert code == 2


def test_game_from_input_files(tmp_path):
    rng = np.random.default_rng(0)
    tables = [function_to_dict(__import__("minmaxlab").TestFunction(rng.random(8))) for _ in range(4)]
    dump_json({"functions": tables}, tmp_path / "functions.json")
    distribution_to_csv(__import__("minmaxlab").FiniteDistribution(rng.dirichlet(np.ones(8))), tmp_path / "ref.csv")
    config = {"command": "game", "inputs": {"functions": "functions.json", "reference": "ref.csv"},
              "constraint": {"tag": "density", "epsilon": 0.25}, "parameters": {"tolerance": 1e-3}}
    dump_json(config, tmp_path / "game.json")
    code = main(["game", "--config", str(tmp_path / "game.json"), "--seed", "1", "--out-dir", str(tmp_path / "o")])
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["parameters"]["constraint.epsilon"] == 0.25


@pytest.mark.parametrize("config", [
    {"command": "game", "fixture": "matching_pennies", "bogus": 1},
    {"command": "game", "fixture": "no_such_fixture"},
    {"command": "game", "fixture": "matching_pennies", "parameters": {"tolerance": -1}},
    {"command": "game", "fixture": "matching_pennies", "parameters": {"max_rounds": 1.5}},
    {"command": "hardcore", "fixture": "matching_pennies"},
    {"command": "game", "inputs": {"functions": "missing.json"}},
])
def test_bad_configs_exit_with_one(tmp_path, config, capsys):
    dump_json(config, tmp_path / "bad.json")
    code = main(["game", "--config", str(tmp_path / "bad.json"), "--seed", "0", "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_missing_config_and_bad_json(tmp_path):
    assert main(["game", "--config", str(tmp_path / "nope.json"), "--seed", "0"]) == 1
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["game", "--config", str(tmp_path / "broken.json"), "--seed", "0",
                 "--out-dir", str(tmp_path / "o")]) == 1


def test_seed_is_mandatory():
    with pytest.raises(SystemExit):
        main(["game"])


def test_run_experiment_validates_inputs(tmp_path):
    with pytest.raises(ConfigError):
        run_experiment("nope", {}, 0, tmp_path)
    with pytest.raises(ConfigError):
        run_experiment("game", {"fixture": "matching_pennies"}, -1, tmp_path)
    report = run_experiment("game", {"fixture": "matching_pennies"}, 0, tmp_path)
    assert report.passed and report.summary["value"] == pytest.approx(0.0, abs=1e-3)
