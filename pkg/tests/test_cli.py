import json
from pathlib import Path

import pytest

from vdclab import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_cli_runs_a_config(tmp_path, capsys):
    rc = cli.main(["select-primes", "--config", str(CONFIGS / "c07_prime_plan.json"), "--out", str(tmp_path)])
    assert rc == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["mode"] == "select-primes"
    assert "7.953125" in capsys.readouterr().out


def test_cli_seed_override_changes_digest(tmp_path):
    cfg = str(CONFIGS / "c06_difference_law.json")
    cli.main(["difference-law", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["difference-law", "--config", cfg, "--seed", "99", "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert b["seed"] == 99 and a["config_digest"] != b["config_digest"]


def test_cli_unknown_mode(tmp_path, capsys):
    rc = cli.main(["frobnicate", "--config", str(CONFIGS / "c07_prime_plan.json"), "--out", str(tmp_path)])
    assert rc == 2 and "unknown mode" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


def test_cli_mode_mismatch(tmp_path, capsys):
    rc = cli.main(["audit", "--config", str(CONFIGS / "c07_prime_plan.json"), "--out", str(tmp_path)])
    assert rc == 2


def test_cli_budget_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mode": "ffpoints", "q": [31],
                               "instance": {"n": 4, "r": 1, "polys": ["x1^3 + x2^3 + x3^3 + x4^3"]}}))
    rc = cli.main(["ffpoints", "--config", str(cfg), "--budget", "1000", "--out", str(tmp_path / "o")])
    assert rc == 1 and "budget" in capsys.readouterr().err.lower()


def test_help_documents_csv_columns(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    assert "q, count, main, residual, bound, ratio" in capsys.readouterr().out
