import json

import pytest

from tlp.cli import run_cli
from tlp.config import ConfigError, RunConfig, load_config


def test_usage_errors_exit_1(capsys):
    assert run_cli([]) == 1
    assert run_cli(["frobnicate"]) == 1
    assert run_cli(["evaluate", "--classifiers", "SVM"]) == 1
    assert run_cli(["ingest", "--seed", "x"]) == 1


def test_missing_input_exits_2(tmp_path, capsys):
    code = run_cli(["ingest", "--tickets", str(tmp_path / "none.jsonl"), "--commits", str(tmp_path / "c.csv")])
    assert code == 2
    assert "missing" in capsys.readouterr().err


def test_bad_config_exits_1(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seeed": 3}))
    assert run_cli(["ingest", "--config", str(cfg)]) == 1
    cfg.write_text("[1, 2]")
    assert run_cli(["ingest", "--config", str(cfg)]) == 1


def test_config_roundtrip_and_env(tmp_path, monkeypatch):
    cfg = RunConfig(seed=5, classifiers=["RF"])
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert load_config(path) == cfg
    monkeypatch.setenv("TLP_CONFIG", str(path))
    assert load_config().seed == 5
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"points": ["sometime"]})


def test_small_pipeline(tmp_path):
    data, out = tmp_path / "data", tmp_path / "out"
    base = ["--out", str(out)]
    inputs = ["--tickets", str(data / "tickets.jsonl"), "--commits", str(data / "commits.csv")]
    assert run_cli(["synth", *base, "--n", "250", "--dest", str(data)]) == 0
    assert run_cli(["ingest", *base, *inputs]) == 0
    audit = json.loads((out / "ingest/audit.json").read_text())
    assert audit["survivors"] > 150
    assert run_cli(["featurize", *base, *inputs, "--repo-metrics", str(data / "repo_metrics.csv"),
                    "--points", "inprogress,closed"]) == 0
    assert run_cli(["evaluate", *base, "--points", "inprogress,closed", "--classifiers", "lr",
                    "--balancing", "none", "--selection", "none", "--baseline-trials", "10"]) == 0
    # report without a power stage still works and says so
    assert run_cli(["report", *base]) == 0
    summary = (out / "report/summary.md").read_text()
    assert "Power analysis absent" in summary
    assert run_cli(["power", *base, "--points", "inprogress,closed"]) == 0
    assert run_cli(["report", *base]) == 0
    manifest = json.loads((out / "report/manifest.json").read_text())
    assert manifest["power_section"] and "top10.csv" in manifest["files"]


def test_stage_order_enforced(tmp_path):
    assert run_cli(["evaluate", "--out", str(tmp_path / "nothing")]) == 2
    assert run_cli(["report", "--out", str(tmp_path / "nothing")]) == 2
