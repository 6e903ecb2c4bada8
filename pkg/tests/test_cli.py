from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml

from stancelens.cli import EXIT_CONFIG, EXIT_DATA, main

from test_pipeline import synth_cfg


def _write_config(tmp_path: Path, cfg: dict) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


@pytest.fixture
def cli_setup(tmp_path):
    cfg = synth_cfg(tmp_path / "work")
    return _write_config(tmp_path, cfg), tmp_path / "work"


def test_validate_ok(cli_setup, capsys):
    config_path, _ = cli_setup
    assert main(["validate", "-c", str(config_path)]) == 0
    assert "config ok" in capsys.readouterr().out


def test_validate_reports_all_errors(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("seed: nope\njobs: 0\nknn: {k: 0}\n", encoding="utf-8")
    assert main(["validate", "-c", str(path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert err.count("error:") >= 3


def test_validate_missing_file(capsys):
    assert main(["validate", "-c", "/nope/missing.yaml"]) == EXIT_CONFIG


def test_synth_then_pipeline(cli_setup, capsys):
    config_path, workdir = cli_setup
    assert main(["synth", "-c", str(config_path)]) == 0
    assert (workdir / "corpus.jsonl").is_file()
    assert main(["pipeline", "-c", str(config_path)]) == 0
    out = capsys.readouterr().out
    assert "report: done" in out
    for artifact in (
        "filtered.jsonl",
        "matrix.txt",
        "knn.txt",
        "embedding.txt",
        "assignment.txt",
        "daily_counts.csv",
        "daily_tweets.svg",
    ):
        assert (workdir / artifact).is_file(), artifact
    # second invocation skips
    assert main(["pipeline", "-c", str(config_path)]) == 0
    assert "skipped" in capsys.readouterr().out


def test_stage_missing_input_exit_code(cli_setup, capsys):
    config_path, _ = cli_setup
    assert main(["matrix", "-c", str(config_path)]) == EXIT_DATA
    assert "data error" in capsys.readouterr().err


def test_bad_override_exit_code(cli_setup, capsys):
    config_path, _ = cli_setup
    assert main(["pipeline", "-c", str(config_path), "--set", "knn.k=0"]) == EXIT_CONFIG


def test_seed_flag_overrides_config(cli_setup, capsys, tmp_path):
    config_path, workdir = cli_setup
    assert main(["synth", "-c", str(config_path)]) == 0
    assert main(["filter", "-c", str(config_path), "--seed", "7"]) == 0
    manifest = json.loads((workdir / "manifests" / "filter.json").read_text())
    assert manifest["stage"] == "filter"


def test_filter_single_recipe(cli_setup, tmp_path, capsys):
    config_path, workdir = cli_setup
    assert main(["synth", "-c", str(config_path)]) == 0
    out_path = tmp_path / "base_only.jsonl"
    code = main(
        [
            "filter",
            "-c",
            str(config_path),
            "--recipe",
            "base",
            "--input",
            str(workdir / "corpus.jsonl"),
            "--output",
            str(out_path),
        ]
    )
    assert code == 0
    assert out_path.is_file() and out_path.stat().st_size > 0


def test_filter_recipe_requires_output(cli_setup):
    config_path, _ = cli_setup
    assert main(["filter", "-c", str(config_path), "--recipe", "base"]) == EXIT_CONFIG


def test_unknown_recipe_is_config_error(cli_setup):
    config_path, _ = cli_setup
    code = main(
        ["filter", "-c", str(config_path), "--recipe", "ghost", "--output", "/tmp/x"]
    )
    assert code == EXIT_CONFIG
