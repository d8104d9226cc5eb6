import json

import pytest

from netharvest.cli import main
from netharvest.generators import load_edgelist


def test_generate_writes_loader_compatible_files(tmp_path, capsys):
    out = tmp_path / "data"
    rc = main(
        ["generate", "--preset", "ten-clique", "--count", "2", "--out", str(out)]
    )
    assert rc == 0
    gt = load_edgelist(out / "instance_0000.edges",
                       target_spec=out / "instance_0000.targets")
    assert gt.n == 10
    assert gt.m == 45
    assert gt.target_nodes.size == 10
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["count"] == 2
    assert len(manifest["instances"]) == 2


def test_generate_passes_preset_args(tmp_path):
    out = tmp_path / "data"
    rc = main(
        [
            "generate", "--preset", "nac-sbm-800", "--count", "1",
            "--seed", "4", "--out", str(out), "--arg", "n=400",
        ]
    )
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["instances"][0]["n"] == 400


def test_train_and_evaluate_roundtrip(tmp_path, capsys):
    train_yaml = tmp_path / "train.yaml"
    train_yaml.write_text(
        "\n".join(
            [
                "preset: ten-clique",
                f"out_dir: {tmp_path / 'train'}",
                "train:",
                "  T: 2",
                "  H: 2",
                "  agents: 1",
                "  epochs: 1",
                "  budget: 3",
                "  k: 6",
                "  channels: 3",
                "  n_conv: 2",
                "  micro_batch: 4",
                "embed:",
                "  algorithm: ppr",
            ]
        )
    )
    rc = main(["train", "--config", str(train_yaml)])
    assert rc == 0
    ck = tmp_path / "train" / "checkpoint"
    assert (ck / "policy.bin").exists()
    assert (tmp_path / "train" / "training_log.csv").exists()

    eval_yaml = tmp_path / "eval.yaml"
    eval_yaml.write_text(
        "\n".join(
            [
                "preset: ten-clique",
                "agent: nac",
                f"checkpoint: {ck}",
                "budget: 3",
                "repetitions: 2",
                f"out_dir: {tmp_path / 'eval'}",
                "nac:",
                "  k: 6",
                "  channels: 3",
                "  n_conv: 2",
                "embed:",
                "  algorithm: ppr",
            ]
        )
    )
    rc = main(["evaluate", "--config", str(eval_yaml)])
    assert rc == 0
    assert (tmp_path / "eval" / "aggregate.csv").exists()
    assert len(list((tmp_path / "eval" / "runs").glob("*.csv"))) == 2


def test_evaluate_set_overrides_budget(tmp_path):
    cfg = tmp_path / "e.yaml"
    cfg.write_text(
        "\n".join(
            [
                "preset: ten-clique",
                "agent: mod",
                "budget: 9",
                "repetitions: 1",
                f"out_dir: {tmp_path / 'out'}",
            ]
        )
    )
    rc = main(["evaluate", "--config", str(cfg), "--set", "budget=4"])
    assert rc == 0
    rows = (tmp_path / "out" / "runs" / "rep_000.csv").read_text().splitlines()
    assert len(rows) == 1 + 4


def test_report_verb(tmp_path):
    cfg = tmp_path / "e.yaml"
    cfg.write_text(
        "\n".join(
            [
                "preset: ten-clique",
                "agent: mod",
                "budget: 4",
                "repetitions: 2",
                f"out_dir: {tmp_path / 'out'}",
            ]
        )
    )
    assert main(["evaluate", "--config", str(cfg)]) == 0
    rc = main(
        [
            "report",
            "--runs", str(tmp_path / "out" / "runs"),
            "--out", str(tmp_path / "agg.csv"),
        ]
    )
    assert rc == 0
    assert (tmp_path / "agg.csv").read_bytes() == (
        tmp_path / "out" / "aggregate.csv"
    ).read_bytes()


@pytest.mark.slow
def test_embedbench_verb_tiny(tmp_path):
    rc = main(
        [
            "embedbench",
            "--out", str(tmp_path / "bench"),
            "--algorithms", "mod",
            "--r", "0.01",
            "--p-t", "1.0",
            "--reps", "1",
            "--max-steps", "3",
        ]
    )
    assert rc == 0
    assert (tmp_path / "bench" / "embedbench.csv").exists()


def test_error_exit_codes(tmp_path, capsys):
    # missing config file -> ConfigError -> exit code 2
    assert main(["evaluate", "--config", str(tmp_path / "nope.yaml")]) == 2
    err = capsys.readouterr().err
    assert "error:" in err
    # unknown embedbench algorithm -> 2
    assert (
        main(
            [
                "embedbench",
                "--out", str(tmp_path / "b"),
                "--algorithms", "sorcery",
                "--reps", "1",
            ]
        )
        == 2
    )
    # unknown preset -> 2
    assert (
        main(["generate", "--preset", "wat", "--out", str(tmp_path / "g")]) == 2
    )
