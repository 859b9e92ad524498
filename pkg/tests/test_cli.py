"""Command-line interface: exit codes, flag precedence, subcommand wiring."""

from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from ctd4 import cli
from ctd4.harness import CSV_HEADER


def write_config(tmp_path, **overrides):
    """A tiny, fast flat config file; overrides go straight into the JSON."""
    flat = {
        "env_id": "pendulum_swingup",
        "total_steps": 12,
        "eval_interval": 6,
        "eval_episodes": 1,
        "seeds": [0],
        "out_dir": str(tmp_path / "out"),
        "replay_capacity": 200,
        "batch_size": 8,
        "warmup_steps": 5,
        "hidden_sizes": [8, 8],
    }
    flat.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(flat))
    return str(path)


def echoed_config(tmp_path):
    with open(tmp_path / "out" / "config.json") as f:
        return json.load(f)


def test_train_exit_zero_and_reports_each_seed(tmp_path, capsys):
    rc = cli.main(["train", "--config", write_config(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "seed 0:" in out
    assert "final_eval_mean_return=" in out
    assert os.path.exists(tmp_path / "out" / "seed0_metrics.csv")
    assert os.path.exists(tmp_path / "out" / "seed0_checkpoint.bin")


def test_flags_override_config_file(tmp_path, capsys):
    config = write_config(tmp_path, total_steps=1000, seeds=[5])
    rc = cli.main([
        "train", "--config", config,
        "--steps", "6", "--seed", "1", "--critics", "2", "--fusion", "min",
    ])
    assert rc == 0
    echoed = echoed_config(tmp_path)
    assert echoed["total_steps"] == 6
    assert echoed["seeds"] == [1]
    assert echoed["num_critics"] == 2
    assert echoed["fusion"] == "min"
    assert os.path.exists(tmp_path / "out" / "seed1_metrics.csv")


def test_seeds_flag_parses_comma_list(tmp_path):
    rc = cli.main([
        "train", "--config", write_config(tmp_path), "--seeds", "2,3",
    ])
    assert rc == 0
    assert echoed_config(tmp_path)["seeds"] == [2, 3]
    assert os.path.exists(tmp_path / "out" / "seed2_metrics.csv")
    assert os.path.exists(tmp_path / "out" / "seed3_metrics.csv")


def test_seed_and_seeds_are_mutually_exclusive(tmp_path, capsys):
    rc = cli.main([
        "train", "--config", write_config(tmp_path),
        "--seed", "0", "--seeds", "1,2",
    ])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_env_is_rejected_by_the_parser(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--env", "lunar_lander"])
    assert exc.value.code == 2


def test_unknown_fusion_is_rejected_by_the_parser():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--fusion", "median"])
    assert exc.value.code == 2


def test_malformed_config_json_exits_one(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    rc = cli.main(["train", "--config", str(path)])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_non_object_config_exits_one(tmp_path, capsys):
    path = tmp_path / "list.json"
    path.write_text("[1, 2]")
    rc = cli.main(["train", "--config", str(path)])
    assert rc == 1
    assert "JSON object" in capsys.readouterr().err


def test_unknown_config_key_exits_one(tmp_path, capsys):
    rc = cli.main(["train", "--config", write_config(tmp_path, warmup=3)])
    assert rc == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_missing_config_file_exits_one(tmp_path, capsys):
    rc = cli.main(["train", "--config", str(tmp_path / "nope.json")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_eval_reads_back_a_checkpoint(tmp_path, capsys):
    config = write_config(tmp_path)
    assert cli.main(["train", "--config", config]) == 0
    capsys.readouterr()
    ckpt = str(tmp_path / "out" / "seed0_checkpoint.bin")
    rc = cli.main([
        "eval", "--config", config, "--checkpoint", ckpt, "--episodes", "2",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "mean_return=" in out
    assert "episodes=2" in out


def test_eval_requires_checkpoint_flag(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["eval"])
    assert exc.value.code == 2


def test_eval_checkpoint_config_mismatch_exits_one(tmp_path, capsys):
    config = write_config(tmp_path)
    assert cli.main(["train", "--config", config]) == 0
    capsys.readouterr()
    ckpt = str(tmp_path / "out" / "seed0_checkpoint.bin")
    # a different ensemble size cannot be loaded from this file
    rc = cli.main([
        "eval", "--config", config, "--checkpoint", ckpt, "--critics", "5",
    ])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_ablate_fusion_command_writes_summary(tmp_path, capsys):
    rc = cli.main(["ablate-fusion", "--config", write_config(tmp_path)])
    assert rc == 0
    assert "summary=" in capsys.readouterr().out
    with open(tmp_path / "out" / "summary.csv") as f:
        lines = f.read().splitlines()
    assert lines[0] == "strategy,seed,final_eval_mean_return"
    assert len(lines) == 4  # three strategies x one seed


def test_ablate_ensemble_command_honours_sizes(tmp_path):
    rc = cli.main([
        "ablate-ensemble", "--config", write_config(tmp_path),
        "--sizes", "1,2",
    ])
    assert rc == 0
    assert os.path.isdir(tmp_path / "out" / "n1")
    assert os.path.isdir(tmp_path / "out" / "n2")
    with open(tmp_path / "out" / "summary.csv") as f:
        assert len(f.read().splitlines()) == 3


def test_bias_command_writes_report(tmp_path, capsys):
    config = write_config(tmp_path, env_id="const_probe", total_steps=0)
    assert cli.main(["train", "--config", config]) == 0
    ckpt = str(tmp_path / "out" / "seed0_checkpoint.bin")
    report = str(tmp_path / "bias.csv")
    rc = cli.main([
        "bias", "--config", config, "--checkpoint", ckpt,
        "--rollouts", "2", "--report", report,
    ])
    assert rc == 0
    with open(report) as f:
        lines = f.read().splitlines()
    assert lines[0] == "rollout,critic_mean,mc_return,bias"
    assert len(lines) == 4  # two rollouts + mean row


def test_plot_command_writes_svg(tmp_path, capsys):
    csv_path = tmp_path / "m.csv"
    csv_path.write_text(
        CSV_HEADER + "\n10,1.0,0.0,0.1,0.1,0.05,1.0\n"
    )
    out = str(tmp_path / "curve.svg")
    rc = cli.main(["plot", str(csv_path), "--out", out])
    assert rc == 0
    with open(out) as f:
        assert f.read().startswith("<svg")


def test_plot_propagates_errors_as_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    rc = cli.main(["plot", str(bad), "--out", str(tmp_path / "x.svg")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_installed_entry_point_runs():
    proc = subprocess.run(
        ["ctd4", "--help"], capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "train" in proc.stdout
    assert "ablate-fusion" in proc.stdout


def test_module_invocation_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "ctd4.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
