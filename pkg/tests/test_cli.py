import dataclasses

import pytest

from iovslice import cli
from iovslice.config import RunConfig, parse_config, serialize_config
from iovslice.dqn import TrainConfig
from iovslice.env import EnvConfig


def tiny_cfg(**run_kw):
    from iovslice.worlds import WorkloadConfig

    return RunConfig(
        env=EnvConfig(m=2, n=2, F=2, T=6),
        train=TrainConfig(episodes=3, warmup=16, batch_size=8, seed=1),
        workload=WorkloadConfig(deadline_len_slots=4),
        eval_episodes=3,
        **run_kw,
    )


def test_config_roundtrip_defaults():
    text = serialize_config(RunConfig())
    cfg = parse_config(text)
    assert cfg == RunConfig()
    assert parse_config(serialize_config(cfg)) == cfg


def test_config_roundtrip_modified():
    cfg = tiny_cfg(seed=7, size_multipliers=(2, 4))
    again = parse_config(serialize_config(cfg))
    assert again == cfg


def test_config_rejects_unknown_key():
    with pytest.raises(ValueError, match="unknown config key"):
        parse_config("env.bogus = 3\n")
    with pytest.raises(ValueError, match="section"):
        parse_config("m = 3\n")


def test_print_config_subcommand(capsys):
    assert cli.main(["print-config"]) == 0
    out = capsys.readouterr().out
    assert "env.m = 3" in out
    assert "train.lr = 1e-05" in out
    assert parse_config(out) == RunConfig()


def test_cmd_train_writes_outputs(tmp_path):
    cfg = tiny_cfg()
    ckpt, log_path = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    assert ckpt.exists() and log_path.exists()
    lines = log_path.read_text().splitlines()
    assert lines[0] == cli.TRAINING_LOG_SCHEMA
    assert lines[1] == "episode,return,moving_avg_200,epsilon,loss_mean"
    assert len(lines) == 2 + 3


def test_cmd_train_single_episode_blank_moving_avg(tmp_path):
    cfg = tiny_cfg()
    cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, episodes=1))
    _, log_path = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    lines = log_path.read_text().splitlines()
    assert len(lines) == 3
    fields = lines[2].split(",")
    assert fields[0] == "1" and fields[2] == ""  # moving average absent


def test_train_determinism_byte_for_byte(tmp_path):
    cfg = tiny_cfg()
    ckpt1, log1 = cli.cmd_train(cfg, tmp_path / "a", quiet=True)
    ckpt2, log2 = cli.cmd_train(cfg, tmp_path / "b", quiet=True)
    assert ckpt1.read_bytes() == ckpt2.read_bytes()
    assert log1.read_bytes() == log2.read_bytes()


def test_cmd_eval_rows_and_bounds(tmp_path):
    cfg = tiny_cfg()
    ckpt, _ = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    out = cli.cmd_eval(cfg, ckpt, tmp_path / "eval.csv", episodes=3, sweep="none")
    lines = out.read_text().splitlines()
    assert lines[0] == cli.EVAL_SCHEMA
    header = lines[1].split(",")
    assert header == cli.EVAL_COLUMNS
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    assert len(rows) == 3
    m, n = cfg.env.m, cfg.env.n
    for row in rows:
        assert row["algorithm"] == "DQL"
        assert int(row["slice1_packets"]) + int(row["slice2_packets"]) <= 2 * m
        assert int(row["slice1_delivered"]) <= m * n
        assert int(row["slice2_delivered"]) <= m * n
        assert len(row["channel_hash"]) == 16


def test_cmd_eval_shape_mismatch(tmp_path):
    cfg = tiny_cfg()
    ckpt, _ = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    bigger = dataclasses.replace(cfg, env=EnvConfig(m=3, n=4, F=2, T=6))
    with pytest.raises(ValueError, match="checkpoint shapes"):
        cli.cmd_eval(bigger, ckpt, tmp_path / "eval.csv", episodes=1, sweep="none")


def test_cmd_eval_sweep_rows(tmp_path):
    cfg = tiny_cfg(size_multipliers=(2, 4))
    ckpt, _ = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    out = cli.cmd_eval(cfg, ckpt, tmp_path / "eval.csv", episodes=2, sweep="sizes")
    lines = out.read_text().splitlines()
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 2 * 2  # sweep points x episodes
    sizes = {row[5] for row in rows}
    assert sizes == {"600", "1200"}


def test_cmd_baseline_paired_hashes(tmp_path):
    cfg = tiny_cfg()
    ckpt, _ = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    eval_out = cli.cmd_eval(cfg, ckpt, tmp_path / "eval.csv", episodes=2, sweep="none")
    base_out = cli.cmd_baseline(
        cfg, list(cli.bl.BASELINE_NAMES), tmp_path / "base.csv", episodes=2, sweep="none"
    )
    def rows_of(path):
        lines = path.read_text().splitlines()
        header = lines[1].split(",")
        return [dict(zip(header, line.split(","))) for line in lines[2:]]

    eval_rows = rows_of(eval_out)
    base_rows = rows_of(base_out)
    assert len(base_rows) == 3 * 2
    by_episode = {}
    for row in (*eval_rows, *base_rows):
        by_episode.setdefault(row["episode"], set()).add(row["channel_hash"])
    for ep, hashes in by_episode.items():
        assert len(hashes) == 1  # identical channel across algorithms


def test_cmd_baseline_unknown_name(tmp_path):
    cfg = tiny_cfg()
    with pytest.raises(ValueError, match="valid names"):
        cli.cmd_baseline(cfg, ["NOMA-XX"], tmp_path / "x.csv", episodes=1, sweep="none")
    # and through the CLI entry point: nonzero exit, message on stderr
    rc = cli.main(
        ["baseline", "--algorithms", "NOMA-XX", "--out", str(tmp_path / "x.csv"), "--episodes", "1"]
    )
    assert rc == 1


def test_cmd_plotdata_aggregates(tmp_path):
    cfg = tiny_cfg()
    ckpt, _ = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    eval_out = cli.cmd_eval(cfg, ckpt, tmp_path / "eval.csv", episodes=3, sweep="none")
    base_out = cli.cmd_baseline(cfg, ["NOMA-MP"], tmp_path / "base.csv", episodes=3, sweep="none")
    plot = cli.cmd_plotdata([eval_out, base_out], tmp_path / "plot.csv")
    lines = plot.read_text().splitlines()
    assert lines[0] == cli.PLOTDATA_SCHEMA
    header = lines[1].split(",")
    assert header == cli.PLOTDATA_COLUMNS
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    assert len(rows) == 2  # algorithms x one sweep point
    for row in rows:
        assert row["episodes"] == "3"
        total = float(row["slice1_mean"]) + float(row["slice2_mean"])
        assert total == pytest.approx(float(row["total_mean"]))


def test_cmd_plotdata_single_episode_blank_stderr(tmp_path):
    cfg = tiny_cfg()
    ckpt, _ = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    eval_out = cli.cmd_eval(cfg, ckpt, tmp_path / "eval.csv", episodes=1, sweep="none")
    plot = cli.cmd_plotdata([eval_out], tmp_path / "plot.csv")
    lines = plot.read_text().splitlines()
    row = dict(zip(lines[1].split(","), lines[2].split(",")))
    assert row["slice1_stderr"] == "" and row["total_stderr"] == ""


def test_cmd_plotdata_rejects_wrong_schema(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# schema: something-else/9\na,b\n1,2\n")
    with pytest.raises(ValueError, match="schema"):
        cli.cmd_plotdata([bad], tmp_path / "plot.csv")
    mangled = tmp_path / "mangled.csv"
    mangled.write_text(cli.EVAL_SCHEMA + "\nalgorithm,episode\nDQL,0\n")
    with pytest.raises(ValueError, match="missing"):
        cli.cmd_plotdata([mangled], tmp_path / "plot.csv")


def test_cli_eval_determinism(tmp_path):
    cfg = tiny_cfg()
    ckpt, _ = cli.cmd_train(cfg, tmp_path / "run", quiet=True)
    a = cli.cmd_eval(cfg, ckpt, tmp_path / "a.csv", episodes=2, sweep="none")
    b = cli.cmd_eval(cfg, ckpt, tmp_path / "b.csv", episodes=2, sweep="none")
    assert a.read_bytes() == b.read_bytes()


def test_cmd_train_unwritable_out_fails_fast(tmp_path):
    import time

    # a file where a directory should be defeats even a root test runner
    blocked = tmp_path / "blocked"
    blocked.write_text("")
    cfg = tiny_cfg()
    t0 = time.time()
    with pytest.raises(OSError):
        cli.cmd_train(cfg, blocked / "run", quiet=True)
    assert time.time() - t0 < 2.0  # failed before any training compute


def test_cmd_oracle_runs(tmp_path):
    cfg = tiny_cfg()
    results = cli.cmd_oracle(cfg, instances=3, out_path=tmp_path / "oracle.csv")
    assert len(results) == 3
    for r in results:
        for name in cli.bl.BASELINE_NAMES:
            assert r[name] <= r["optimum"]
    assert (tmp_path / "oracle.csv").exists()


def test_main_end_to_end(tmp_path, capsys):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(serialize_config(tiny_cfg()))
    assert cli.main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "run"), "--quiet"]) == 0
    assert cli.main(
        [
            "eval",
            "--config", str(cfg_path),
            "--checkpoint", str(tmp_path / "run" / "checkpoint.bin"),
            "--out", str(tmp_path / "eval.csv"),
            "--episodes", "2",
        ]
    ) == 0
    assert (tmp_path / "eval.csv").exists()
