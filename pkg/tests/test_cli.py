import json

import numpy as np
import pytest

from wsrbeam.cli import main
from wsrbeam.datasets import read_dataset


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_gen_deterministic_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.wds", tmp_path / "b.wds"
    code, _ = run_cli(capsys, "gen", "--out", str(a), "--k", "3", "--nt", "4",
                      "--count", "4", "--d", "0.8", "--seed", "5")
    assert code == 0
    code, _ = run_cli(capsys, "gen", "--out", str(b), "--k", "3", "--nt", "4",
                      "--count", "4", "--d", "0.8", "--seed", "5")
    assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_labeled_counts(tmp_path, capsys):
    path = tmp_path / "lab.wds"
    code, body = run_cli(capsys, "gen", "--out", str(path), "--k", "3", "--nt", "4",
                         "--count", "10", "--d", "0.8", "--seed", "1",
                         "--label", "wmmse", "--label-iters", "30")
    assert code == 0
    assert body["labeled"] is True
    _, records = read_dataset(path)
    assert len(records) == 10
    assert all(rec.solution_w is not None for rec in records)


def test_gen_mixed_nt_equal_blocks(tmp_path, capsys):
    path = tmp_path / "mix.wds"
    code, _ = run_cli(capsys, "gen", "--out", str(path), "--k", "3",
                      "--nt", "mixed:4,6,8,10", "--count", "8", "--d", "0.8", "--seed", "2")
    assert code == 0
    _, records = read_dataset(path)
    counts = {}
    for rec in records:
        counts[rec.sample.nt[0]] = counts.get(rec.sample.nt[0], 0) + 1
    assert counts == {4: 2, 6: 2, 8: 2, 10: 2}
    # non-divisible count is an invalid argument
    code, _ = run_cli(capsys, "gen", "--out", str(tmp_path / "x.wds"), "--k", "3",
                      "--nt", "mixed:4,6,8", "--count", "8", "--d", "0.8")
    assert code == 2


def test_solve_and_trace_csv(tmp_path, capsys):
    data = tmp_path / "d.wds"
    run_cli(capsys, "gen", "--out", str(data), "--k", "3", "--nt", "4",
            "--count", "4", "--d", "0.8", "--seed", "3")
    out = tmp_path / "m.csv"
    trace = tmp_path / "t.csv"
    code, body = run_cli(capsys, "solve", "--dataset", str(data), "--solver", "pgp",
                         "-T", "30", "--out", str(out), "--trace", str(trace))
    assert code == 0
    assert body["summary"]["scheme"] == "pgp"
    trace_lines = trace.read_text().splitlines()
    assert trace_lines[0] == "instance,iteration,wsr,cum_runtime_s"
    # monotone per-instance traces with backtracking
    rows = [line.split(",") for line in trace_lines[1:]]
    per_instance = {}
    for inst, it, wsr_val, _ in rows:
        per_instance.setdefault(inst, []).append(float(wsr_val))
    for vals in per_instance.values():
        assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))


def test_solve_rnn_requires_model(tmp_path, capsys):
    data = tmp_path / "d.wds"
    run_cli(capsys, "gen", "--out", str(data), "--k", "3", "--nt", "4",
            "--count", "2", "--d", "0.8", "--seed", "4")
    code, _ = run_cli(capsys, "solve", "--dataset", str(data), "--solver", "rnn-pgp")
    assert code == 2


def test_missing_dataset_is_io_exit(tmp_path, capsys):
    code, _ = run_cli(capsys, "solve", "--dataset", str(tmp_path / "none.wds"),
                      "--solver", "pgp")
    assert code == 4


def test_train_eval_round_trip(tmp_path, capsys):
    data = tmp_path / "d.wds"
    run_cli(capsys, "gen", "--out", str(data), "--k", "3", "--nt", "4", "--count", "6",
            "--d", "0.8", "--seed", "5", "--label", "wmmse", "--label-iters", "30")
    model = tmp_path / "m.wbm"
    code, body = run_cli(capsys, "train", "--dataset", str(data), "--out", str(model),
                         "-T", "3", "-c", "2", "--hidden", "8", "--stage1", "2",
                         "--stage2", "1", "--batch", "3", "--seed", "0")
    assert code == 0
    assert model.exists()
    code, body = run_cli(capsys, "eval", "--model", str(model), "--dataset", str(data),
                         "--baseline-iters", "30")
    assert code == 0
    assert body["summary"]["instances"] == 6


def test_train_repeat_same_model_bytes(tmp_path, capsys):
    data = tmp_path / "d.wds"
    run_cli(capsys, "gen", "--out", str(data), "--k", "3", "--nt", "4", "--count", "4",
            "--d", "0.8", "--seed", "6", "--label", "wmmse", "--label-iters", "25")
    m1, m2 = tmp_path / "m1.wbm", tmp_path / "m2.wbm"
    args = ["train", "--dataset", str(data), "-T", "3", "-c", "2", "--hidden", "6",
            "--stage1", "1", "--stage2", "1", "--batch", "2", "--seed", "9"]
    assert run_cli(capsys, *args, "--out", str(m1))[0] == 0
    assert run_cli(capsys, *args, "--out", str(m2))[0] == 0
    lines1 = m1.read_text().splitlines()
    lines2 = m2.read_text().splitlines()
    assert lines1[1] == lines2[1]          # identical parameters
    h1, h2 = json.loads(lines1[0]), json.loads(lines2[0])
    h1["extra"].pop("dataset"), h2["extra"].pop("dataset")
    assert h1 == h2


def test_unsupervised_only_flag(tmp_path, capsys):
    data = tmp_path / "d.wds"
    run_cli(capsys, "gen", "--out", str(data), "--k", "3", "--nt", "4", "--count", "4",
            "--d", "0.8", "--seed", "7")
    model = tmp_path / "u.wbm"
    code, body = run_cli(capsys, "train", "--dataset", str(data), "--out", str(model),
                         "-T", "3", "-c", "2", "--hidden", "6", "--stage1", "0",
                         "--stage2", "1", "--batch", "2", "--seed", "0")
    assert code == 0
    assert body["unsupervised_only"] is True
    header = json.loads(model.read_text().splitlines()[0])
    assert header["extra"]["trained_unsupervised_only"] is True


def test_config_file_merging(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"count": 3, "n_links": 3, "nt": 4, "d_km": 0.8,
                               "seed": 11}))
    out = tmp_path / "c.wds"
    code, body = run_cli(capsys, "gen", "--config", str(cfg), "--out", str(out),
                         "--count", "5")
    assert code == 0
    assert body["count"] == 5              # flag overrides config


def test_sweep_cli_requires_model_for_axis(tmp_path, capsys):
    code, _ = run_cli(capsys, "sweep", "--axis", "d", "--values", "1.0",
                      "--workdir", str(tmp_path / "wk"))
    assert code == 2
