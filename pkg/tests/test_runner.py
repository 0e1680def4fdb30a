# -*- coding: utf-8 -*-

import os
from unittest.mock import patch

import numpy as np
import pytest

from attn_game import runner
from attn_game import utils

from .util import micro_config, micro_conf, write_file


def read_bytes(path):
    with open(path, "rb") as fp:
        return fp.read()


def test_run_experiment(tmp_path):
    config = micro_config(output_dir=str(tmp_path), max_steps=2)
    results = runner.run_experiment(config)
    assert len(results) == 1
    result = results[0]
    assert result.status == runner.STATUS_OK
    assert 0 <= result.train_acc <= 1
    assert 0 <= result.gen_acc <= 1
    assert result.group == ("transformer", "at-at")
    run_dir = runner.run_directory(config, 0.01, 0)
    assert run_dir == os.path.join(str(tmp_path), config.config_hash, "0.01", "0")
    for name in (
        runner.METRICS_FILE,
        runner.LOG_FILE,
        runner.SPEAKER_FILE,
        runner.LISTENER_FILE,
        runner.LANGUAGE_FILE,
        runner.DISCREPANCY_FILE,
    ):
        assert os.path.isfile(os.path.join(run_dir, name)), name
    base_dir = os.path.join(str(tmp_path), config.config_hash)
    assert os.path.isfile(os.path.join(base_dir, runner.CONFIG_FILE))
    rows = utils.read_csv(os.path.join(base_dir, "results.csv"))
    assert len(rows) == 1
    assert rows[0]["status"] == runner.STATUS_OK
    assert len(utils.read_csv(os.path.join(run_dir, runner.DISCREPANCY_FILE))) == 20


def test_run_experiment_from_file(tmp_path):
    text = micro_conf + "output_dir = %s\n" % (tmp_path / "runs")
    results = runner.run_experiment(write_file(tmp_path / "micro.conf", text))
    assert [it.seed for it in results] == [0]
    assert os.path.isdir(str(tmp_path / "runs"))


def test_sweep_size(tmp_path):
    config = micro_config(
        output_dir=str(tmp_path), alphas=[0.1, 0.01, 0.001], seeds=[0, 1], speaker_mode="noat"
    )
    results = runner.run_experiment(config)
    assert len(results) == 6
    assert sorted((it.alpha, it.seed) for it in results) == sorted(
        (alpha, seed) for alpha in (0.1, 0.01, 0.001) for seed in (0, 1)
    )
    assert all(it.discrepancy_success is None for it in results)
    assert len(runner.load_results(os.path.join(str(tmp_path), config.config_hash))) == 6


def test_finished_runs_are_reused(tmp_path):
    config = micro_config(output_dir=str(tmp_path))
    first = runner.run_experiment(config)[0]
    with patch("attn_game.training.train", side_effect=AssertionError("retrained")):
        second = runner.run_experiment(config)[0]
    assert second.status == runner.STATUS_OK
    assert abs(second.gen_acc - first.gen_acc) < 1e-6
    assert abs(second.train_acc - first.train_acc) < 1e-6


def test_runs_are_deterministic(tmp_path):
    first = micro_config(output_dir=str(tmp_path / "first"), max_steps=3)
    second = micro_config(output_dir=str(tmp_path / "second"), max_steps=3)
    runner.run_experiment(first)
    runner.run_experiment(second)
    first_dir = runner.run_directory(first, 0.01, 0)
    second_dir = runner.run_directory(second, 0.01, 0)
    for name in (runner.LOG_FILE, runner.SPEAKER_FILE, runner.LISTENER_FILE, runner.METRICS_FILE):
        assert read_bytes(os.path.join(first_dir, name)) == read_bytes(
            os.path.join(second_dir, name)
        )


def test_diverged_run(tmp_path):
    config = micro_config(output_dir=str(tmp_path), max_steps=2, seeds=[0, 1])
    error = utils.TrainingDivergedError("Training diverged at step 1", {"step": 1})
    with patch("attn_game.training.train", side_effect=error):
        results = runner.run_experiment(config)
    assert [it.status for it in results] == [runner.STATUS_FAILED] * 2
    run_dir = runner.run_directory(config, 0.01, 1)
    rows = utils.read_csv(os.path.join(run_dir, runner.FAILURE_FILE))
    assert rows == [{"key": "step", "value": "1"}]
    assert runner.RunResult.read(os.path.join(run_dir, runner.METRICS_FILE)).gen_acc is None


def test_crashed_run(tmp_path):
    config = micro_config(output_dir=str(tmp_path))
    with patch("attn_game.training.train", side_effect=ValueError("boom")):
        results = runner.run_experiment(config)
    assert results[0].status == runner.STATUS_FAILED


def make_result(gen_acc, topsim, seed):
    return runner.RunResult("abc", "lstm", "at-at", 0.01, seed, gen_acc=gen_acc, topsim=topsim)


def test_select_top_k():
    results = [
        make_result(0.5, 0.2, 0),
        make_result(0.9, 0.1, 1),
        make_result(0.9, 0.3, 2),
        make_result(0.7, None, 3),
        make_result(0.9, 0.3, 4),
    ]
    assert [it.seed for it in runner.select_top_k(results, 3)] == [2, 4, 1]
    assert [it.seed for it in runner.select_top_k(results, 5)] == [2, 4, 1, 3, 0]
    assert runner.select_top_k(results, 0) == []
    with pytest.raises(utils.ParamError):
        runner.select_top_k(results, 6)


def test_select_top_k_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        results = [
            make_result(float(rng.integers(0, 5)) / 4, float(rng.uniform(-1, 1)), seed)
            for seed in range(30)
        ]
        top = runner.select_top_k(results, 10)
        assert len(top) == 10
        rest = [it for it in results if it not in top]
        assert min(it.gen_acc for it in top) >= max(it.gen_acc for it in rest)
        gen_accs = [it.gen_acc for it in top]
        assert gen_accs == sorted(gen_accs, reverse=True)


def test_reevaluate_and_analyze(tmp_path):
    config = micro_config(output_dir=str(tmp_path), max_steps=2)
    result = runner.run_experiment(config)[0]
    run_dir = runner.run_directory(config, 0.01, 0)
    assert runner.reevaluate_run(run_dir) == (result.train_acc, result.gen_acc)
    train_acc, gen_acc = runner.reevaluate_run(run_dir, rounds=10)
    assert 0 <= train_acc <= 1
    assert gen_acc in [it / 10.0 for it in range(11)]

    report = runner.analyze_run(run_dir)
    assert len(report.table) == 10
    assert len(report.traces) == 20
    assert len(report.samples) == 20
    assert report.gibberish.rounds == 20
    assert report.matrix.counts.sum() == 40
    for name in ("association.csv", "symbols.csv", runner.DISCREPANCY_FILE, runner.LANGUAGE_FILE):
        assert os.path.isfile(os.path.join(run_dir, name))


def test_parallel_workers(tmp_path):
    config = micro_config(output_dir=str(tmp_path), seeds=[0, 1], max_steps=1)
    parallel = runner.run_experiment(config, workers=2)
    assert [it.seed for it in parallel] == [0, 1]
    assert all(it.status == runner.STATUS_OK for it in parallel)
