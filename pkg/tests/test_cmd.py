# -*- coding: utf-8 -*-

import os
import subprocess
import sys

from attn_game import world

from .util import micro_conf, write_file

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def run(*args):
    return subprocess.run(
        [sys.executable, "-m", "attn_game"] + list(args),
        cwd=ROOT,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        universal_newlines=True,
    )


def test_version():
    proc = run("-V")
    assert proc.returncode == 0
    assert "v0.1.0" in proc.stdout


def test_gen_features(tmp_path):
    spec = write_file(tmp_path / "micro.conf", micro_conf)
    out = str(tmp_path / "features.emft")
    proc = run("gen-features", "--spec", spec, "--out", out, "--instances", "2")
    assert proc.returncode == 0, proc.stderr
    with open(out, "rb") as fp:
        dataset = world.parse_feature_file(fp.read())
    assert len(dataset.records) == 20
    assert dataset.num_patches == 4


def test_train_and_analyze(tmp_path):
    spec = write_file(tmp_path / "micro.conf", micro_conf)
    out = str(tmp_path / "runs")
    proc = run("train", "-c", spec, "-o", out)
    assert proc.returncode == 0, proc.stderr
    sweep_dirs = os.listdir(out)
    assert len(sweep_dirs) == 1
    run_dir = os.path.join(out, sweep_dirs[0], "0.01", "0")
    proc = run("eval", "--run", run_dir, "--rounds", "10")
    assert proc.returncode == 0, proc.stderr
    assert "gen_acc" in proc.stdout
    proc = run("analyze", "--run", run_dir, "--rounds", "10")
    assert proc.returncode == 0, proc.stderr
    assert "|" in proc.stdout


def test_invalid_config(tmp_path):
    spec = write_file(tmp_path / "bad.conf", micro_conf + "vocab_size = 0\n")
    proc = run("train", "-c", spec, "-o", str(tmp_path / "runs"))
    assert proc.returncode != 0
    assert "vocab_size" in proc.stdout + proc.stderr
    proc = run("train", "-c", str(tmp_path / "missing.conf"))
    assert proc.returncode != 0
