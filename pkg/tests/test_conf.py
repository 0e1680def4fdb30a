# -*- coding: utf-8 -*-

import pytest

from attn_game import conf
from attn_game import utils
from attn_game import world

from .util import micro_conf, micro_config, micro_yaml, write_file


def test_load_key_value(tmp_path):
    config = conf.ExperimentConfig.load(write_file(tmp_path / "micro.conf", micro_conf))
    assert config.version == 1.0
    assert config.num_values == 5
    assert config.split == "6/4"
    assert config.architecture == "transformer"
    assert config.alphas == [0.01]
    assert config.seeds == [0]
    assert config.beta == 0.1
    assert config.setting == "at-at"


def test_load_yaml(tmp_path):
    config = conf.ExperimentConfig.load(write_file(tmp_path / "micro.yml", micro_yaml))
    assert config.learning_rate == 1e-4
    assert isinstance(config.learning_rate, float)
    assert config.hidden_size == 8
    with pytest.raises(utils.ConfigError):
        conf.ExperimentConfig.load(write_file(tmp_path / "list.yaml", "- 1\n- 2\n"))


def test_load_errors(tmp_path):
    with pytest.raises(utils.ConfigError):
        conf.ExperimentConfig.load(str(tmp_path / "missing.conf"))
    with pytest.raises(utils.ConfigError) as exc_info:
        conf.parse_key_value("version = 1\nbroken line\n")
    assert exc_info.value.keys == ["line 2"]
    assert conf.parse_key_value("# only comments\n\nseeds = 3 # trailing\n") == {"seeds": 3}


def test_missing_version():
    with pytest.raises(utils.ConfigError) as exc_info:
        conf.ExperimentConfig({"num_values": 5})
    assert exc_info.value.keys == ["version"]


def test_unknown_keys():
    with pytest.raises(utils.ConfigError) as exc_info:
        conf.ExperimentConfig({"version": 1, "colour": "red", "alpha": 0.1})
    assert exc_info.value.keys == ["alpha", "colour"]


def test_invalid_values_are_collected():
    with pytest.raises(utils.ConfigError) as exc_info:
        micro_config(vocab_size=0, beta=-1, speaker_mode="half", architecture="gru")
    assert exc_info.value.keys == ["architecture", "beta", "speaker_mode", "vocab_size"]
    for key, value in (
        ("seeds", [1, 1]),
        ("alphas", []),
        ("ema_decay", 1.5),
        ("learning_rate", 0),
        ("split", "30"),
        ("max_steps", -1),
        ("reward_baseline", "yes"),
    ):
        with pytest.raises(utils.ConfigError) as exc_info:
            micro_config(**{key: value})
        assert exc_info.value.keys == [key]
    with pytest.raises(utils.ConfigError) as exc_info:
        micro_config(world_kind=world.KIND_FEATURE_FILE)
    assert exc_info.value.keys == ["feature_file"]


def test_profiles():
    config = conf.ExperimentConfig({"version": 1, "profile": "full"})
    assert config.batch_size == 480
    assert config.max_steps == 50000
    assert config.eval_rounds == 15000
    assert config.hidden_size == 256
    assert config.alphas == [0.1, 0.01, 0.001]
    assert config.seeds == list(range(10))
    config = conf.ExperimentConfig({"version": 1, "profile": "full", "hidden_size": 64})
    assert config.hidden_size == 64
    assert conf.ExperimentConfig({"version": 1}).max_steps == 3000
    with pytest.raises(utils.ConfigError) as exc_info:
        conf.ExperimentConfig({"version": 1, "profile": "cluster"})
    assert exc_info.value.keys == ["profile"]


def test_value_shortcuts():
    config = micro_config(seeds=3, alphas=0.1)
    assert config.seeds == [0, 1, 2]
    assert config.alphas == [0.1]
    assert micro_config(alphas=["1e-3"]).alphas == [0.001]


def test_config_hash():
    config = micro_config()
    assert len(config.config_hash) == 12
    assert config.config_hash == micro_config().config_hash
    assert config.config_hash == micro_config(output_dir="elsewhere", seeds=[4, 5]).config_hash
    assert config.config_hash == micro_config(workers=4, log_interval=7).config_hash
    assert config.config_hash != micro_config(beta=0.2).config_hash
    assert config.config_hash != micro_config(listener_mode="noat").config_hash


def test_dump_and_load(tmp_path):
    config = micro_config(learning_rate=3e-4, attribute_arities=[2, 3])
    path = str(tmp_path / "config.yml")
    config.dump(path)
    loaded = conf.ExperimentConfig.load(path)
    assert loaded.values == config.values
    assert loaded.config_hash == config.config_hash


def test_replace_and_world_spec():
    config = micro_config()
    other = config.replace(speaker_mode="noat")
    assert other.setting == "noat-at"
    assert config.setting == "at-at"
    spec = config.world_spec()
    assert spec.num_values == 5
    built = world.build_world(spec, config.world_seed)
    assert len(built.universe) == 10
    assert built.feature_size == 6
    with pytest.raises(AttributeError):
        config.colour
