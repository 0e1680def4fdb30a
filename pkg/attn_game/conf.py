# -*- coding: utf-8 -*-
"""Experiment configuration
"""

import os

import yaml

from . import agents
from . import registry
from . import utils
from . import world

PROFILES = {
    "desk": {
        "batch_size": 64,
        "max_steps": 3000,
        "eval_rounds": 2000,
        "hidden_size": 64,
        "seeds": list(range(10)),
        "alphas": [0.01],
    },
    "full": {
        "batch_size": 480,
        "max_steps": 50000,
        "eval_rounds": 15000,
        "hidden_size": 256,
        "seeds": list(range(10)),
        "alphas": [0.1, 0.01, 0.001],
    },
}

DEFAULTS = {
    "version": None,
    "profile": "desk",
    "world_kind": world.KIND_SYNTHETIC,
    "feature_file": None,
    "num_values": 10,
    "num_attributes": 2,
    "attribute_arities": None,
    "grid_h": 1,
    "grid_w": 8,
    "item_h": 1,
    "item_w": 1,
    "feature_size": 16,
    "noise": 0.1,
    "split": "30/15",
    "world_seed": 0,
    "num_candidates": 15,
    "distractor_source": "split",
    "architecture": "transformer",
    "speaker_mode": "at",
    "listener_mode": "at",
    "listener_attention_scale": "auto",
    "vocab_size": 20,
    "message_length": 2,
    "hidden_size": 64,
    "batch_size": 64,
    "max_steps": 3000,
    "eval_rounds": 2000,
    "alphas": [0.01],
    "beta": 0.1,
    "learning_rate": 1e-4,
    "ema_decay": 0.99,
    "reward_baseline": False,
    "seeds": list(range(10)),
    "analysis_rounds": 1000,
    "discrepancy_target": "target",
    "gibberish_threshold": 0.5,
    "top_k": 10,
    "log_interval": 100,
    "log_timing": False,
    "output_dir": "runs",
    "workers": 1,
}

# Fields that do not change what a single run computes; alphas and seeds
# are part of the run directory path
NON_SEMANTIC_KEYS = (
    "output_dir",
    "workers",
    "log_interval",
    "log_timing",
    "profile",
    "alphas",
    "seeds",
    "top_k",
)

POSITIVE_INT_KEYS = (
    "num_values",
    "num_attributes",
    "grid_h",
    "grid_w",
    "item_h",
    "item_w",
    "feature_size",
    "num_candidates",
    "vocab_size",
    "message_length",
    "hidden_size",
    "batch_size",
    "eval_rounds",
    "analysis_rounds",
    "top_k",
    "log_interval",
    "workers",
)

NON_NEGATIVE_INT_KEYS = ("max_steps", "world_seed")

FLOAT_KEYS = ("beta", "learning_rate", "noise", "ema_decay", "gibberish_threshold")

CHOICES = {
    "world_kind": (world.KIND_SYNTHETIC, world.KIND_FEATURE_FILE),
    "speaker_mode": agents.MODES,
    "listener_mode": agents.MODES,
    "listener_attention_scale": ("auto", "scaled", "unscaled"),
    "distractor_source": ("split", world.SPLIT_UNIVERSE),
    "discrepancy_target": ("target", "chosen"),
}


def parse_key_value(text):
    """Flat ``key = value`` lines, values typed with the YAML scalar rules"""
    values = {}
    errors = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append("line %d" % lineno)
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        try:
            values[key] = yaml.safe_load(value.strip()) if value.strip() else None
        except yaml.YAMLError:
            errors.append(key)
    if errors:
        raise utils.ConfigError("Unparsable config entries: %s" % ", ".join(errors), errors)
    return values


class ExperimentConfig(object):
    """Validated experiment settings

    Profile values sit between the built-in defaults and the explicit keys.
    """

    def __init__(self, values):
        values = dict(values)
        unknown = sorted(it for it in values if it not in DEFAULTS)
        if unknown:
            raise utils.ConfigError("Unknown config keys: %s" % ", ".join(unknown), unknown)
        if not values.get("version"):
            raise utils.ConfigError("Field `version` not found", ["version"])
        profile = values.get("profile", DEFAULTS["profile"])
        if profile not in PROFILES:
            raise utils.ConfigError("Unknown profile %s" % profile, ["profile"])
        self._values = dict(DEFAULTS)
        self._values.update(PROFILES[profile])
        self._values.update(values)
        if isinstance(self._values["seeds"], int):
            self._values["seeds"] = list(range(self._values["seeds"]))
        if isinstance(self._values["alphas"], (int, float, str)):
            self._values["alphas"] = [self._values["alphas"]]
        # YAML reads exponent forms such as 1e-4 as strings
        for key in FLOAT_KEYS:
            self._values[key] = _coerce_float(self._values[key])
        if isinstance(self._values["alphas"], list):
            self._values["alphas"] = [_coerce_float(it) for it in self._values["alphas"]]
        self.validate()

    @staticmethod
    def load(path):
        if not os.path.isfile(path):
            raise utils.ConfigError("Config file %s not exist" % path, [])
        with open(path, encoding="utf-8") as fp:
            text = fp.read()
        if os.path.splitext(path)[1] in (".yml", ".yaml"):
            try:
                values = yaml.safe_load(text)
            except yaml.YAMLError as ex:
                raise utils.ConfigError("Invalid config file %s: %s" % (path, ex), [])
            if not isinstance(values, dict):
                raise utils.ConfigError("Config file %s is not a mapping" % path, [])
        else:
            values = parse_key_value(text)
        config = ExperimentConfig(values)
        utils.logger.debug("[%s] Loaded %s from %s" % (config.__class__.__name__, config, path))
        return config

    def __str__(self):
        return "<ExperimentConfig %s %s hash=%s>" % (
            self.architecture,
            self.setting,
            self.config_hash,
        )

    def __getattr__(self, name):
        values = self.__dict__.get("_values")
        if values is not None and name in values:
            return values[name]
        raise AttributeError(name)

    def validate(self):
        values = self._values
        bad = []
        for key in POSITIVE_INT_KEYS:
            if not isinstance(values[key], int) or isinstance(values[key], bool) or values[key] < 1:
                bad.append(key)
        for key in NON_NEGATIVE_INT_KEYS:
            if not isinstance(values[key], int) or isinstance(values[key], bool) or values[key] < 0:
                bad.append(key)
        for key, choices in CHOICES.items():
            if values[key] not in choices:
                bad.append(key)
        if values["architecture"] not in registry.agent_registry.architectures():
            bad.append("architecture")
        alphas = values["alphas"]
        if (
            not isinstance(alphas, list)
            or not alphas
            or any(not _is_number(it) or it < 0 for it in alphas)
        ):
            bad.append("alphas")
        if not _is_number(values["beta"]) or values["beta"] < 0:
            bad.append("beta")
        if not _is_number(values["learning_rate"]) or values["learning_rate"] <= 0:
            bad.append("learning_rate")
        if not _is_number(values["noise"]) or values["noise"] < 0:
            bad.append("noise")
        if not _is_number(values["ema_decay"]) or not 0 <= values["ema_decay"] <= 1:
            bad.append("ema_decay")
        if not _is_number(values["gibberish_threshold"]) or not 0 <= values["gibberish_threshold"] <= 1:
            bad.append("gibberish_threshold")
        seeds = values["seeds"]
        if (
            not isinstance(seeds, list)
            or not seeds
            or any(not isinstance(it, int) or it < 0 for it in seeds)
            or len(set(seeds)) != len(seeds)
        ):
            bad.append("seeds")
        arities = values["attribute_arities"]
        if arities is not None and (
            not isinstance(arities, list)
            or not arities
            or any(not isinstance(it, int) or it < 1 for it in arities)
        ):
            bad.append("attribute_arities")
        if values["world_kind"] == world.KIND_FEATURE_FILE and not values["feature_file"]:
            bad.append("feature_file")
        if not isinstance(values["reward_baseline"], bool):
            bad.append("reward_baseline")
        if not isinstance(values["log_timing"], bool):
            bad.append("log_timing")
        if not isinstance(values["split"], str) or values["split"].count("/") != 1:
            bad.append("split")
        if bad:
            raise utils.ConfigError(
                "Invalid config values: %s" % ", ".join(sorted(set(bad))), sorted(set(bad))
            )

    @property
    def values(self):
        return dict(self._values)

    @property
    def setting(self):
        return "%s-%s" % (self.speaker_mode, self.listener_mode)

    def semantic_items(self):
        return [
            (key, value)
            for key, value in self._values.items()
            if key not in NON_SEMANTIC_KEYS
        ]

    @property
    def config_hash(self):
        return utils.config_hash(self.semantic_items())

    def world_spec(self):
        return world.WorldSpec(
            kind=self.world_kind,
            num_values=self.num_values,
            num_attributes=self.num_attributes,
            attribute_arities=self.attribute_arities,
            grid_h=self.grid_h,
            grid_w=self.grid_w,
            item_h=self.item_h,
            item_w=self.item_w,
            feature_size=self.feature_size,
            noise=self.noise,
            split=self.split,
            feature_file=self.feature_file,
        )

    def replace(self, **kwargs):
        values = dict(self._values)
        values.update(kwargs)
        return ExperimentConfig(values)

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fp:
            yaml.safe_dump(self._values, fp, default_flow_style=False, sort_keys=True)


def _coerce_float(value):
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)
