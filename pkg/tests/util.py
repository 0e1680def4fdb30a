# -*- coding: utf-8 -*-

"""
"""

import os

import numpy as np
import pytest

from attn_game import agents
from attn_game import conf
from attn_game import tensor
from attn_game import world

slow = pytest.mark.skipif(
    not os.environ.get("ATTN_GAME_SLOW"),
    reason="directional replications run only with ATTN_GAME_SLOW=1",
)


micro_conf = r"""
# micro world, used by the runner and cmdline tests
version = 1.0

num_values = 5
num_attributes = 2
grid_w = 4
feature_size = 6
split = 6/4
num_candidates = 3

architecture = transformer
vocab_size = 4
message_length = 2
hidden_size = 8

batch_size = 8
max_steps = 0
eval_rounds = 30
analysis_rounds = 20
log_interval = 2
seeds = [0]
alphas = [0.01]
"""

micro_yaml = r"""
version: 1.0
num_values: 5
num_attributes: 2
grid_w: 4
feature_size: 6
split: 6/4
num_candidates: 3
vocab_size: 4
message_length: 2
hidden_size: 8
batch_size: 8
max_steps: 0
eval_rounds: 30
analysis_rounds: 20
learning_rate: 1e-4
seeds: [0]
"""


def micro_values(**kwargs):
    values = {
        "version": 1.0,
        "num_values": 5,
        "num_attributes": 2,
        "grid_w": 4,
        "feature_size": 6,
        "split": "6/4",
        "num_candidates": 3,
        "vocab_size": 4,
        "message_length": 2,
        "hidden_size": 8,
        "batch_size": 8,
        "max_steps": 0,
        "eval_rounds": 30,
        "analysis_rounds": 20,
        "log_interval": 2,
        "seeds": [0],
        "alphas": [0.01],
    }
    values.update(kwargs)
    return values


def micro_config(**kwargs):
    return conf.ExperimentConfig(micro_values(**kwargs))


def micro_spec(**kwargs):
    values = {
        "num_values": 5,
        "num_attributes": 2,
        "grid_h": 1,
        "grid_w": 4,
        "feature_size": 6,
        "noise": 0.1,
        "split": "6/4",
    }
    values.update(kwargs)
    return world.WorldSpec(**values)


def micro_world(seed=0, **kwargs):
    return world.build_world(micro_spec(**kwargs), seed)


def micro_sizes(num_patches=4, feature_size=6, vocab_size=4, message_length=2, hidden_size=8):
    return agents.AgentSizes(
        vocab_size, message_length, hidden_size, num_patches, feature_size
    )


def micro_agents(architecture, speaker_mode, listener_mode, sizes=None, seed=0):
    sizes = sizes or micro_sizes()
    rng = np.random.default_rng(seed)
    speaker = agents.create_speaker(architecture, sizes, speaker_mode, rng)
    listener = agents.create_listener(architecture, sizes, listener_mode, rng)
    return speaker, listener


def write_file(path, text):
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(text)
    return str(path)


def numerical_gradient(func, array, indices=None, h=1e-5):
    """Central differences of ``func()`` w.r.t. entries of ``array``, mutated in place"""
    if indices is None:
        indices = list(np.ndindex(array.shape))
    grads = []
    for index in indices:
        origin = array[index]
        array[index] = origin + h
        plus = func()
        array[index] = origin - h
        minus = func()
        array[index] = origin
        grads.append((plus - minus) / (2 * h))
    return np.array(grads)


def assert_gradient_close(analytic, numeric, rtol=1e-4, atol=1e-8):
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    numeric = np.asarray(numeric, dtype=np.float64).reshape(-1)
    bound = rtol * np.maximum(np.abs(analytic), np.abs(numeric)) + atol
    assert np.all(np.abs(analytic - numeric) <= bound), (analytic, numeric)


def check_module_gradient(module, compute_loss, rng, samples=3):
    """Compare tape gradients of every parameter with finite differences"""
    module.zero_grad()
    with tensor.Tape() as tape:
        loss = compute_loss()
    tensor.backward(loss, tape)

    def value():
        return compute_loss().item()

    for name, param in module.parameters().items():
        indices = list(np.ndindex(param.shape))
        picks = rng.choice(len(indices), min(samples, len(indices)), replace=False)
        indices = [indices[it] for it in picks]
        analytic = [param.grad[it] for it in indices]
        numeric = numerical_gradient(value, param.data, indices)
        assert_gradient_close(analytic, numeric)


class ConstantSpeaker(object):
    """Emits the same message for every object"""

    def __init__(self, message_length=2):
        self._message_length = message_length

    def __call__(self, patches, mode="greedy", rng=None, message=None):
        return ConstantSpeakerOutput(
            np.zeros((len(patches), self._message_length), dtype=np.int64)
        )


class ConstantSpeakerOutput(object):
    def __init__(self, message):
        self.message = message


class OracleSpeaker(object):
    """Message is the episode's row; the patch sums it saw are kept for the oracle listener"""

    def __init__(self):
        self.sums = None

    def __call__(self, patches, mode="greedy", rng=None, message=None):
        self.sums = np.asarray(patches).sum(axis=1)
        return ConstantSpeakerOutput(np.arange(len(patches), dtype=np.int64)[:, None])


class OracleListener(object):
    """Scores +inf for the candidate whose patch sum equals the speaker's"""

    def __init__(self, speaker):
        self._speaker = speaker

    def __call__(self, message, candidate_patches):
        sums = np.asarray(candidate_patches).sum(axis=2)
        target = self._speaker.sums[np.asarray(message)[:, 0]]
        distances = np.abs(sums - target[:, None, :]).sum(axis=-1)
        return OracleListenerOutput(np.where(distances < 1e-9, np.inf, 0.0))


class OracleListenerOutput(object):
    def __init__(self, scores):
        self.scores = scores

    @property
    def choices(self):
        return np.argmax(self.scores, axis=-1)
