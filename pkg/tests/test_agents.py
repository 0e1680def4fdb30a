# -*- coding: utf-8 -*-

import numpy as np
import pytest

from attn_game import agents
from attn_game import checkpoint
from attn_game import registry
from attn_game import tensor
from attn_game import utils

from .util import micro_agents, micro_sizes

ARCHITECTURES = ("lstm", "transformer")


def random_patches(*shape, seed=0):
    return np.random.default_rng(seed).normal(size=shape)


def test_registry():
    assert registry.agent_registry.architectures() == ["lstm", "transformer"]
    assert registry.agent_registry["lstm"] == (agents.LSTMSpeaker, agents.LSTMListener)
    with pytest.raises(utils.ConfigError):
        agents.create_speaker("gru", micro_sizes(), agents.MODE_AT, np.random.default_rng(0))
    with pytest.raises(utils.ParamError):
        agents.create_speaker("lstm", micro_sizes(), "half", np.random.default_rng(0))
    assert registry.attention_registry.kinds() == ["bilinear", "dot", "scaled_dot"]
    speaker, listener = micro_agents("transformer", agents.MODE_AT, agents.MODE_AT)
    assert speaker.cross_attention.kind == "scaled_dot"
    assert listener.attention.kind == "dot"
    assert micro_agents("lstm", agents.MODE_AT, agents.MODE_AT)[0].attention.kind == "bilinear"
    with pytest.raises(utils.ParamError):
        agents.create_attention("additive", 4, np.random.default_rng(0))


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_parameter_parity(tmp_path, architecture):
    manifests = {}
    for mode in agents.MODES:
        speaker, listener = micro_agents(architecture, mode, mode)
        for agent in (speaker, listener):
            path = str(tmp_path / ("%s-%s.ck" % (agent.role, mode)))
            agents.save_agent(path, agent)
            manifest, _ = checkpoint.load_checkpoint(path)
            manifests[(agent.role, mode)] = (agent.num_parameters(), manifest["parameters"])
    for role in ("speaker", "listener"):
        assert manifests[(role, agents.MODE_AT)] == manifests[(role, agents.MODE_NOAT)]


def test_encoder():
    rng = np.random.default_rng(0)
    encoder = agents.ObjectEncoder(6, 8, rng)
    patch = random_patches(1, 1, 6)
    at = encoder(patch, agents.MODE_AT).vectors.data
    noat = encoder(patch, agents.MODE_NOAT).vectors.data
    assert np.allclose(at, noat)

    twice = np.concatenate([patch, patch], axis=1)
    encoding = encoder(twice, agents.MODE_NOAT)
    assert encoding.num_vectors == 1
    assert np.allclose(encoding.vectors.data[:, 0], at[:, 0])

    encoder.projection.weight.data = np.zeros((6, 8))
    zeros = agents.encode_object(encoder, random_patches(2, 4, 6), agents.MODE_AT)
    assert np.array_equal(zeros.vectors.data, np.zeros((2, 4, 8)))

    with pytest.raises(utils.DimensionError):
        encoder(random_patches(2, 4, 5), agents.MODE_AT)
    with pytest.raises(utils.ParamError):
        encoder(np.zeros((2, 0, 6)), agents.MODE_AT)


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_speaker_greedy(architecture):
    patches = random_patches(5, 4, 6)
    for mode in agents.MODES:
        speaker, _ = micro_agents(architecture, mode, mode)
        first = speaker(patches, mode="greedy")
        second = speaker(patches, mode="greedy")
        assert first.message.shape == (5, 2)
        assert np.array_equal(first.message, second.message)
        assert first.log_probs.shape == (5, 2, 4)
        assert np.allclose(first.step_distributions.sum(axis=-1), 1.0)
        if mode == agents.MODE_AT:
            assert first.attention.shape == (5, 2, 4)
            assert np.all(np.abs(first.attention.sum(axis=-1) - 1) < 1e-9)
        else:
            assert np.array_equal(first.attention, np.ones((5, 2, 1)))


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_teacher_forcing_reproduces_decoding(architecture):
    speaker, _ = micro_agents(architecture, agents.MODE_AT, agents.MODE_AT)
    patches = random_patches(6, 4, 6)
    decoded = speaker(patches, mode="sample", rng=np.random.default_rng(3))
    forced = speaker(patches, message=decoded.message)
    assert np.array_equal(forced.message, decoded.message)
    assert np.allclose(forced.logits.data, decoded.logits.data)
    assert np.allclose(forced.attention, decoded.attention)


def test_sample_frequencies():
    speaker, _ = micro_agents("transformer", agents.MODE_AT, agents.MODE_AT)
    patches = np.repeat(random_patches(1, 4, 6), 10000, axis=0)
    with tensor.no_grad():
        output = speaker(patches, mode="sample", rng=np.random.default_rng(0))
    frequencies = np.bincount(output.message[:, 0], minlength=4) / 10000.0
    assert np.all(np.abs(frequencies - output.step_distributions[0, 0]) < 0.02)
    with pytest.raises(utils.ParamError):
        speaker(patches[:2], mode="sample")
    with pytest.raises(utils.ParamError):
        speaker(patches[:2], mode="beam")


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_listener(architecture):
    for mode in agents.MODES:
        _, listener = micro_agents(architecture, mode, mode)
        candidate = random_patches(2, 1, 4, 6)
        others = random_patches(2, 2, 4, 6, seed=1)
        candidates = np.concatenate([candidate, others, candidate], axis=1)
        message = np.array([[0, 1], [3, 2]])
        output = listener(message, candidates)
        assert output.scores.shape == (2, 4)
        assert np.allclose(output.scores.data[:, 0], output.scores.data[:, 3])
        width = 4 if mode == agents.MODE_AT else 1
        assert output.attention.shape == (2, 4, 2, width)
        assert np.all(np.abs(output.attention.sum(axis=-1) - 1) < 1e-9)
        assert np.array_equal(output.choices, np.argmax(output.scores.data, axis=-1))
        with pytest.raises(utils.ParamError):
            listener(message, np.zeros((2, 0, 4, 6)))


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_listener_candidate_permutation(architecture):
    order = [3, 0, 4, 1, 2]
    message = np.array([[0, 1], [3, 2]])
    candidates = random_patches(2, 5, 4, 6)
    for mode in agents.MODES:
        _, listener = micro_agents(architecture, mode, mode)
        output = listener(message, candidates)
        shuffled = listener(message, candidates[:, order])
        assert np.allclose(shuffled.scores.data, output.scores.data[:, order])
        assert np.allclose(shuffled.attention, output.attention[:, order])


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_patch_permutation(architecture):
    order = [2, 0, 3, 1]
    patches = random_patches(3, 4, 6)
    candidates = random_patches(3, 5, 4, 6, seed=1)
    for mode in agents.MODES:
        speaker, listener = micro_agents(architecture, mode, mode)
        encoding = agents.encode_object(speaker.encoder, patches, mode)
        shuffled = agents.encode_object(speaker.encoder, patches[:, order], mode)
        if mode == agents.MODE_NOAT:
            assert np.allclose(shuffled.vectors.data, encoding.vectors.data)
        else:
            assert np.allclose(shuffled.vectors.data, encoding.vectors.data[:, order])

        decoded = speaker(patches, mode="greedy")
        forced = speaker(patches[:, order], message=decoded.message)
        assert np.allclose(forced.logits.data, decoded.logits.data)
        heard = listener(decoded.message, candidates)
        reheard = listener(decoded.message, candidates[:, :, order])
        assert np.allclose(reheard.scores.data, heard.scores.data)
        if mode == agents.MODE_AT:
            assert np.allclose(forced.attention, decoded.attention[..., order])
            assert np.allclose(reheard.attention, heard.attention[..., order])
        else:
            assert np.array_equal(forced.attention, decoded.attention)
            assert np.array_equal(reheard.attention, heard.attention)

def test_listener_single_patch():
    sizes = micro_sizes(num_patches=1)
    _, listener = micro_agents("lstm", agents.MODE_AT, agents.MODE_AT, sizes)
    candidates = random_patches(1, 3, 1, 6)
    message = np.array([[1, 2]])
    output = listener(message, candidates)
    assert np.array_equal(output.attention, np.ones((1, 3, 2, 1)))
    encoded = listener.encoder(candidates, agents.MODE_AT).vectors.data[0, :, 0]
    symbols = listener.encode_message(message).data[0]
    assert np.allclose(output.scores.data[0], (encoded @ symbols.T).mean(axis=-1))


def test_listener_single_symbol():
    sizes = micro_sizes(message_length=1)
    _, listener = micro_agents("transformer", agents.MODE_NOAT, agents.MODE_NOAT, sizes)
    candidates = random_patches(1, 3, 4, 6)
    output = listener(np.array([[2]]), candidates)
    encoded = listener.encoder(candidates, agents.MODE_NOAT).vectors.data[0, :, 0]
    symbol = listener.encode_message(np.array([[2]])).data[0, 0]
    assert np.allclose(output.scores.data[0], encoded @ symbol)


def test_attention_scale():
    sizes = micro_sizes()
    rng = np.random.default_rng(0)
    assert not agents.create_listener("lstm", sizes, "at", rng).attention.scaled
    assert agents.create_listener("transformer", sizes, "at", rng).attention.scaled
    assert agents.create_listener("lstm", sizes, "at", rng, "scaled").attention.scaled
    with pytest.raises(utils.ParamError):
        agents.create_listener("lstm", sizes, "at", rng, "halved")


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_save_and_load_agent(tmp_path, architecture):
    speaker, listener = micro_agents(architecture, agents.MODE_AT, agents.MODE_NOAT, seed=4)
    agents.save_agent(str(tmp_path / "speaker.ck"), speaker, {"seed": 4})
    agents.save_agent(str(tmp_path / "listener.ck"), listener)
    loaded_speaker, manifest = agents.load_agent(str(tmp_path / "speaker.ck"))
    loaded_listener, listener_manifest = agents.load_agent(str(tmp_path / "listener.ck"))
    assert manifest["seed"] == 4
    assert manifest["architecture"] == architecture
    assert listener_manifest["mode"] == agents.MODE_NOAT
    assert isinstance(loaded_speaker, type(speaker))
    patches = random_patches(3, 4, 6)
    message = speaker(patches, mode="greedy").message
    assert np.array_equal(loaded_speaker(patches, mode="greedy").message, message)
    candidates = random_patches(3, 5, 4, 6)
    assert np.array_equal(
        loaded_listener(message, candidates).scores.data,
        listener(message, candidates).scores.data,
    )
