# -*- coding: utf-8 -*-
"""Speaker and Listener agents

Two architectures (LSTM, Transformer) in two modes each. AT agents attend
over the A encoded patch vectors of an object; NoAT agents attend over the
single mean vector, so both modes share every module and parameter.
"""

import numpy as np

from . import checkpoint
from . import nn
from . import registry
from . import tensor
from . import utils

MODE_AT = "at"
MODE_NOAT = "noat"
MODES = (MODE_AT, MODE_NOAT)


class AgentSizes(object):
    """Vocabulary V, message length T, hidden H, patches A, feature size D"""

    def __init__(self, vocab_size=20, message_length=2, hidden_size=256, num_patches=8, feature_size=16):
        self.vocab_size = vocab_size
        self.message_length = message_length
        self.hidden_size = hidden_size
        self.num_patches = num_patches
        self.feature_size = feature_size

    def to_dict(self):
        return {
            "vocab_size": self.vocab_size,
            "message_length": self.message_length,
            "hidden_size": self.hidden_size,
            "num_patches": self.num_patches,
            "feature_size": self.feature_size,
        }

    @property
    def bos_id(self):
        return self.vocab_size


class ObjectEncoding(object):
    def __init__(self, vectors, mode):
        self._vectors = vectors
        self._mode = mode

    @property
    def vectors(self):
        """Tensor (..., A, H) in AT mode, (..., 1, H) in NoAT mode"""
        return self._vectors

    @property
    def mode(self):
        return self._mode

    @property
    def num_vectors(self):
        return self._vectors.shape[-2]


class ObjectEncoder(nn.Module):
    """Per-patch linear map D -> H followed by gelu"""

    def __init__(self, feature_size, hidden_size, rng):
        super(ObjectEncoder, self).__init__()
        self.projection = nn.Linear(feature_size, hidden_size, rng)

    def __call__(self, patches, mode):
        patches = tensor.as_tensor(patches)
        if patches.ndim < 2 or patches.shape[-2] < 1:
            raise utils.ParamError(
                "Object needs at least one patch, got shape %s"
                % utils.shape_str(patches.shape)
            )
        if mode not in MODES:
            raise utils.ParamError("Unknown encoding mode %s" % mode)
        vectors = tensor.gelu(self.projection(patches))
        if mode == MODE_NOAT:
            vectors = tensor.mean(vectors, axis=-2, keepdims=True)
        return ObjectEncoding(vectors, mode)


def encode_object(encoder, patches, mode):
    return encoder(patches, mode)


def create_attention(kind, *args, **kwargs):
    attention_class = registry.attention_registry[kind]
    if attention_class is None:
        raise utils.ParamError("Attention %s not registered" % kind)
    return attention_class(*args, **kwargs)


def sample_categorical(probs, rng):
    """Inverse-CDF draw of one id per row of ``probs``"""
    cumulative = np.cumsum(probs, axis=-1)
    draws = rng.random(probs.shape[:-1])[..., None] * cumulative[..., -1:]
    ids = np.sum(cumulative < draws, axis=-1)
    return np.minimum(ids, probs.shape[-1] - 1)


class SpeakerOutput(object):
    def __init__(self, message, logits, attention):
        self._message = message
        self._logits = logits
        self._log_probs = tensor.log_softmax(logits, axis=-1)
        self._attention = attention

    @property
    def message(self):
        """int array (B, T)"""
        return self._message

    @property
    def logits(self):
        return self._logits

    @property
    def log_probs(self):
        """Tensor (B, T, V)"""
        return self._log_probs

    @property
    def step_distributions(self):
        return np.exp(self._log_probs.data)

    @property
    def attention(self):
        """Speaker attention record, array (B, T, A)"""
        return self._attention


class ListenerOutput(object):
    def __init__(self, scores, attention):
        self._scores = scores
        self._attention = attention

    @property
    def scores(self):
        """Tensor (B, C)"""
        return self._scores

    @property
    def attention(self):
        """Per-candidate attention records, array (B, C, T, A)"""
        return self._attention

    @property
    def choices(self):
        return np.argmax(self._scores.data, axis=-1)


class Agent(nn.Module):
    architecture = None
    role = None

    def __init__(self, sizes, mode, rng):
        super(Agent, self).__init__()
        if mode not in MODES:
            raise utils.ParamError("Unknown agent mode %s" % mode)
        self.sizes = sizes
        self.mode = mode
        self.encoder = ObjectEncoder(sizes.feature_size, sizes.hidden_size, rng)

    def __str__(self):
        return "<%s mode=%s params=%d at 0x%x>" % (
            self.__class__.__name__,
            self.mode,
            self.num_parameters(),
            id(self),
        )

    def describe(self):
        info = {
            "architecture": self.architecture,
            "role": self.role,
            "mode": self.mode,
            "parameters": self.manifest(),
        }
        info.update(self.sizes.to_dict())
        return info


class Speaker(Agent):
    """Speaker base class

    ``step`` consumes the previous symbol and returns the next state, the
    symbol logits (B, V) and the attention weights (B, A).
    """

    role = "speaker"

    def start(self, encoding):
        raise NotImplementedError("%s.start" % self.__class__.__name__)

    def step(self, state, previous, position, encoding):
        raise NotImplementedError("%s.step" % self.__class__.__name__)

    def __call__(self, patches, mode="sample", rng=None, message=None):
        return self.generate(self.encoder(patches, self.mode), mode, rng, message)

    def generate(self, encoding, mode="sample", rng=None, message=None):
        """Decode T symbols; with ``message`` given, score that message instead"""
        if mode not in ("sample", "greedy"):
            raise utils.ParamError("Unknown decoding mode %s" % mode)
        if mode == "sample" and message is None and rng is None:
            raise utils.ParamError("Sampling needs an rng")
        batch_size = encoding.vectors.shape[0]
        previous = np.full(batch_size, self.sizes.bos_id, dtype=np.int64)
        state = self.start(encoding)
        symbols, logits, weights = [], [], []
        for position in range(self.sizes.message_length):
            state, step_logits, step_weights = self.step(
                state, previous, position, encoding
            )
            if message is not None:
                previous = np.asarray(message[:, position], dtype=np.int64)
            elif mode == "greedy":
                previous = np.argmax(step_logits.data, axis=-1)
            else:
                probs = np.exp(
                    step_logits.data - np.max(step_logits.data, axis=-1, keepdims=True)
                )
                previous = sample_categorical(probs, rng)
            symbols.append(previous)
            logits.append(step_logits)
            weights.append(step_weights.data)
        return SpeakerOutput(
            np.stack(symbols, axis=1),
            tensor.stack(logits, axis=1),
            np.stack(weights, axis=1),
        )


class LSTMSpeaker(Speaker):
    """LSTM cell, bilinear attention, concat-project-tanh post-processing"""

    architecture = "lstm"

    def __init__(self, sizes, mode, rng):
        super(LSTMSpeaker, self).__init__(sizes, mode, rng)
        hidden = sizes.hidden_size
        self.embedding = nn.Embedding(sizes.vocab_size + 1, hidden, rng)
        self.cell = nn.LSTMCell(hidden, hidden, rng)
        self.attention = create_attention("bilinear", hidden, rng)
        self.combine = nn.Linear(2 * hidden, hidden, rng)
        self.output = nn.Linear(hidden, sizes.vocab_size, rng)

    def start(self, encoding):
        return self.cell.initial_state(encoding.vectors.shape[0])

    def step(self, state, previous, position, encoding):
        batch_size, hidden = state[0].shape
        h, c = self.cell(self.embedding(previous), state)
        weights, context = self.attention(
            tensor.reshape(h, (batch_size, 1, hidden)), encoding.vectors
        )
        context = tensor.reshape(context, (batch_size, hidden))
        out = tensor.tanh(self.combine(tensor.concat([h, context], axis=-1)))
        return (h, c), self.output(out), weights[:, 0, :]


class TransformerSpeaker(Speaker):
    """One post-norm decoder layer with single-head attention

    With a single layer the output at position t depends only on the layer
    inputs at positions <= t, so decoding attends from the newest position
    over the prefix, which equals causal masking.
    """

    architecture = "transformer"

    def __init__(self, sizes, mode, rng):
        super(TransformerSpeaker, self).__init__(sizes, mode, rng)
        hidden = sizes.hidden_size
        self.embedding = nn.Embedding(sizes.vocab_size + 1, hidden, rng)
        self.positions = nn.Embedding(sizes.message_length, hidden, rng)
        self.self_attention = create_attention("scaled_dot", hidden, rng)
        self.self_output = nn.Linear(hidden, hidden, rng)
        self.self_norm = nn.LayerNorm(hidden)
        self.cross_attention = create_attention("scaled_dot", hidden, rng)
        self.cross_output = nn.Linear(hidden, hidden, rng)
        self.cross_norm = nn.LayerNorm(hidden)
        self.feed_forward = nn.Linear(hidden, 4 * hidden, rng)
        self.feed_forward_output = nn.Linear(4 * hidden, hidden, rng)
        self.feed_forward_norm = nn.LayerNorm(hidden)
        self.output = nn.Linear(hidden, sizes.vocab_size, rng)

    def start(self, encoding):
        return []

    def step(self, state, previous, position, encoding):
        batch_size = len(previous)
        hidden = self.sizes.hidden_size
        x = self.embedding(previous) + self.positions(
            np.full(batch_size, position, dtype=np.int64)
        )
        state = state + [x]
        query = tensor.reshape(x, (batch_size, 1, hidden))
        _, attended = self.self_attention(query, tensor.stack(state, axis=1))
        h = self.self_norm(query + self.self_output(attended))
        weights, attended = self.cross_attention(h, encoding.vectors)
        h = self.cross_norm(h + self.cross_output(attended))
        h = self.feed_forward_norm(
            h + self.feed_forward_output(tensor.gelu(self.feed_forward(h)))
        )
        logits = self.output(tensor.reshape(h, (batch_size, hidden)))
        return state, logits, weights[:, 0, :]


class Listener(Agent):
    """Listener base class

    Symbol vectors (B, T, H) query each candidate's encoding with
    dot-product attention; per-symbol scores are averaged over T.
    """

    role = "listener"
    default_scaled = False

    def __init__(self, sizes, mode, rng, attention_scale="auto"):
        super(Listener, self).__init__(sizes, mode, rng)
        if attention_scale == "auto":
            scaled = self.default_scaled
        elif attention_scale in ("scaled", "unscaled"):
            scaled = attention_scale == "scaled"
        else:
            raise utils.ParamError("Unknown attention scale %s" % attention_scale)
        self.attention = create_attention("dot", scaled=scaled)

    def encode_message(self, message):
        raise NotImplementedError("%s.encode_message" % self.__class__.__name__)

    def message_output(self):
        """Parameters of the last layer producing symbol vectors"""
        raise NotImplementedError("%s.message_output" % self.__class__.__name__)

    def silence(self):
        """Zero the last message layer: scores no longer depend on the message
        until the first update
        """
        for param in self.message_output():
            param.data[...] = 0.0

    def __call__(self, message, candidate_patches):
        candidate_patches = tensor.as_tensor(candidate_patches)
        if candidate_patches.ndim != 4 or candidate_patches.shape[1] == 0:
            raise utils.ParamError(
                "Listener needs candidates of shape (B, C>0, A, D), got %s"
                % utils.shape_str(candidate_patches.shape)
            )
        return self.score(message, self.encoder(candidate_patches, self.mode))

    def score(self, message, candidates):
        message = np.asarray(message, dtype=np.int64)
        symbols = self.encode_message(message)
        batch_size, length, hidden = symbols.shape
        query = tensor.reshape(symbols, (batch_size, 1, length, hidden))
        weights, attended = self.attention(query, candidates.vectors)
        per_symbol = tensor.sum(attended * query, axis=-1)
        return ListenerOutput(tensor.mean(per_symbol, axis=-1), weights.data)


class LSTMListener(Listener):
    """Bidirectional LSTM message encoder, directions projected back to H"""

    architecture = "lstm"
    default_scaled = False

    def __init__(self, sizes, mode, rng, attention_scale="auto"):
        super(LSTMListener, self).__init__(sizes, mode, rng, attention_scale)
        hidden = sizes.hidden_size
        self.embedding = nn.Embedding(sizes.vocab_size, hidden, rng)
        self.forward_cell = nn.LSTMCell(hidden, hidden, rng)
        self.backward_cell = nn.LSTMCell(hidden, hidden, rng)
        self.projection = nn.Linear(2 * hidden, hidden, rng)

    def message_output(self):
        return [self.projection.weight, self.projection.bias]

    def encode_message(self, message):
        batch_size, length = message.shape
        embedded = [self.embedding(message[:, t]) for t in range(length)]
        forward, backward = [], [None] * length
        state = self.forward_cell.initial_state(batch_size)
        for t in range(length):
            state = self.forward_cell(embedded[t], state)
            forward.append(state[0])
        state = self.backward_cell.initial_state(batch_size)
        for t in reversed(range(length)):
            state = self.backward_cell(embedded[t], state)
            backward[t] = state[0]
        vectors = [
            self.projection(tensor.concat([forward[t], backward[t]], axis=-1))
            for t in range(length)
        ]
        return tensor.stack(vectors, axis=1)


class TransformerListener(Listener):
    """One post-norm encoder layer over the symbol sequence"""

    architecture = "transformer"
    default_scaled = True

    def __init__(self, sizes, mode, rng, attention_scale="auto"):
        super(TransformerListener, self).__init__(sizes, mode, rng, attention_scale)
        hidden = sizes.hidden_size
        self.embedding = nn.Embedding(sizes.vocab_size, hidden, rng)
        self.positions = nn.Embedding(sizes.message_length, hidden, rng)
        self.self_attention = create_attention("scaled_dot", hidden, rng)
        self.self_output = nn.Linear(hidden, hidden, rng)
        self.self_norm = nn.LayerNorm(hidden)
        self.feed_forward = nn.Linear(hidden, 4 * hidden, rng)
        self.feed_forward_output = nn.Linear(4 * hidden, hidden, rng)
        self.feed_forward_norm = nn.LayerNorm(hidden)

    def message_output(self):
        return [self.feed_forward_norm.gain, self.feed_forward_norm.bias]

    def encode_message(self, message):
        batch_size, length = message.shape
        positions = np.tile(np.arange(length), (batch_size, 1))
        x = self.embedding(message) + self.positions(positions)
        _, attended = self.self_attention(x, x)
        h = self.self_norm(x + self.self_output(attended))
        return self.feed_forward_norm(
            h + self.feed_forward_output(tensor.gelu(self.feed_forward(h)))
        )


def create_speaker(architecture, sizes, mode, rng):
    agent_classes = registry.agent_registry[architecture]
    if not agent_classes:
        raise utils.ConfigError(
            "Architecture %s not registered" % architecture, ["architecture"]
        )
    return agent_classes[0](sizes, mode, rng)


def create_listener(architecture, sizes, mode, rng, attention_scale="auto"):
    agent_classes = registry.agent_registry[architecture]
    if not agent_classes:
        raise utils.ConfigError(
            "Architecture %s not registered" % architecture, ["architecture"]
        )
    return agent_classes[1](sizes, mode, rng, attention_scale)


def save_agent(path, agent, extra=None):
    manifest = agent.describe()
    manifest.update(extra or {})
    if agent.role == "listener":
        manifest["attention_scale"] = "scaled" if agent.attention.scaled else "unscaled"
    checkpoint.save_checkpoint(path, agent.state_dict(), manifest)


def load_agent(path):
    manifest, params = checkpoint.load_checkpoint(path)
    sizes = AgentSizes(
        manifest["vocab_size"],
        manifest["message_length"],
        manifest["hidden_size"],
        manifest["num_patches"],
        manifest["feature_size"],
    )
    rng = np.random.default_rng(0)
    if manifest["role"] == "speaker":
        agent = create_speaker(manifest["architecture"], sizes, manifest["mode"], rng)
    else:
        agent = create_listener(
            manifest["architecture"],
            sizes,
            manifest["mode"],
            rng,
            manifest.get("attention_scale", "auto"),
        )
    agent.load_state_dict(params)
    return agent, manifest


registry.agent_registry.register("lstm", LSTMSpeaker, LSTMListener)
registry.agent_registry.register("transformer", TransformerSpeaker, TransformerListener)
