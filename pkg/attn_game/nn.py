# -*- coding: utf-8 -*-
"""Neural network layers built on the tensor core
"""

import collections
import math

import numpy as np

from . import registry
from . import tensor
from . import utils


def xavier_uniform(rng, fan_in, fan_out, shape):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Module(object):
    """Ordered container of named parameters and child modules"""

    def __init__(self):
        object.__setattr__(self, "_params", collections.OrderedDict())
        object.__setattr__(self, "_children", collections.OrderedDict())

    def __setattr__(self, name, value):
        if isinstance(value, tensor.Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def parameter(self, name, data):
        value = tensor.Tensor(data, requires_grad=True, name=name)
        setattr(self, name, value)
        return value

    def parameters(self, prefix=""):
        result = collections.OrderedDict()
        for name, value in self._params.items():
            result[prefix + name] = value
        for name, child in self._children.items():
            result.update(child.parameters(prefix + name + "."))
        return result

    def num_parameters(self):
        return int(np.sum([it.size for it in self.parameters().values()]))

    def manifest(self):
        return [(name, list(it.shape)) for name, it in self.parameters().items()]

    def state_dict(self):
        return collections.OrderedDict(
            (name, it.data.copy()) for name, it in self.parameters().items()
        )

    def load_state_dict(self, state):
        params = self.parameters()
        missing = [it for it in params if it not in state]
        unexpected = [it for it in state if it not in params]
        if missing or unexpected:
            raise utils.ParamError(
                "State mismatch, missing=%s unexpected=%s" % (missing, unexpected)
            )
        for name, value in params.items():
            value.data = np.array(state[name], dtype=np.float64)

    def zero_grad(self):
        for it in self.parameters().values():
            it.zero_grad()


class Linear(Module):
    def __init__(self, in_features, out_features, rng, bias=True):
        super(Linear, self).__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.parameter(
            "weight",
            xavier_uniform(rng, in_features, out_features, (in_features, out_features)),
        )
        if bias:
            self.parameter("bias", np.zeros(out_features))
        else:
            self.bias = None

    def __call__(self, x):
        if x.shape[-1] != self.in_features:
            raise utils.DimensionError(
                "Linear expects last dimension %d, got shape %s"
                % (self.in_features, utils.shape_str(x.shape))
            )
        lead = x.shape[:-1]
        out = tensor.reshape(x, (-1, self.in_features)) @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return tensor.reshape(out, lead + (self.out_features,))


class Embedding(Module):
    def __init__(self, num_embeddings, dim, rng):
        super(Embedding, self).__init__()
        self.num_embeddings = num_embeddings
        self.parameter(
            "weight", xavier_uniform(rng, num_embeddings, dim, (num_embeddings, dim))
        )

    def __call__(self, ids):
        return tensor.embedding(self.weight, ids)


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5):
        super(LayerNorm, self).__init__()
        self.eps = eps
        self.parameter("gain", np.ones(dim))
        self.parameter("bias", np.zeros(dim))

    def __call__(self, x):
        return tensor.layer_norm(x, self.gain, self.bias, self.eps)


class LSTMCell(Module):
    def __init__(self, input_size, hidden_size, rng):
        super(LSTMCell, self).__init__()
        self.hidden_size = hidden_size
        self.parameter(
            "weight_ih",
            xavier_uniform(rng, input_size, hidden_size, (input_size, 4 * hidden_size)),
        )
        self.parameter(
            "weight_hh",
            xavier_uniform(
                rng, hidden_size, hidden_size, (hidden_size, 4 * hidden_size)
            ),
        )
        self.parameter("bias", np.zeros(4 * hidden_size))

    def initial_state(self, batch_size):
        zeros = tensor.as_tensor(np.zeros((batch_size, self.hidden_size)))
        return zeros, zeros

    def __call__(self, x, state):
        h, c = state
        gates = x @ self.weight_ih + h @ self.weight_hh + self.bias
        size = self.hidden_size
        input_gate = tensor.sigmoid(gates[:, :size])
        forget_gate = tensor.sigmoid(gates[:, size : 2 * size])
        candidate = tensor.tanh(gates[:, 2 * size : 3 * size])
        output_gate = tensor.sigmoid(gates[:, 3 * size :])
        c = forget_gate * c + input_gate * candidate
        h = output_gate * tensor.tanh(c)
        return h, c


class Attention(Module):
    """Attention base class

    Called with queries of shape (..., Q, H) and key-value vectors of shape
    (..., A, H); returns weights (..., Q, A) and context vectors (..., Q, H).
    """

    kind = None

    def scores(self, query, keyvalues):
        raise NotImplementedError("%s.scores" % self.__class__.__name__)

    def values(self, keyvalues):
        return keyvalues

    def __call__(self, query, keyvalues):
        if keyvalues.shape[-2] == 0:
            raise utils.ParamError("Attention over an empty key set")
        if query.shape[-1] != keyvalues.shape[-1]:
            raise utils.DimensionError(
                "Attention query %s and keys %s disagree"
                % (utils.shape_str(query.shape), utils.shape_str(keyvalues.shape))
            )
        weights = tensor.softmax(self.scores(query, keyvalues), axis=-1)
        context = weights @ self.values(keyvalues)
        return weights, context


class BilinearAttention(Attention):
    """s_i = x^T W_b o_i, context over the raw key-value vectors"""

    kind = "bilinear"

    def __init__(self, hidden_size, rng):
        super(BilinearAttention, self).__init__()
        self.parameter(
            "weight", xavier_uniform(rng, hidden_size, hidden_size, (hidden_size, hidden_size))
        )

    def scores(self, query, keyvalues):
        return (query @ self.weight) @ tensor.swapaxes(keyvalues)


class ScaledDotAttention(Attention):
    """Single head q = W_q x, k = W_k o, v = W_v o, s = q.k / sqrt(d)"""

    kind = "scaled_dot"

    def __init__(self, hidden_size, rng):
        super(ScaledDotAttention, self).__init__()
        self.scale = 1.0 / math.sqrt(hidden_size)
        self.query = Linear(hidden_size, hidden_size, rng, bias=False)
        self.key = Linear(hidden_size, hidden_size, rng, bias=False)
        self.value = Linear(hidden_size, hidden_size, rng, bias=False)

    def scores(self, query, keyvalues):
        return (self.query(query) @ tensor.swapaxes(self.key(keyvalues))) * self.scale

    def values(self, keyvalues):
        return self.value(keyvalues)


class DotAttention(Attention):
    """Parameter-free dot-product attention, optionally scaled by 1/sqrt(d)"""

    kind = "dot"

    def __init__(self, scaled=False):
        super(DotAttention, self).__init__()
        self.scaled = scaled

    def scores(self, query, keyvalues):
        scores = query @ tensor.swapaxes(keyvalues)
        if self.scaled:
            scores = scores * (1.0 / math.sqrt(query.shape[-1]))
        return scores


registry.attention_registry.register(BilinearAttention.kind, BilinearAttention)
registry.attention_registry.register(ScaledDotAttention.kind, ScaledDotAttention)
registry.attention_registry.register(DotAttention.kind, DotAttention)
