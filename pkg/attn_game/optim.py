# -*- coding: utf-8 -*-
"""Adam optimizer
"""

import numpy as np

from . import utils


class AdamState(object):
    """Per-parameter moment buffers and the step counter"""

    def __init__(self, params=None):
        self._first = {}
        self._second = {}
        self._step = 0
        for name, value in (params or {}).items():
            self.ensure(name, np.shape(value))

    @property
    def step(self):
        return self._step

    @property
    def first_moments(self):
        return self._first

    @property
    def second_moments(self):
        return self._second

    def ensure(self, name, shape):
        if name not in self._first:
            self._first[name] = np.zeros(shape)
            self._second[name] = np.zeros(shape)
        elif self._first[name].shape != tuple(shape):
            raise utils.DimensionError(
                "Adam state for %s has shape %s, parameter has %s"
                % (
                    name,
                    utils.shape_str(self._first[name].shape),
                    utils.shape_str(shape),
                )
            )

    def advance(self):
        self._step += 1
        return self._step


def adam_step(params, grads, state, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """Apply one bias-corrected Adam update in place

    ``params`` and ``grads`` map names to numpy arrays of equal shape. Nothing
    is modified when any gradient is non-finite.
    """
    for name, value in params.items():
        if name not in grads:
            raise utils.ParamError("Missing gradient for %s" % name)
        if np.shape(grads[name]) != np.shape(value):
            raise utils.DimensionError(
                "Gradient for %s has shape %s, parameter has %s"
                % (
                    name,
                    utils.shape_str(np.shape(grads[name])),
                    utils.shape_str(np.shape(value)),
                )
            )
        if not np.all(np.isfinite(grads[name])):
            raise utils.NumericError("Non-finite gradient for %s, step aborted" % name)
        state.ensure(name, np.shape(value))

    step = state.advance()
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step
    for name, value in params.items():
        grad = grads[name]
        first = state.first_moments[name]
        second = state.second_moments[name]
        first *= beta1
        first += (1.0 - beta1) * grad
        second *= beta2
        second += (1.0 - beta2) * grad * grad
        value -= lr * (first / correction1) / (np.sqrt(second / correction2) + eps)
    return params


class Adam(object):
    """Adam over a name -> Tensor parameter map"""

    def __init__(self, parameters, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self._parameters = parameters
        self._lr = lr
        self._beta1 = beta1
        self._beta2 = beta2
        self._eps = eps
        self._state = AdamState(
            dict((name, it.data) for name, it in parameters.items())
        )

    @property
    def state(self):
        return self._state

    def zero_grad(self):
        for it in self._parameters.values():
            it.zero_grad()

    def step(self):
        params = dict((name, it.data) for name, it in self._parameters.items())
        grads = dict((name, it.grad) for name, it in self._parameters.items())
        adam_step(
            params,
            grads,
            self._state,
            lr=self._lr,
            beta1=self._beta1,
            beta2=self._beta2,
            eps=self._eps,
        )
