# -*- coding: utf-8 -*-
"""Dense tensors with tape-based reverse-mode differentiation

Every primitive computes its forward value with numpy and, when a tape is
active and one of its inputs requires a gradient, records a local gradient
rule on that tape. ``backward`` replays the tape in reverse.
"""

import contextlib
import math
import threading

import numpy as np
import scipy.special

from . import utils

GELU_COEF = math.sqrt(2.0 / math.pi)

_local = threading.local()


def _tape_stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def current_tape():
    stack = _tape_stack()
    if stack:
        return stack[-1]
    return None


@contextlib.contextmanager
def no_grad():
    """Suspend recording on the current thread"""
    stack = _tape_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


class TapeEntry(object):
    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward

    def __str__(self):
        return "<TapeEntry op=%s output=%s>" % (self.op, utils.shape_str(self.output.shape))


class Tape(object):
    """Computation Tape

    Records primitives in execution order, which is a topological order of
    the graph. A tape belongs to the thread that entered it.
    """

    def __init__(self):
        self._entries = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc_value, exc_traceback):
        _tape_stack().pop()

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self):
        return self._entries

    def record(self, op, inputs, output, backward):
        self._entries.append(TapeEntry(op, inputs, output, backward))


class Tensor(object):
    """Dense float64 tensor

    Leaf tensors created with ``requires_grad=True`` own a gradient buffer of
    the same shape; op outputs receive theirs during ``backward``.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self._data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self._data) if requires_grad else None
        self.name = name

    @classmethod
    def _from_op(cls, data, requires_grad):
        tensor = cls.__new__(cls)
        tensor._data = data
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.name = None
        return tensor

    def __repr__(self):
        return "<Tensor shape=%s requires_grad=%s>" % (
            utils.shape_str(self.shape),
            self.requires_grad,
        )

    @property
    def data(self):
        return self._data

    @data.setter
    def data(self, value):
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._data.shape:
            raise utils.DimensionError(
                "Cannot assign data of shape %s to tensor of shape %s"
                % (utils.shape_str(value.shape), utils.shape_str(self.shape))
            )
        self._data = value

    @property
    def shape(self):
        return self._data.shape

    @property
    def ndim(self):
        return self._data.ndim

    @property
    def size(self):
        return self._data.size

    def item(self):
        return float(self._data.reshape(-1)[0])

    def numpy(self):
        return self._data

    def detach(self):
        return Tensor._from_op(self._data, False)

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self._data)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor._from_op(np.asarray(value, dtype=np.float64), False)


def _check_finite(op, data):
    if not np.all(np.isfinite(data)):
        raise utils.NumericError("Non-finite value produced by %s" % op)


def _result(op, data, inputs, backward):
    _check_finite(op, data)
    tape = current_tape()
    requires_grad = tape is not None and any(it.requires_grad for it in inputs)
    output = Tensor._from_op(data, requires_grad)
    if requires_grad:
        tape.record(op, inputs, output, backward)
    return output


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise utils.DimensionError(
            "%s: incompatible shapes %s and %s"
            % (op, utils.shape_str(a.shape), utils.shape_str(b.shape))
        )


def unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``"""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1
    )
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return _result("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return _result("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return _result(
        "mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data)
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    if np.any(b.data == 0):
        raise utils.NumericError("Division by zero")
    return _result(
        "div",
        a.data / b.data,
        (a, b),
        lambda g: (g / b.data, -g * a.data / (b.data * b.data)),
    )


def neg(a):
    a = as_tensor(a)
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def power(a, exponent):
    a = as_tensor(a)
    exponent = float(exponent)
    return _result(
        "pow",
        np.power(a.data, exponent),
        (a,),
        lambda g: (g * exponent * np.power(a.data, exponent - 1.0),),
    )


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)
    return _result("exp", data, (a,), lambda g: (g * data,))


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise utils.NumericError("log of non-positive value")
    return _result("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def tanh(a):
    a = as_tensor(a)
    data = np.tanh(a.data)
    return _result("tanh", data, (a,), lambda g: (g * (1.0 - data * data),))


def sigmoid(a):
    a = as_tensor(a)
    data = scipy.special.expit(a.data)
    return _result("sigmoid", data, (a,), lambda g: (g * data * (1.0 - data),))


def gelu(a):
    """gelu(x) = 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715x^3)))"""
    a = as_tensor(a)
    x = a.data
    inner = np.tanh(GELU_COEF * (x + 0.044715 * x ** 3))
    data = 0.5 * x * (1.0 + inner)

    def backward(g):
        local = 0.5 * (1.0 + inner) + 0.5 * x * (1.0 - inner * inner) * GELU_COEF * (
            1.0 + 3 * 0.044715 * x * x
        )
        return (g * local,)

    return _result("gelu", data, (a,), backward)


def _expand_reduced(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        axes = axis if isinstance(axis, tuple) else (axis,)
        axes = tuple(sorted(it % len(shape) for it in axes))
        for it in axes:
            g = np.expand_dims(g, it)
    return np.broadcast_to(g, shape)


def sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = np.sum(a.data, axis=axis, keepdims=keepdims)
    shape = a.shape
    return _result(
        "sum",
        np.asarray(data, dtype=np.float64),
        (a,),
        lambda g: (_expand_reduced(g, shape, axis, keepdims),),
    )


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[it] for it in axes]))
    data = np.mean(a.data, axis=axis, keepdims=keepdims)
    shape = a.shape
    return _result(
        "mean",
        np.asarray(data, dtype=np.float64),
        (a,),
        lambda g: (_expand_reduced(g, shape, axis, keepdims) / count,),
    )


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise utils.DimensionError(
            "matmul: incompatible shapes %s and %s"
            % (utils.shape_str(a.shape), utils.shape_str(b.shape))
        )
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise utils.DimensionError(
            "matmul: incompatible batch shapes %s and %s"
            % (utils.shape_str(a.shape), utils.shape_str(b.shape))
        )
    return _result(
        "matmul",
        np.matmul(a.data, b.data),
        (a, b),
        lambda g: (
            np.matmul(g, np.swapaxes(b.data, -1, -2)),
            np.matmul(np.swapaxes(a.data, -1, -2), g),
        ),
    )


def softmax(a, axis=-1):
    a = as_tensor(a)
    _check_finite("softmax input", a.data)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    data = np.exp(shifted)
    data /= np.sum(data, axis=axis, keepdims=True)

    def backward(g):
        return (data * (g - np.sum(g * data, axis=axis, keepdims=True)),)

    return _result("softmax", data, (a,), backward)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    _check_finite("log_softmax input", a.data)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    data = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(data) * np.sum(g, axis=axis, keepdims=True),)

    return _result("log_softmax", data, (a,), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(it) for it in tensors]
    try:
        data = np.concatenate([it.data for it in tensors], axis=axis)
    except ValueError:
        raise utils.DimensionError(
            "concat: incompatible shapes %s"
            % ", ".join(utils.shape_str(it.shape) for it in tensors)
        )
    bounds = np.cumsum([it.shape[axis] for it in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result("concat", data, tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(it) for it in tensors]
    try:
        data = np.stack([it.data for it in tensors], axis=axis)
    except ValueError:
        raise utils.DimensionError(
            "stack: incompatible shapes %s"
            % ", ".join(utils.shape_str(it.shape) for it in tensors)
        )

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _result("stack", data, tuple(tensors), backward)


def reshape(a, shape):
    a = as_tensor(a)
    orig = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise utils.DimensionError(
            "reshape: cannot reshape %s into %s"
            % (utils.shape_str(orig), utils.shape_str(shape))
        )
    return _result("reshape", data, (a,), lambda g: (g.reshape(orig),))


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _result(
        "transpose",
        np.transpose(a.data, axes),
        (a,),
        lambda g: (np.transpose(g, inverse),),
    )


def swapaxes(a, axis1=-1, axis2=-2):
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
    return transpose(a, tuple(axes))


def getitem(a, index):
    a = as_tensor(a)
    data = np.asarray(a.data[index], dtype=np.float64)
    shape = a.shape

    def backward(g):
        full = np.zeros(shape)
        np.add.at(full, index, g)
        return (full,)

    return _result("getitem", data, (a,), backward)


def embedding(weight, ids):
    """Rows of ``weight`` selected by the integer array ``ids``"""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise utils.ParamError(
            "Embedding id out of range [0, %d)" % weight.shape[0]
        )
    return getitem(weight, ids)


def take_along_axis(a, indices, axis=-1):
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    data = np.take_along_axis(a.data, indices, axis=axis)
    shape = a.shape

    def backward(g):
        full = np.zeros(shape)
        index = list(np.ix_(*[np.arange(n) for n in indices.shape]))
        index[axis] = indices
        np.add.at(full, tuple(index), g)
        return (full,)

    return _result("take_along_axis", data, (a,), backward)


def layer_norm(x, gain, bias, eps=1e-5):
    centered = x - mean(x, axis=-1, keepdims=True)
    variance = mean(centered * centered, axis=-1, keepdims=True)
    return centered * power(variance + eps, -0.5) * gain + bias


def backward(loss, tape):
    """Accumulate d(loss)/d(tensor) into every reachable requires_grad tensor"""
    if loss.size != 1:
        raise utils.ParamError(
            "backward needs a scalar loss, got shape %s" % utils.shape_str(loss.shape)
        )
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    pending = {id(loss): loss}
    for entry in reversed(tape.entries):
        grad = grads.pop(id(entry.output), None)
        if grad is None:
            continue
        pending.pop(id(entry.output), None)
        entry.output.grad = grad
        for tensor, input_grad in zip(entry.inputs, entry.backward(grad)):
            if input_grad is None or not tensor.requires_grad:
                continue
            input_grad = unbroadcast(np.asarray(input_grad), tensor.shape)
            _check_finite("gradient of %s" % entry.op, input_grad)
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + input_grad
            else:
                grads[key] = input_grad
                pending[key] = tensor

    for key, grad in grads.items():
        tensor = pending[key]
        if tensor.grad is None:
            tensor.grad = np.zeros_like(tensor.data)
        tensor.grad += grad


def zeros(shape, requires_grad=False, name=None):
    return Tensor(np.zeros(shape), requires_grad=requires_grad, name=name)


def ones(shape, requires_grad=False, name=None):
    return Tensor(np.ones(shape), requires_grad=requires_grad, name=name)
