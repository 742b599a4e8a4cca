"""Stateful layers: parameter registration, train/eval mode, state dicts."""
from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np

from . import functional as F
from .tensor import Tensor


def Parameter(data, name=None):
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def _uniform(rng, bound, shape):
    return Parameter(rng.uniform(-bound, bound, size=shape))


class Module:
    """Minimal module tree. Parameters are ``Tensor`` attributes with
    ``requires_grad``; buffers are numpy arrays registered by name."""

    def __init__(self):
        self.training = True
        self._buffers = OrderedDict()

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def register_buffer(self, name, value):
        self._buffers[name] = np.asarray(value, dtype=np.float64)

    def children(self):
        for key, val in vars(self).items():
            if isinstance(val, Module):
                yield key, val
            elif isinstance(val, (list, tuple)) and val and all(isinstance(v, Module) for v in val):
                for i, v in enumerate(val):
                    yield f"{key}.{i}", v

    def named_modules(self, prefix=""):
        yield prefix, self
        for key, child in self.children():
            yield from child.named_modules(f"{prefix}.{key}" if prefix else key)

    def named_parameters(self):
        for mname, mod in self.named_modules():
            for key, val in vars(mod).items():
                if isinstance(val, Tensor) and val.requires_grad:
                    yield (f"{mname}.{key}" if mname else key), val

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self):
        for mname, mod in self.named_modules():
            for key, val in mod._buffers.items():
                yield (f"{mname}.{key}" if mname else key), val

    def zero_grad(self):
        for p in self.parameters():
            p.grad = np.zeros_like(p.data)

    def train(self, mode=True):
        for _, mod in self.named_modules():
            mod.training = mode
        return self

    def eval(self):
        return self.train(False)

    def state_dict(self):
        out = OrderedDict()
        for name, p in self.named_parameters():
            out[name] = p.data
        for name, b in self.named_buffers():
            out[name] = b
        return out

    def load_state_dict(self, state):
        """Copy arrays in by name. Raises ``KeyError`` for missing names and
        ``ValueError`` listing every shape mismatch."""
        own = self.state_dict()
        missing = [k for k in own if k not in state]
        if missing:
            raise KeyError(f"missing parameters: {', '.join(missing)}")
        bad = [f"{k} (have {own[k].shape}, got {np.shape(state[k])})"
               for k in own if own[k].shape != np.shape(state[k])]
        if bad:
            raise ValueError("shape mismatch: " + "; ".join(bad))
        for k, arr in own.items():
            arr[...] = state[k]

    def num_parameters(self):
        return sum(p.size for p in self.parameters())


class Linear(Module):
    def __init__(self, in_features, out_features, rng, bias=True):
        super().__init__()
        bound = 1.0 / math.sqrt(in_features)
        self.weight = _uniform(rng, bound, (out_features, in_features))
        self.bias = _uniform(rng, bound, (out_features,)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, cin, cout, kernel, rng, stride=1, padding=0):
        super().__init__()
        bound = 1.0 / math.sqrt(cin * kernel)
        self.weight = _uniform(rng, bound, (cout, cin, kernel))
        self.bias = _uniform(rng, bound, (cout,))
        self.stride, self.padding = stride, padding

    def forward(self, x):
        return F.conv1d(x, self.weight, self.bias, self.stride, self.padding)


class Conv2d(Module):
    def __init__(self, cin, cout, kernel, rng, stride=1, padding=0):
        super().__init__()
        bound = 1.0 / math.sqrt(cin * kernel * kernel)
        self.weight = _uniform(rng, bound, (cout, cin, kernel, kernel))
        self.bias = _uniform(rng, bound, (cout,))
        self.stride, self.padding = stride, padding

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm(Module):
    """Batch norm over axis 1 of inputs of any rank >= 2."""

    def __init__(self, channels, momentum=0.9, eps=1e-5):
        super().__init__()
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.register_buffer("running_mean", np.zeros(channels))
        self.register_buffer("running_var", np.ones(channels))
        self.momentum, self.eps = momentum, eps

    def forward(self, x):
        return F.batch_norm(x, self.gamma, self.beta, self._buffers["running_mean"],
                            self._buffers["running_var"], self.training,
                            self.momentum, self.eps)


class Dropout(Module):
    """Dropout with a mask stream keyed by (seed, layer id, call counter)."""

    def __init__(self, rate, seed=0, layer_id=0):
        super().__init__()
        if not 0 <= rate < 1:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.seed = seed
        self.layer_id = layer_id
        self.register_buffer("step", np.zeros(1))

    def forward(self, x):
        if not self.training or self.rate == 0:
            return x
        step = int(self._buffers["step"][0])
        self._buffers["step"][0] += 1
        return F.dropout(x, self.rate, True, key=(self.seed, self.layer_id, step))


def assign_dropout_keys(model, seed):
    """Number every Dropout in traversal order and key it to ``seed``."""
    for i, (_, mod) in enumerate(m for m in model.named_modules() if isinstance(m[1], Dropout)):
        mod.seed = int(seed)
        mod.layer_id = i


class ReLU(Module):
    def forward(self, x):
        return x.relu()


class LSTM(Module):
    """Single-direction LSTM layer with the eight gate tensors of one cell."""

    def __init__(self, input_size, hidden_size, rng):
        super().__init__()
        bound = 1.0 / math.sqrt(hidden_size)
        shape_w = (hidden_size, hidden_size + input_size)
        self.W_i = _uniform(rng, bound, shape_w)
        self.W_f = _uniform(rng, bound, shape_w)
        self.W_c = _uniform(rng, bound, shape_w)
        self.W_o = _uniform(rng, bound, shape_w)
        self.b_i = _uniform(rng, bound, (hidden_size,))
        self.b_f = _uniform(rng, bound, (hidden_size,))
        self.b_v = _uniform(rng, bound, (hidden_size,))
        self.b_o = _uniform(rng, bound, (hidden_size,))
        self.hidden_size = hidden_size
        self.input_size = input_size

    @property
    def params(self):
        return F.LstmParams(self.W_i, self.W_f, self.W_c, self.W_o,
                            self.b_i, self.b_f, self.b_v, self.b_o)

    def forward(self, x, reverse=False):
        return F.lstm_sequence(x, self.params, reverse=reverse)


class BiLSTM(Module):
    def __init__(self, input_size, hidden_size, out_size, rng):
        super().__init__()
        self.fwd = LSTM(input_size, hidden_size, rng)
        self.bwd = LSTM(input_size, hidden_size, rng)
        bound = 1.0 / math.sqrt(2 * hidden_size)
        self.W_fy = _uniform(rng, bound, (out_size, hidden_size))
        self.W_by = _uniform(rng, bound, (out_size, hidden_size))
        self.b_y = _uniform(rng, bound, (out_size,))

    def forward(self, x):
        return F.bilstm(x, self.fwd.params, self.bwd.params, self.W_fy, self.W_by, self.b_y)


class MultiHeadAttention(Module):
    def __init__(self, d_model, heads, rng, d_head=None):
        super().__init__()
        if heads < 1 or d_model % heads:
            raise ValueError(f"model dim {d_model} not divisible by head count {heads}")
        d_head = d_model // heads if d_head is None else d_head
        bound = 1.0 / math.sqrt(d_model)
        self.W_q = _uniform(rng, bound, (d_model, heads * d_head))
        self.W_k = _uniform(rng, bound, (d_model, heads * d_head))
        self.W_v = _uniform(rng, bound, (d_model, heads * d_head))
        self.W_o = _uniform(rng, 1.0 / math.sqrt(heads * d_head), (heads * d_head, d_model))
        self.heads = heads
        self.d_head = d_head

    def forward(self, x, return_weights=False):
        return F.multi_head_attention(x, self.W_q, self.W_k, self.W_v, self.W_o,
                                      self.heads, return_weights=return_weights)
