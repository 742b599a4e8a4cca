"""First-order optimizers with serialisable state."""
from __future__ import annotations

from collections import OrderedDict

import numpy as np


class Optimizer:
    def __init__(self, named_params, lr):
        self.named = list(named_params)
        self.lr = float(lr)
        self.steps = 0

    @property
    def params(self):
        return [p for _, p in self.named]

    def zero_grad(self):
        for p in self.params:
            p.grad = np.zeros_like(p.data)

    def grad_norm(self):
        return float(np.sqrt(sum(float((p.grad ** 2).sum()) for p in self.params
                                 if p.grad is not None)))

    def state_dict(self):
        out = OrderedDict(steps=np.array([float(self.steps)]))
        for slot, store in self._slots().items():
            for name, _ in self.named:
                out[f"{slot}/{name}"] = store[name]
        return out

    def load_state_dict(self, state):
        self.steps = int(state["steps"][0])
        for slot, store in self._slots().items():
            for name, _ in self.named:
                store[name][...] = state[f"{slot}/{name}"]

    def _slots(self):
        raise NotImplementedError


class RMSProp(Optimizer):
    """v <- rho*v + (1-rho)*g^2;  p <- p - lr*g/(sqrt(v)+eps)."""

    def __init__(self, named_params, lr=1e-3, rho=0.9, eps=1e-8):
        super().__init__(named_params, lr)
        self.rho, self.eps = rho, eps
        self.v = OrderedDict((n, np.zeros_like(p.data)) for n, p in self.named)

    def _slots(self):
        return {"v": self.v}

    def step(self):
        self.steps += 1
        for name, p in self.named:
            if p.grad is None:
                continue
            v = self.v[name]
            v *= self.rho
            v += (1 - self.rho) * p.grad * p.grad
            p.data -= self.lr * p.grad / (np.sqrt(v) + self.eps)


class Adam(Optimizer):
    def __init__(self, named_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(named_params, lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = OrderedDict((n, np.zeros_like(p.data)) for n, p in self.named)
        self.v = OrderedDict((n, np.zeros_like(p.data)) for n, p in self.named)

    def _slots(self):
        return {"m": self.m, "v": self.v}

    def step(self):
        self.steps += 1
        c1 = 1 - self.beta1 ** self.steps
        c2 = 1 - self.beta2 ** self.steps
        for name, p in self.named:
            if p.grad is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * p.grad
            v *= self.beta2
            v += (1 - self.beta2) * p.grad * p.grad
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name, named_params, lr):
    name = name.lower()
    if name == "rmsprop":
        return RMSProp(named_params, lr=lr)
    if name == "adam":
        return Adam(named_params, lr=lr)
    raise ValueError(f"unknown optimizer {name!r}")
