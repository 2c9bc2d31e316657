"""SGD and Adam over named parameter dicts.

Parameters with grad=None are skipped, so freezing is just "don't give it a
gradient".  Adam state is keyed by name and grows with the parameter when an
embedding table gains rows mid-run.  Updates run in place against scratch
buffers; the optimizer step is on the hot path of online training.
"""

from __future__ import annotations

import numpy as np


class SGD:
    def __init__(self, lr):
        self.lr = lr
        self._scratch = {}

    def step(self, params):
        for name, p in params.items():
            if p.grad is None:
                continue
            s = self._scratch.get(name)
            if s is None or s.shape != p.data.shape:
                s = self._scratch[name] = np.empty_like(p.data)
            np.multiply(p.grad, self.lr, out=s)
            p.data -= s


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {}
        self._v = {}
        self._scratch = {}

    def _state(self, name, p):
        m = self._m.get(name)
        if m is None:
            m = self._m[name] = np.zeros_like(p.data)
            v = self._v[name] = np.zeros_like(p.data)
            self._scratch[name] = np.empty_like(p.data)
        else:
            v = self._v[name]
            if m.shape != p.data.shape:  # embedding table grew
                pad = np.zeros((p.data.shape[0] - m.shape[0],) + m.shape[1:], m.dtype)
                m = self._m[name] = np.concatenate([m, pad], axis=0)
                v = self._v[name] = np.concatenate([v, pad.copy()], axis=0)
                self._scratch[name] = np.empty_like(p.data)
        return m, v, self._scratch[name]

    def step(self, params):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        # p -= lr * mhat / (sqrt(vhat) + eps) with bias-corrected mhat, vhat
        num_scale = self.lr / (1.0 - b1 ** self.t)
        den_scale = np.sqrt(1.0 / (1.0 - b2 ** self.t))
        for name, p in params.items():
            g = p.grad
            if g is None:
                continue
            m, v, s = self._state(name, p)
            np.multiply(m, b1, out=m)
            np.multiply(g, 1.0 - b1, out=s)
            m += s
            np.multiply(v, b2, out=v)
            np.multiply(g, g, out=s)
            s *= 1.0 - b2
            v += s
            np.sqrt(v, out=s)
            s *= den_scale
            s += self.eps
            np.divide(m, s, out=s)
            s *= num_scale
            p.data -= s


def make_optimizer(kind, lr):
    if kind == "sgd":
        return SGD(lr)
    if kind == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def zero_grad(params):
    for p in params.values():
        p.grad = None
