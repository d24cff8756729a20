"""Full-batch cross-entropy loss of a small tanh ResNet, with backprop.

The network is a forward-Euler discretisation of u' = tanh(W(t) u + b(t))
on [0, horizon]: the input is zero-padded to ``width``, each block applies
u <- u + step * tanh(W_k u + b_k), and a linear head produces the logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import Objective


@dataclass(frozen=True)
class ResNetSpec:
    blocks: int
    width: int = 8
    n_in: int = 2
    n_out: int = 2
    horizon: float = 1.0

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError("blocks must be >= 1")
        if self.width < self.n_in:
            raise ValueError("width must be at least n_in (inputs are zero-padded)")

    @property
    def step(self) -> float:
        return self.horizon / self.blocks

    @property
    def block_size(self) -> int:
        return self.width * self.width + self.width

    @property
    def head_size(self) -> int:
        return self.n_out * self.width + self.n_out

    @property
    def n_params(self) -> int:
        return self.blocks * self.block_size + self.head_size


def unpack(spec: ResNetSpec, x: np.ndarray):
    w = spec.width
    cut = spec.blocks * spec.block_size
    blocks = x[:cut].reshape(spec.blocks, spec.block_size)
    Ws = blocks[:, : w * w].reshape(spec.blocks, w, w)
    bs = blocks[:, w * w:]
    head = x[cut:]
    V = head[: spec.n_out * w].reshape(spec.n_out, w)
    c = head[spec.n_out * w:]
    return Ws, bs, V, c


def forward(spec: ResNetSpec, x: np.ndarray, inputs: np.ndarray, keep: bool = False):
    """Logits for ``inputs``; with ``keep`` also the states and activations."""
    Ws, bs, V, c = unpack(spec, x)
    u = np.zeros((inputs.shape[0], spec.width))
    u[:, : spec.n_in] = inputs
    states, acts = [], []
    for W, b in zip(Ws, bs):
        t = np.tanh(u @ W.T + b)
        if keep:
            states.append(u)
            acts.append(t)
        u = u + spec.step * t
    logits = u @ V.T + c
    if keep:
        return logits, states, acts, u
    return logits


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class ResNetObjective(Objective):
    def __init__(self, spec: ResNetSpec, data):
        if data.n_in != spec.n_in or data.n_out != spec.n_out:
            raise ValueError("dataset dimensions do not match the network")
        super().__init__(spec.n_params)
        self.spec = spec
        self.inputs = data.inputs
        self.targets = data.onehot

    def _value(self, x):
        logp = _log_softmax(forward(self.spec, x, self.inputs))
        return -float(np.sum(self.targets * logp)) / self.inputs.shape[0]

    def _gradient(self, x):
        spec = self.spec
        Ws, _, V, _ = unpack(spec, x)
        logits, states, acts, u_out = forward(spec, x, self.inputs, keep=True)
        n_s = self.inputs.shape[0]
        dz = (np.exp(_log_softmax(logits)) - self.targets) / n_s
        dV = dz.T @ u_out
        dc = dz.sum(axis=0)
        du = dz @ V
        dWs = np.empty_like(Ws)
        dbs = np.empty((spec.blocks, spec.width))
        for k in range(spec.blocks - 1, -1, -1):
            da = spec.step * du * (1.0 - acts[k] ** 2)
            dWs[k] = da.T @ states[k]
            dbs[k] = da.sum(axis=0)
            du = du + da @ Ws[k]
        blocks = np.concatenate((dWs.reshape(spec.blocks, -1), dbs), axis=1)
        return np.concatenate((blocks.ravel(), dV.ravel(), dc))
