"""Evaluatable objectives, a finite-difference oracle and work accounting."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when a vector does not match the dimension of an operator."""


def check_dim(x, n: int, what: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n:
        raise DimensionError(f"{what} has shape {x.shape}, expected ({n},)")
    return x


class Objective:
    """A smooth scalar function with gradient and evaluation counters.

    Subclasses implement ``_value`` and ``_gradient``; the public methods
    validate the input dimension and count evaluations.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.value_evals = 0
        self.grad_evals = 0

    def value(self, x) -> float:
        x = check_dim(x, self.dim)
        self.value_evals += 1
        return float(self._value(x))

    def gradient(self, x) -> np.ndarray:
        x = check_dim(x, self.dim)
        self.grad_evals += 1
        g = np.asarray(self._gradient(x), dtype=np.float64)
        return g

    def reset_counters(self):
        self.value_evals = 0
        self.grad_evals = 0

    def _value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FunctionObjective(Objective):
    """Objective built from plain callables."""

    def __init__(self, dim: int, fun: Callable, grad: Callable):
        super().__init__(dim)
        self._fun = fun
        self._grad = grad

    def _value(self, x):
        return self._fun(x)

    def _gradient(self, x):
        return self._grad(x)


class QuadraticObjective(Objective):
    """f(x) = 1/2 x^T A x - b^T x + c with symmetric A."""

    def __init__(self, A, b=None, c: float = 0.0):
        A = np.asarray(A, dtype=np.float64)
        super().__init__(A.shape[0])
        self.A = A
        self.b = np.zeros(self.dim) if b is None else check_dim(b, self.dim, "b")
        self.c = float(c)

    def _value(self, x):
        return 0.5 * x @ (self.A @ x) - self.b @ x + self.c

    def _gradient(self, x):
        return self.A @ x - self.b

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)


def fd_gradient(obj, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``obj.value`` at ``x``."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = check_dim(x, obj.dim)
    g = np.empty(obj.dim)
    e = np.zeros(obj.dim)
    for i in range(obj.dim):
        e[i] = h
        g[i] = (obj.value(x + e) - obj.value(x - e)) / (2.0 * h)
        e[i] = 0.0
    return g


def gradient_error(obj, x, h: float = 1e-5) -> float:
    """||grad - fd_grad||_inf / (1 + ||grad||_inf)."""
    g = obj.gradient(x)
    return float(np.max(np.abs(g - fd_gradient(obj, x, h))) / (1.0 + np.max(np.abs(g))))


class WorkLedger:
    """Dimension-weighted evaluation cost over a level hierarchy.

    A gradient evaluation on level l costs n_l / n_L units, a value
    evaluation half of that. Counts are taken relative to the counters at
    construction (or the last ``reset``) so the handles can be reused.
    """

    def __init__(self, objectives: Sequence[Objective]):
        self.objectives = list(objectives)
        self.dims = [o.dim for o in self.objectives]
        self.reset()

    def reset(self):
        self._base = [(o.value_evals, o.grad_evals) for o in self.objectives]

    def counts(self) -> list[tuple[int, int]]:
        return [
            (o.value_evals - bv, o.grad_evals - bg)
            for o, (bv, bg) in zip(self.objectives, self._base)
        ]

    def total(self) -> float:
        n_fine = self.dims[-1]
        work = 0.0
        for n, (nv, ng) in zip(self.dims, self.counts()):
            work += (ng + 0.5 * nv) * n / n_fine
        return work
