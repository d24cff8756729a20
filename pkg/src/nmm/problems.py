"""Benchmark problem families with level hierarchies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objective import Objective
from .transfer import build_interpolation_1d, build_resnet_transfer


@dataclass
class ProblemHierarchy:
    """Objectives ordered coarse to fine plus the transfers between them."""

    name: str
    objectives: list
    transfers: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.transfers) != len(self.objectives) - 1:
            raise ValueError("need one transfer per adjacent pair of levels")
        for k, ops in enumerate(self.transfers):
            if ops.n_coarse != self.objectives[k].dim or ops.n_fine != self.objectives[k + 1].dim:
                raise ValueError(f"transfer {k} does not chain the level dimensions")

    @property
    def dims(self) -> list:
        return [o.dim for o in self.objectives]

    @property
    def fine(self):
        return self.objectives[-1]

    def initial_point(self, seed: int) -> np.ndarray:
        scale = self.meta.get("init_scale", 1.0)
        return scale * np.random.default_rng(seed).standard_normal(self.fine.dim)

    def reset_counters(self):
        for o in self.objectives:
            o.reset_counters()


def grid_dims(n_coarse: int, levels: int) -> list:
    dims = [n_coarse]
    for _ in range(levels - 1):
        dims.append(2 * dims[-1] + 1)
    return dims


def _stiffness(x: np.ndarray, h: float) -> np.ndarray:
    """(1/h) tridiag(-1, 2, -1) x with zero boundary values."""
    y = 2.0 * x
    y[1:] -= x[:-1]
    y[:-1] -= x[1:]
    return y / h


def _dirichlet_energy(x: np.ndarray, h: float) -> float:
    d = np.diff(np.concatenate(([0.0], x, [0.0])))
    return 0.5 * float(d @ d) / h


class GridQuadratic(Objective):
    """h * sum( 1/2 ((x_{i+1}-x_i)/h)^2 + 1/2 x_i^2 - b(t_i) x_i ) on (0, 1)."""

    def __init__(self, n: int, forcing):
        super().__init__(n)
        self.h = 1.0 / (n + 1)
        self.t = self.h * np.arange(1, n + 1)
        self.b = self.h * forcing(self.t)

    def _value(self, x):
        return _dirichlet_energy(x, self.h) + 0.5 * self.h * float(x @ x) - float(self.b @ x)

    def _gradient(self, x):
        return _stiffness(x, self.h) + self.h * x - self.b

    def matrix(self) -> np.ndarray:
        n, h = self.dim, self.h
        A = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / h
        return A + h * np.eye(n)

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.matrix(), self.b)


class GridNonconvex(Objective):
    """h * sum( 1/2 ((x_{i+1}-x_i)/h)^2 + sin(3 x_i) + x_i^4 / 4 )."""

    def __init__(self, n: int):
        super().__init__(n)
        self.h = 1.0 / (n + 1)

    def _value(self, x):
        return _dirichlet_energy(x, self.h) + self.h * float(np.sum(np.sin(3.0 * x) + 0.25 * x**4))

    def _gradient(self, x):
        return _stiffness(x, self.h) + self.h * (3.0 * np.cos(3.0 * x) + x**3)

    def lower_bound(self) -> float:
        return -self.h * self.dim


def smooth_forcing(seed: int, modes: int = 5):
    coef = np.random.default_rng(seed).standard_normal(modes)
    k = np.arange(1, modes + 1)

    def forcing(t):
        return 10.0 * np.sin(np.pi * np.outer(t, k)) @ coef

    return forcing


def build_quadratic_hierarchy(n_coarse: int = 31, levels: int = 3, seed: int = 0) -> ProblemHierarchy:
    if levels < 2:
        raise ValueError("levels must be >= 2")
    forcing = smooth_forcing(seed)
    dims = grid_dims(n_coarse, levels)
    return ProblemHierarchy(
        name="quadratic",
        objectives=[GridQuadratic(n, forcing) for n in dims],
        transfers=[build_interpolation_1d(n) for n in dims[:-1]],
        meta={"seed": seed},
    )


def build_nonconvex_1d_hierarchy(n_coarse: int = 31, levels: int = 3) -> ProblemHierarchy:
    if levels < 2:
        raise ValueError("levels must be >= 2")
    dims = grid_dims(n_coarse, levels)
    return ProblemHierarchy(
        name="nonconvex1d",
        objectives=[GridNonconvex(n) for n in dims],
        transfers=[build_interpolation_1d(n) for n in dims[:-1]],
    )


def build_resnet_hierarchy(data, coarse_blocks: int = 3, refinements: int = 3,
                           width: int = 8, horizon: float = 1.0,
                           init_scale: float = 0.1) -> ProblemHierarchy:
    """Depth hierarchy 3, 5, 9, 17 blocks (for the defaults) of one ResNet."""
    from .resnet import ResNetObjective, ResNetSpec

    if refinements < 1:
        raise ValueError("refinements must be >= 1")
    blocks = [coarse_blocks]
    for _ in range(refinements):
        blocks.append(2 * blocks[-1] - 1)
    objectives = [
        ResNetObjective(ResNetSpec(blocks=b, width=width, n_in=data.n_in,
                                   n_out=data.n_out, horizon=horizon), data)
        for b in blocks
    ]
    block_size = width * width + width
    head_size = data.n_out * width + data.n_out
    return ProblemHierarchy(
        name=f"resnet-{data.name}",
        objectives=objectives,
        transfers=[build_resnet_transfer(b, block_size, head_size) for b in blocks[:-1]],
        meta={"blocks": blocks, "width": width, "init_scale": init_scale},
    )
