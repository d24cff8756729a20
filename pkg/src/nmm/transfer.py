"""Prolongation, restriction and projection between adjacent levels.

Restriction is always the transpose of prolongation; projection is an
injection chosen so that ``project(prolongate(x)) == x`` exactly.
"""

from __future__ import annotations

import numpy as np

from .objective import check_dim


class TransferOps:
    """Matrix-free transfer operators between a coarse and a fine space."""

    def __init__(self, n_coarse: int, n_fine: int, strict: bool = True):
        if not 0 < n_coarse <= n_fine or (strict and n_coarse == n_fine):
            raise ValueError(f"need 0 < n_coarse < n_fine, got {n_coarse}, {n_fine}")
        self.n_coarse = int(n_coarse)
        self.n_fine = int(n_fine)

    def prolongate(self, v) -> np.ndarray:
        return self._prolongate(check_dim(v, self.n_coarse, "coarse vector"))

    def restrict(self, v) -> np.ndarray:
        return self._restrict(check_dim(v, self.n_fine, "fine vector"))

    def project(self, x) -> np.ndarray:
        return self._project(check_dim(x, self.n_fine, "fine vector"))

    def prolongation_matrix(self) -> np.ndarray:
        """Dense I, assembled column by column (test oracle only)."""
        eye = np.eye(self.n_coarse)
        return np.column_stack([self._prolongate(eye[:, j]) for j in range(self.n_coarse)])

    def projection_matrix(self) -> np.ndarray:
        eye = np.eye(self.n_fine)
        return np.column_stack([self._project(eye[:, j]) for j in range(self.n_fine)])

    def _prolongate(self, v):
        raise NotImplementedError

    def _restrict(self, v):
        raise NotImplementedError

    def _project(self, x):
        raise NotImplementedError


class IdentityTransfer(TransferOps):
    """Degenerate two-level transfer between equal spaces."""

    def __init__(self, n: int):
        super().__init__(n, n, strict=False)

    def _prolongate(self, v):
        return v.copy()

    _restrict = _prolongate
    _project = _prolongate


class Interpolation1D(TransferOps):
    """Linear interpolation between nested uniform grids of interior nodes.

    Coarse node j sits on fine node 2j+1 (0-based). Fine nodes in between
    take the mean of their coarse neighbours, with zero Dirichlet values
    outside the grid.
    """

    def __init__(self, n_coarse: int):
        if n_coarse < 1:
            raise ValueError("n_coarse must be >= 1")
        super().__init__(n_coarse, 2 * n_coarse + 1)

    def _prolongate(self, v):
        u = np.empty(self.n_fine)
        u[1::2] = v
        padded = np.concatenate(([0.0], v, [0.0]))
        u[0::2] = 0.5 * (padded[:-1] + padded[1:])
        return u

    def _restrict(self, w):
        return w[1::2] + 0.5 * (w[0:-1:2] + w[2::2])

    def _project(self, x):
        return x[1::2].copy()


class DepthInterpolation(TransferOps):
    """Transfer for parameter vectors laid out as ``blocks x block_size`` + head.

    The block index is the time axis of a forward-Euler network. A coarse
    network with K blocks maps to one with 2K-1 blocks: even fine blocks
    copy coarse blocks, odd fine blocks average their two neighbours. The
    trailing ``head_size`` entries are copied unchanged.
    """

    def __init__(self, blocks_coarse: int, block_size: int, head_size: int):
        if blocks_coarse < 2:
            raise ValueError("depth refinement needs at least 2 coarse blocks")
        if block_size < 1 or head_size < 0:
            raise ValueError("incompatible block shapes")
        self.blocks_coarse = blocks_coarse
        self.blocks_fine = 2 * blocks_coarse - 1
        self.block_size = block_size
        self.head_size = head_size
        super().__init__(
            blocks_coarse * block_size + head_size,
            self.blocks_fine * block_size + head_size,
        )

    def _split(self, x, blocks):
        cut = blocks * self.block_size
        return x[:cut].reshape(blocks, self.block_size), x[cut:]

    def _prolongate(self, v):
        bc, head = self._split(v, self.blocks_coarse)
        bf = np.empty((self.blocks_fine, self.block_size))
        bf[0::2] = bc
        bf[1::2] = 0.5 * (bc[:-1] + bc[1:])
        return np.concatenate((bf.ravel(), head))

    def _restrict(self, w):
        bf, head = self._split(w, self.blocks_fine)
        bc = bf[0::2].copy()
        bc[:-1] += 0.5 * bf[1::2]
        bc[1:] += 0.5 * bf[1::2]
        return np.concatenate((bc.ravel(), head))

    def _project(self, x):
        bf, head = self._split(x, self.blocks_fine)
        return np.concatenate((bf[0::2].ravel(), head))


def build_interpolation_1d(n_coarse: int) -> Interpolation1D:
    return Interpolation1D(n_coarse)


def build_resnet_transfer(layers_coarse: int, block_size: int, head_size: int) -> DepthInterpolation:
    return DepthInterpolation(layers_coarse, block_size, head_size)
