"""Invariant and oracle checks over all problem families (``nmm check``)."""

from __future__ import annotations

import numpy as np

from .coarse_models import (
    AdditiveModel,
    HybridModel,
    HybridWeights,
    MultiplicativeModel,
    make_anchor,
)
from .datasets import generate
from .objective import fd_gradient
from .problems import (
    build_nonconvex_1d_hierarchy,
    build_quadratic_hierarchy,
    build_resnet_hierarchy,
)


def families():
    yield build_quadratic_hierarchy(7, 3)
    yield build_nonconvex_1d_hierarchy(7, 3)
    for name in ("blobs", "smiley", "spiral"):
        yield build_resnet_hierarchy(generate(name, 32, 0), refinements=2, width=4)


def _rel_fd_error(obj, x):
    g = obj.gradient(x)
    return float(np.max(np.abs(g - fd_gradient(obj, x))) / (1.0 + np.max(np.abs(g))))


def transfer_errors(hier, rng, samples=100):
    adj = proj = 0.0
    for ops in hier.transfers:
        for _ in range(samples):
            u, v = rng.standard_normal(ops.n_coarse), rng.standard_normal(ops.n_fine)
            rhs = u @ ops.restrict(v)
            adj = max(adj, abs(ops.prolongate(u) @ v - rhs) / (1.0 + abs(rhs)))
            proj = max(proj, float(np.max(np.abs(ops.project(ops.prolongate(u)) - u))))
    return adj, proj


def gradient_errors(hier, rng, points=3):
    scale = hier.meta.get("init_scale", 1.0) * 3.0
    return max(_rel_fd_error(o, scale * rng.standard_normal(o.dim))
               for o in hier.objectives for _ in range(points))


def coherence_errors(hier, rng, anchors=10, kappa=1e-8):
    """Worst zeroth/first-order coherence error relative to the tolerances."""
    scale = hier.meta.get("init_scale", 1.0) * 3.0
    worst = 0.0
    for _ in range(anchors):
        k = rng.integers(len(hier.transfers))
        fine, coarse, ops = hier.objectives[k + 1], hier.objectives[k], hier.transfers[k]
        a = make_anchor(fine, scale * rng.standard_normal(fine.dim), coarse, ops, kappa)
        rg = np.max(np.abs(a.restricted_fine_grad))
        for h in (AdditiveModel(coarse, a), HybridModel(coarse, a, HybridWeights(0.4, 0.6))):
            worst = max(worst,
                        abs(h.value(a.x0) - a.fine_value) / (1e-12 * (1 + abs(a.fine_value))),
                        np.max(np.abs(h.gradient(a.x0) - a.restricted_fine_grad)) / (1e-12 * (1 + rg)))
        h = MultiplicativeModel(coarse, a)
        tol_g = 5 * kappa * (1 + rg) / (abs(a.coarse_value) + kappa)
        worst = max(worst, abs(h.value(a.x0) - a.fine_value) / (2 * kappa),
                    np.max(np.abs(h.gradient(a.x0) - a.restricted_fine_grad)) / tol_g)
    return worst


def run_checks(seed=0):
    """Yield ``(name, passed, detail)`` for every check."""
    rng = np.random.default_rng(seed)
    for hier in families():
        adj, proj = transfer_errors(hier, rng)
        yield f"{hier.name}: transfer adjointness", adj <= 1e-12, f"max rel err {adj:.2e}"
        yield f"{hier.name}: projection of prolongation", proj == 0.0, f"max err {proj:.2e}"
        err = gradient_errors(hier, rng)
        yield f"{hier.name}: gradients vs finite differences", err <= 1e-6, f"max rel err {err:.2e}"
        ratio = coherence_errors(hier, rng)
        yield f"{hier.name}: model coherence", ratio <= 1.0, f"worst error/tolerance {ratio:.2e}"
