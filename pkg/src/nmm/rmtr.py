"""Recursive multilevel trust-region V-cycle.

Each level runs trust-region Cauchy-point smoothing on its model. After
pre-smoothing a corrected coarse model is built around the projected
iterate, minimised recursively (or by plain smoothing on the coarsest
level), and the prolongated coarse correction is accepted only if it
decreases the fine model sufficiently relative to the decrease obtained on
the coarse model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coarse_models import (
    DEFAULT_KAPPA,
    HistoryBuffer,
    HybridWeights,
    bayes_update_weights,
    build_model,
    make_anchor,
    mfv_weights_from_values,
    paired_values,
)
from .objective import WorkLedger

EPS = np.finfo(np.float64).eps
MODEL_KINDS = ("additive", "multiplicative", "hybrid")
WEIGHT_STRATEGIES = ("fixed", "mfv", "bayes")


class NumericalAbort(RuntimeError):
    """A model produced a non-finite value or gradient."""


class ConfigurationError(ValueError):
    pass


@dataclass
class TrustRegionParams:
    delta0: float = 1.0
    delta_max: float = 1e3
    eta1: float = 0.1
    eta2: float = 0.75
    shrink: float = 0.5
    grow: float = 2.0
    delta_min: float = 1e-12

    def __post_init__(self):
        if not 0 < self.delta_min <= self.delta0 <= self.delta_max:
            raise ConfigurationError("need 0 < delta_min <= delta0 <= delta_max")
        if not 0 < self.eta1 <= self.eta2 < 1:
            raise ConfigurationError("need 0 < eta1 <= eta2 < 1")
        if not 0 < self.shrink < 1:
            raise ConfigurationError("shrink must lie in (0, 1)")
        if not self.grow > 1:
            raise ConfigurationError("grow must exceed 1")


class TrustRegionState:
    def __init__(self, params: TrustRegionParams):
        self.params = params
        self.radius = params.delta0

    def shrink(self):
        self.radius = max(self.radius * self.params.shrink, self.params.delta_min)

    def expand(self):
        self.radius = min(self.radius * self.params.grow, self.params.delta_max)


@dataclass
class VCycleConfig:
    """Solver settings.

    ``levels`` selects how many of the finest hierarchy levels are used;
    ``None`` uses all of them and ``1`` degenerates to plain smoothing with
    ``mu_pre + mu_post`` steps per cycle.
    """

    levels: Optional[int] = None
    mu_pre: int = 1
    mu_post: int = 1
    mu_coarse: int = 5
    model_kind: str = "additive"
    weight_strategy: str = "fixed"
    fixed_weight: float = 0.5
    history: Optional[int] = None
    kappa: float = DEFAULT_KAPPA
    grad_tol: float = 1e-6
    target_value: Optional[float] = None
    max_cycles: int = 100
    tr: TrustRegionParams = field(default_factory=TrustRegionParams)

    def __post_init__(self):
        if self.levels is not None and self.levels < 1:
            raise ConfigurationError("levels must be >= 1")
        for name in ("mu_pre", "mu_post", "mu_coarse", "max_cycles"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigurationError(f"model_kind must be one of {MODEL_KINDS}")
        if self.weight_strategy not in WEIGHT_STRATEGIES:
            raise ConfigurationError(f"weight_strategy must be one of {WEIGHT_STRATEGIES}")
        if not 0.0 <= self.fixed_weight <= 1.0:
            raise ConfigurationError("fixed_weight must lie in [0, 1]")
        if self.history is not None and self.history < 1:
            raise ConfigurationError("history must be positive or None")
        if not self.kappa > 0:
            raise ConfigurationError("kappa must be positive")


@dataclass
class SmoothResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    # iterate (and value) before the last smoothing step
    x_prev: np.ndarray
    f_prev: float
    steps: int = 0
    accepted: int = 0


def _finite(f, g=None, where=""):
    if not math.isfinite(f) or (g is not None and not np.all(np.isfinite(g))):
        raise NumericalAbort(f"non-finite model value/gradient {where}")


def _decrease(model, x, f, g, s, f_trial, pred):
    """f(x) - f(x + s), plus the gradient at x + s if it had to be computed.

    When the predicted decrease is below the resolution of ``f`` the value
    difference is rounding noise, and the trapezoidal estimate
    -<g + g(x + s), s>/2 is used instead; it is exact for quadratics and
    free of cancellation.
    """
    actual = f - f_trial
    if pred > 1e3 * EPS * max(1.0, abs(f)):
        return actual, None
    g_trial = model.gradient(x + s)
    _finite(f_trial, g_trial, "at trial point")
    return -0.5 * float((g + g_trial) @ s), g_trial


def cauchy_step(model, x, f, g, tr: TrustRegionState):
    """One trust-region Cauchy-point iteration.

    The curvature along -g is a secant estimate from one extra gradient at
    distance ``tr.radius``. Returns ``(x, f, g, accepted)``.
    """
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return x, f, g, False
    d = g / gnorm
    t = tr.radius
    g_probe = model.gradient(x - t * d)
    _finite(0.0, g_probe, "at curvature probe")
    curv = float(d @ (g - g_probe)) / t
    alpha = tr.radius / gnorm
    if curv > 0:
        alpha = min(alpha, 1.0 / curv)
    s = -alpha * g
    pred = alpha * gnorm**2 - 0.5 * alpha**2 * gnorm**2 * curv
    if not pred > 0.0:
        # gradient so small that the predicted decrease underflows
        return x, f, g, False
    f_trial = model.value(x + s)
    _finite(f_trial, where="at trial point")
    actual, g_new = _decrease(model, x, f, g, s, f_trial, pred)
    rho = actual / pred
    on_boundary = alpha * gnorm >= (1.0 - 1e-12) * tr.radius
    if rho < tr.params.eta1:
        tr.shrink()
        return x, f, g, False
    if rho >= tr.params.eta2 and on_boundary:
        tr.expand()
    x_new = x + s
    if g_new is None:
        g_new = model.gradient(x_new)
        _finite(f_trial, g_new, "at accepted point")
    return x_new, f_trial, g_new, True


def smooth(model, x, steps: int, tr: TrustRegionState, f=None, g=None) -> SmoothResult:
    """``steps`` trust-region Cauchy iterations on ``model`` from ``x``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if f is None:
        f = model.value(x)
    if g is None:
        g = model.gradient(x)
    _finite(f, g, "at smoother entry")
    res = SmoothResult(x=x, f=f, g=g, x_prev=x, f_prev=f)
    for _ in range(steps):
        res.x_prev, res.f_prev = res.x, res.f
        if not np.any(res.g):
            continue
        res.steps += 1
        res.x, res.f, res.g, ok = cauchy_step(model, res.x, res.f, res.g, tr)
        res.accepted += ok
    return res


def convergence_control(model, x, f, correction, pred_coarse: float, tr: TrustRegionState,
                        g_x=None):
    """Accept ``x + correction`` if it decreases ``model`` enough.

    Returns ``(x, f, g, accepted)``; ``g`` is None when the iterate did not
    change (the caller keeps its cached gradient). Passing the gradient
    ``g_x`` at ``x`` enables the rounding-safe decrease estimate.
    """
    if not np.any(correction):
        return x, f, None, False
    x_trial = x + correction
    f_trial = model.value(x_trial)
    _finite(f_trial, where="at coarse correction")
    if g_x is None:
        actual, g = f - f_trial, None
    else:
        actual, g = _decrease(model, x, f, g_x, correction, f_trial, pred_coarse)
    rho = actual / max(pred_coarse, EPS)
    if actual > 0 and rho >= tr.params.eta1:
        if rho >= tr.params.eta2:
            tr.expand()
        if g is None:
            g = model.gradient(x_trial)
            _finite(f_trial, g, "at coarse correction")
        return x_trial, f_trial, g, True
    tr.shrink()
    return x, f, None, False


class LevelState:
    def __init__(self, objective, transfer, tr_params: TrustRegionParams, history: Optional[int]):
        self.objective = objective
        # operators connecting this level to the next finer one
        self.transfer = transfer
        self.tr = TrustRegionState(tr_params)
        self.history = HistoryBuffer(history)
        self.weights = HybridWeights()
        # projected x_{mu_s} of the previous cycle and its fine value
        self.prev_point: Optional[np.ndarray] = None
        self.prev_fine_value: Optional[float] = None
        self.accepted = 0
        self.rejected = 0
        self.smooth_steps = 0
        self.smooth_accepted = 0


@dataclass
class CycleRecord:
    cycle: int
    f_value: float
    grad_norm: float
    work_units: float
    accepted_coarse: list
    rejected_coarse: list
    w_add: list

    @property
    def accepted_coarse_steps(self) -> int:
        return sum(self.accepted_coarse)


@dataclass
class RunReport:
    levels: int
    records: list = field(default_factory=list)
    x: Optional[np.ndarray] = None
    converged: bool = False

    @property
    def cycles(self) -> int:
        return self.records[-1].cycle if self.records else 0

    @property
    def final(self) -> CycleRecord:
        return self.records[-1]

    def csv_header(self) -> list:
        cols = ["cycle", "f_value", "grad_norm", "work_units", "accepted_coarse_steps"]
        return cols + [f"w_add_L-{k}" for k in range(1, self.levels)]

    def csv_rows(self) -> list:
        rows = []
        for r in self.records:
            rows.append([r.cycle, r.f_value, r.grad_norm, r.work_units,
                         r.accepted_coarse_steps] + list(r.w_add))
        return rows


class MultilevelSolver:
    """Runs V-cycles over a hierarchy (objectives ordered coarse to fine)."""

    def __init__(self, objectives, transfers, config: VCycleConfig):
        objectives = list(objectives)
        transfers = list(transfers)
        if len(transfers) != len(objectives) - 1:
            raise ConfigurationError("need exactly one transfer per adjacent level pair")
        for k, ops in enumerate(transfers):
            if ops.n_coarse != objectives[k].dim or ops.n_fine != objectives[k + 1].dim:
                raise ConfigurationError(
                    f"transfer {k} maps {ops.n_coarse}->{ops.n_fine}, levels have "
                    f"{objectives[k].dim} and {objectives[k + 1].dim}"
                )
        levels = config.levels or len(objectives)
        if levels > len(objectives):
            raise ConfigurationError(f"hierarchy has only {len(objectives)} levels")
        self.config = config
        self.objectives = objectives[len(objectives) - levels:]
        self.transfers = transfers[len(objectives) - levels:]
        self.levels = levels
        # states[k] belongs to level k+1; states[k].transfer maps level k+1 -> k+2
        self.states = [
            LevelState(obj, self.transfers[k] if k < levels - 1 else None,
                       config.tr, config.history)
            for k, obj in enumerate(self.objectives)
        ]
        self.ledger = WorkLedger(self.objectives)

    def _weights_for(self, child: LevelState, anchor, pre: SmoothResult) -> HybridWeights:
        cfg = self.config
        if cfg.model_kind != "hybrid":
            return None
        if cfg.weight_strategy == "fixed":
            child.weights = HybridWeights.from_add(cfg.fixed_weight)
        elif cfg.weight_strategy == "mfv":
            x_p = child.transfer.project(pre.x_prev)
            if np.array_equal(x_p, anchor.x0):
                child.weights = HybridWeights()
            else:
                add, mult = paired_values(child.objective, anchor, x_p)
                child.weights = mfv_weights_from_values(pre.f_prev, add, mult)
        else:
            if child.prev_point is not None:
                add, mult = paired_values(child.objective, anchor, child.prev_point)
                child.history.record(child.prev_fine_value, add, mult)
                child.weights = bayes_update_weights(child.weights, child.history)
            child.prev_point = anchor.x0
            child.prev_fine_value = anchor.fine_value
        return child.weights

    def v_cycle(self, level: int, model, x, f=None, g=None) -> SmoothResult:
        """One V-cycle on ``level`` (1-based) for ``model``; returns the result
        of post-smoothing."""
        cfg = self.config
        st = self.states[level - 1]
        pre = smooth(model, x, cfg.mu_pre, st.tr, f, g)
        st.smooth_steps += pre.steps
        st.smooth_accepted += pre.accepted
        child = self.states[level - 2]
        ops = child.transfer
        anchor = make_anchor(model, pre.x, child.objective, ops, cfg.kappa,
                             fine_value=pre.f, fine_grad=pre.g)
        weights = self._weights_for(child, anchor, pre)
        coarse_model = build_model(cfg.model_kind, child.objective, anchor, weights)
        f0, g0 = coarse_model.anchor_value_grad()
        if level == 2:
            sol = smooth(coarse_model, anchor.x0, cfg.mu_coarse, child.tr, f0, g0)
            child.smooth_steps += sol.steps
            child.smooth_accepted += sol.accepted
        else:
            sol = self.v_cycle(level - 1, coarse_model, anchor.x0, f0, g0)
        correction = ops.prolongate(sol.x - anchor.x0)
        x1, f1, g1, ok = convergence_control(model, pre.x, pre.f, correction, f0 - sol.f, st.tr, pre.g)
        if np.any(correction):
            if ok:
                child.accepted += 1
            else:
                child.rejected += 1
        if g1 is None:
            g1 = pre.g
        post = smooth(model, x1, cfg.mu_post, st.tr, f1, g1)
        st.smooth_steps += post.steps
        st.smooth_accepted += post.accepted
        return post

    def _cycle_top(self, x, f, g):
        if self.levels == 1:
            st = self.states[0]
            res = smooth(st.objective, x, self.config.mu_pre + self.config.mu_post, st.tr, f, g)
            st.smooth_steps += res.steps
            st.smooth_accepted += res.accepted
            return res
        return self.v_cycle(self.levels, self.objectives[-1], x, f, g)

    def _record(self, cycle, f, g, before):
        coarse = self.states[:-1][::-1]
        w_add = []
        for st in coarse:
            if self.config.model_kind == "hybrid":
                w_add.append(st.weights.w_add)
            else:
                w_add.append(1.0 if self.config.model_kind == "additive" else 0.0)
        return CycleRecord(
            cycle=cycle,
            f_value=float(f),
            grad_norm=float(np.max(np.abs(g))),
            work_units=self.ledger.total(),
            accepted_coarse=[st.accepted - a for st, (a, _) in zip(coarse, before)],
            rejected_coarse=[st.rejected - r for st, (_, r) in zip(coarse, before)],
            w_add=w_add,
        )

    def _done(self, f, g) -> bool:
        cfg = self.config
        if np.max(np.abs(g)) <= cfg.grad_tol:
            return True
        return cfg.target_value is not None and f <= cfg.target_value

    def run(self, x_init) -> RunReport:
        fine = self.objectives[-1]
        x = np.array(x_init, dtype=np.float64)
        if x.shape != (fine.dim,):
            raise ConfigurationError(f"x_init has shape {x.shape}, expected ({fine.dim},)")
        self.ledger.reset()
        report = RunReport(levels=self.levels)
        f = fine.value(x)
        g = fine.gradient(x)
        _finite(f, g, "at initial iterate")
        coarse = self.states[:-1][::-1]
        before = [(st.accepted, st.rejected) for st in coarse]
        report.records.append(self._record(0, f, g, before))
        for cycle in range(1, self.config.max_cycles + 1):
            if self._done(f, g):
                break
            before = [(st.accepted, st.rejected) for st in coarse]
            res = self._cycle_top(x, f, g)
            x, f, g = res.x, res.f, res.g
            report.records.append(self._record(cycle, f, g, before))
        report.converged = self._done(f, g)
        report.x = x
        return report


def minimize(hierarchy, config: VCycleConfig, x_init) -> RunReport:
    """Run V-cycles on ``hierarchy`` until the stopping test or ``max_cycles``."""
    solver = MultilevelSolver(hierarchy.objectives, hierarchy.transfers, config)
    return solver.run(x_init)
