"""First-order coherent coarse-level models.

Given the fine iterate after pre-smoothing, the coarse objective ``f`` is
corrected so that the coarse model matches the fine model's value and
restricted gradient at the projected iterate ``x0``:

* additive:        h(x) = f(x) + (F - f(x0)) + <tau, x - x0>
* multiplicative:  h(x) = gamma(x) (f(x) + kappa) - kappa
* hybrid:          h(x) = w_add h_add(x) + w_mult h_mult(x)

where ``gamma`` is the first-order Taylor expansion of the value ratio
(F + kappa) / (f + kappa) around ``x0``. The hybrid weights come either
from matching a previous fine value (MFV) or from a Bayesian update over
a history of fine-versus-model residuals.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .objective import check_dim

DEFAULT_KAPPA = 1e-8
# Bayesian weights are kept this far from 0 and 1 so that a model is never
# excluded for good by the multiplicative posterior update.
WEIGHT_FLOOR = 1e-12
SIGMA2_MIN = 1e-300


@dataclass(frozen=True)
class ModelAnchor:
    x0: np.ndarray
    fine_value: float
    restricted_fine_grad: np.ndarray
    coarse_value: float
    coarse_grad: np.ndarray
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        n = self.x0.shape[0]
        check_dim(self.restricted_fine_grad, n, "restricted_fine_grad")
        check_dim(self.coarse_grad, n, "coarse_grad")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def dim(self) -> int:
        return self.x0.shape[0]


def make_anchor(fine_model, x_fine, coarse_obj, ops, kappa=DEFAULT_KAPPA,
                fine_value=None, fine_grad=None) -> ModelAnchor:
    """Collect the data a coarse model is built from.

    ``fine_value``/``fine_grad`` may be passed when the caller already holds
    them (the smoother does); otherwise they are evaluated here.
    """
    if ops.n_fine != fine_model.dim or ops.n_coarse != coarse_obj.dim:
        raise ValueError(
            f"transfer {ops.n_coarse}->{ops.n_fine} does not connect "
            f"dims {coarse_obj.dim} and {fine_model.dim}"
        )
    x_fine = check_dim(x_fine, fine_model.dim, "x_fine")
    if fine_value is None:
        fine_value = fine_model.value(x_fine)
    if fine_grad is None:
        fine_grad = fine_model.gradient(x_fine)
    x0 = ops.project(x_fine)
    return ModelAnchor(
        x0=x0,
        fine_value=float(fine_value),
        restricted_fine_grad=ops.restrict(fine_grad),
        coarse_value=coarse_obj.value(x0),
        coarse_grad=coarse_obj.gradient(x0),
        kappa=float(kappa),
    )


class CoarseModel:
    """Base class: a corrected model of the coarse objective ``f``.

    Models do not count evaluations themselves; every call goes through the
    wrapped objective, whose counters do. The last value of ``f`` is cached
    so that a gradient request at a just-evaluated point does not pay for a
    second value evaluation.
    """

    kind = ""

    def __init__(self, coarse_obj, anchor: ModelAnchor):
        if anchor.dim != coarse_obj.dim:
            raise ValueError("anchor and coarse objective dimensions differ")
        self.coarse_obj = coarse_obj
        self.anchor = anchor
        self.dim = coarse_obj.dim
        self._last_x = None
        self._last_f = None

    def _f(self, x):
        if self._last_x is not None and np.array_equal(x, self._last_x):
            return self._last_f
        fx = self.coarse_obj.value(x)
        self._last_x, self._last_f = x.copy(), fx
        return fx

    def value(self, x) -> float:
        x = check_dim(x, self.dim)
        return self.value_from(self._f(x), x)

    def gradient(self, x) -> np.ndarray:
        x = check_dim(x, self.dim)
        return self.gradient_from(self._f_for_gradient(x), self.coarse_obj.gradient(x), x)

    def _f_for_gradient(self, x):
        return None

    def value_from(self, fx: float, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient_from(self, fx, gx: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def anchor_value_grad(self) -> tuple[float, np.ndarray]:
        """Model value and gradient at x0, from anchor data alone."""
        raise NotImplementedError


class AdditiveModel(CoarseModel):
    kind = "additive"

    def __init__(self, coarse_obj, anchor: ModelAnchor):
        super().__init__(coarse_obj, anchor)
        self.shift = anchor.fine_value - anchor.coarse_value
        # tau-correction: gradient of the additive correction at x0
        self.tau = anchor.restricted_fine_grad - anchor.coarse_grad

    def value_from(self, fx, x):
        return fx + self.shift + self.tau @ (x - self.anchor.x0)

    def gradient_from(self, fx, gx, x):
        return gx + self.tau

    def anchor_value_grad(self):
        return self.anchor.fine_value, self.anchor.restricted_fine_grad.copy()


class MultiplicativeModel(CoarseModel):
    """Multiplicative correction of the kappa-shifted coarse objective.

    The ratio is taken between shifted values, so the model multiplies the
    shifted objective ``f + kappa`` and removes the shift afterwards. This
    keeps value and gradient coherence exact for any kappa > 0.
    """

    kind = "multiplicative"

    def __init__(self, coarse_obj, anchor: ModelAnchor):
        super().__init__(coarse_obj, anchor)
        k = anchor.kappa
        denom = anchor.coarse_value + k
        self.ratio0 = (anchor.fine_value + k) / denom
        self.ratio_grad = (
            anchor.restricted_fine_grad / denom
            - (anchor.fine_value + k) * anchor.coarse_grad / denom**2
        )

    def correction(self, x) -> float:
        x = check_dim(x, self.dim)
        return self.ratio0 + self.ratio_grad @ (x - self.anchor.x0)

    def _f_for_gradient(self, x):
        return self._f(x)

    def value_from(self, fx, x):
        k = self.anchor.kappa
        return self.correction(x) * (fx + k) - k

    def gradient_from(self, fx, gx, x):
        return self.correction(x) * gx + (fx + self.anchor.kappa) * self.ratio_grad

    def anchor_value_grad(self):
        a = self.anchor
        shifted = a.coarse_value + a.kappa
        return (
            self.ratio0 * shifted - a.kappa,
            self.ratio0 * a.coarse_grad + shifted * self.ratio_grad,
        )


@dataclass(frozen=True)
class HybridWeights:
    w_add: float = 0.5
    w_mult: float = 0.5

    def __post_init__(self):
        if abs(self.w_add + self.w_mult - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {self.w_add} + {self.w_mult}")

    @classmethod
    def from_add(cls, w_add: float) -> "HybridWeights":
        return cls(float(w_add), 1.0 - float(w_add))


class HybridModel(CoarseModel):
    kind = "hybrid"

    def __init__(self, coarse_obj, anchor: ModelAnchor, weights: HybridWeights):
        super().__init__(coarse_obj, anchor)
        self.weights = weights
        self.additive = AdditiveModel(coarse_obj, anchor)
        self.multiplicative = MultiplicativeModel(coarse_obj, anchor)

    def _f_for_gradient(self, x):
        return self._f(x) if self.weights.w_mult != 0.0 else None

    def value_from(self, fx, x):
        w = self.weights
        return (w.w_add * self.additive.value_from(fx, x)
                + w.w_mult * self.multiplicative.value_from(fx, x))

    def gradient_from(self, fx, gx, x):
        w = self.weights
        g = w.w_add * self.additive.gradient_from(fx, gx, x)
        if w.w_mult != 0.0:
            g = g + w.w_mult * self.multiplicative.gradient_from(fx, gx, x)
        return g

    def anchor_value_grad(self):
        w = self.weights
        fa, ga = self.additive.anchor_value_grad()
        fm, gm = self.multiplicative.anchor_value_grad()
        return w.w_add * fa + w.w_mult * fm, w.w_add * ga + w.w_mult * gm


def build_model(kind: str, coarse_obj, anchor: ModelAnchor,
                weights: Optional[HybridWeights] = None) -> CoarseModel:
    if kind == "additive":
        return AdditiveModel(coarse_obj, anchor)
    if kind == "multiplicative":
        return MultiplicativeModel(coarse_obj, anchor)
    if kind == "hybrid":
        return HybridModel(coarse_obj, anchor, weights or HybridWeights())
    raise ValueError(f"unknown model kind {kind!r}")


def paired_values(coarse_obj, anchor: ModelAnchor, x) -> tuple[float, float]:
    """(h_add(x), h_mult(x)) for the models anchored at ``anchor``.

    Costs a single evaluation of the coarse objective.
    """
    x = check_dim(x, coarse_obj.dim)
    fx = coarse_obj.value(x)
    add = AdditiveModel(coarse_obj, anchor)
    mult = MultiplicativeModel(coarse_obj, anchor)
    return add.value_from(fx, x), mult.value_from(fx, x)


def mfv_weights_from_values(prev_fine_value: float, add_value: float,
                            mult_value: float, clamp: bool = True) -> HybridWeights:
    """Weights making the hybrid reproduce ``prev_fine_value``."""
    denom = add_value - mult_value
    if abs(denom) <= 1e-12 * (1.0 + abs(prev_fine_value)):
        return HybridWeights()
    w_add = (prev_fine_value - mult_value) / denom
    if clamp:
        w_add = min(1.0, max(0.0, w_add))
    return HybridWeights.from_add(w_add)


def mfv_weights(prev_fine_value: float, x_prev_coarse, add_model: AdditiveModel,
                mult_model: MultiplicativeModel, clamp: bool = True) -> HybridWeights:
    """MFV weights at the projected previous fine iterate ``x_prev_coarse``."""
    x = check_dim(x_prev_coarse, add_model.dim)
    return mfv_weights_from_values(
        prev_fine_value, add_model.value(x), mult_model.value(x), clamp=clamp
    )


class HistoryBuffer:
    """Last ``capacity`` (fine, additive, multiplicative) value triples.

    ``capacity=None`` keeps every sample.
    """

    def __init__(self, capacity: Optional[int] = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive or None")
        self.capacity = capacity
        self.samples: deque = deque(maxlen=capacity)

    def __len__(self):
        return len(self.samples)

    def record(self, fine_value: float, add_value: float, mult_value: float):
        self.samples.append((float(fine_value), float(add_value), float(mult_value)))

    def as_array(self) -> np.ndarray:
        return np.array(self.samples, dtype=np.float64).reshape(-1, 3)


def record_history(buf: HistoryBuffer, fine_value, add_value, mult_value):
    buf.record(fine_value, add_value, mult_value)


def log_likelihood(residuals: np.ndarray) -> float:
    """Gaussian log-likelihood at the variance MLE (mean squared residual)."""
    d = residuals.shape[0]
    sigma2 = max(float(np.mean(residuals**2)), SIGMA2_MIN)
    return -0.5 * d * math.log(2.0 * math.pi * sigma2) - 0.5 * d


def bayes_update_weights(w: HybridWeights, buf: HistoryBuffer) -> HybridWeights:
    """One posterior update of the hybrid weights from the history."""
    if len(buf) == 0:
        raise ValueError("Bayesian update needs a non-empty history")
    data = buf.as_array()
    ll_add = log_likelihood(data[:, 0] - data[:, 1])
    ll_mult = log_likelihood(data[:, 0] - data[:, 2])
    # log-odds of the additive model; the exp(-d/2) factors cancel here
    z = math.log(w.w_add) + ll_add - math.log(w.w_mult) - ll_mult
    if not math.isfinite(z):
        return w
    w_add = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
    w_add = min(1.0 - WEIGHT_FLOOR, max(WEIGHT_FLOOR, w_add))
    return HybridWeights.from_add(w_add)
