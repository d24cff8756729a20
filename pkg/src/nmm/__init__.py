"""Nonlinear multilevel minimization with additive, multiplicative and
hybrid coarse-level models."""

from .coarse_models import (
    AdditiveModel,
    HistoryBuffer,
    HybridModel,
    HybridWeights,
    ModelAnchor,
    MultiplicativeModel,
    bayes_update_weights,
    build_model,
    make_anchor,
    mfv_weights,
)
from .objective import Objective, WorkLedger, fd_gradient
from .problems import (
    ProblemHierarchy,
    build_nonconvex_1d_hierarchy,
    build_quadratic_hierarchy,
    build_resnet_hierarchy,
)
from .rmtr import MultilevelSolver, RunReport, TrustRegionParams, VCycleConfig, minimize
from .transfer import TransferOps, build_interpolation_1d, build_resnet_transfer

__version__ = "0.1.0"
