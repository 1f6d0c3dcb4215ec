"""Simulation and verification lab for level-dependent single-server
queues in heavy traffic: exact pre-limit simulation, the closed-form limit
of the scaled stationary queue length, the limiting reflected diffusion,
and statistical checks that all three agree.
"""

from .model import (
    Family,
    HeavyTrafficParams,
    LevelPartition,
    PrelimitConfig,
    QueueModel,
    RenewalSpec,
    build_prelimit,
    drift_fn,
    level_of,
    load_model,
    variance_fn,
)
from .limit import LimitDistribution, build_gibbs, build_limit, gibbs_pdf, limit_from_coefficients

__version__ = "0.1.0"

__all__ = [
    "Family",
    "HeavyTrafficParams",
    "LevelPartition",
    "PrelimitConfig",
    "QueueModel",
    "RenewalSpec",
    "build_prelimit",
    "drift_fn",
    "level_of",
    "load_model",
    "variance_fn",
    "LimitDistribution",
    "build_limit",
    "build_gibbs",
    "gibbs_pdf",
    "limit_from_coefficients",
    "__version__",
]
