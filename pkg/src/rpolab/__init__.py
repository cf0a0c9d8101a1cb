"""Desk-scale continuous-control policy optimization lab.

Implements clipped-surrogate policy optimization and its robust variant
that perturbs the recomputed action-distribution mean with uniform noise
during the update, plus the environments, sweeps, and reporting needed
to compare them.
"""

from .envs import ENV_REGISTRY, make_env
from .errors import ConfigError, InternalError, TrainingDiverged, UsageError
from .experiments import (
    RunSpec,
    aggregate,
    normalized_return,
    run,
    sweep_alpha,
    sweep_ent,
)
from .trainer import ActorCritic, TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "ENV_REGISTRY",
    "make_env",
    "ConfigError",
    "UsageError",
    "InternalError",
    "TrainingDiverged",
    "RunSpec",
    "run",
    "aggregate",
    "normalized_return",
    "sweep_alpha",
    "sweep_ent",
    "ActorCritic",
    "TrainConfig",
    "TrainResult",
    "train",
    "__version__",
]
