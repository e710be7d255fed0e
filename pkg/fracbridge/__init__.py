# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""Simulation and estimation for α-fractional bridges.

The α-fractional bridge solves dX_t = -α X_t/(T - t) dt + dB_t on [0, T) where B is a
fractional Brownian motion with Hurst index H ≥ 1/2. This package samples B exactly,
builds the bridge and its auxiliary processes, evaluates the least squares estimator of
α as t approaches T, and checks its consistency and limit laws by Monte Carlo.

"""

__version__ = "0.1.0.dev0"

from .bridge import BridgePaths, ModelParams, build_bridge, euler_bridge  # noqa: E402
from .config import ConfigError  # noqa: E402
from .estimator import (  # noqa: E402
    DegeneratePathError,
    EstimatorLadder,
    EvalLadder,
    estimate_ladder,
)
from .fbm import (  # noqa: E402
    EmbeddingError,
    FactorizationError,
    GaussianPath,
    HurstParam,
    Sampler,
    TimeGrid,
)
from .limits import LimitConstants, Regime, classify, limit_constants  # noqa: E402
from .mcharness import (  # noqa: E402
    Check,
    McConfig,
    McRunError,
    McSummary,
    ReplicationError,
    run,
)
from .specialfn import DomainError, QuadratureError  # noqa: E402
