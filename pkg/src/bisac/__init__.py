"""Bistatic UAV ISAC simulator: EKF tracking with CRB-driven joint UAV placement."""

__version__ = "0.1.0"

from .errors import (BisacError, CalibrationDegenerate, ConfigError,
                     DegenerateLinearization, GeometrySingular, InvalidConfig,
                     InvalidCovariance, InvalidInput, NumericalBreakdown,
                     SnrInfeasible, SubproblemInfeasible)
from .model import MotionNoise, TargetState, UavPose
from .sim import Policy, ScenarioConfig, resolve_config, run_episode, run_sweep, summarize

__all__ = [
    "BisacError", "CalibrationDegenerate", "ConfigError", "DegenerateLinearization",
    "GeometrySingular", "InvalidConfig", "InvalidCovariance", "InvalidInput",
    "MotionNoise", "NumericalBreakdown", "Policy", "ScenarioConfig", "SnrInfeasible",
    "SubproblemInfeasible", "TargetState", "UavPose",
    "resolve_config", "run_episode", "run_sweep", "summarize",
]
