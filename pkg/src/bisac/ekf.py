"""Extended Kalman filter over the CV target model with two delay measurements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalBreakdown
from .model import TargetState
from .sensing import Measurement, MeasurementNoise


@dataclass(frozen=True)
class EkfBelief:
    """State estimate with its 4x4 covariance."""

    x_hat: TargetState
    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def time_update(belief: EkfBelief, g: np.ndarray, q: np.ndarray) -> EkfBelief:
    """Prediction step: propagate the estimate ballistically and inflate covariance by Q."""
    x_pred = g @ belief.x_hat.as_vector()
    m_pred = _symmetrize(g @ belief.m @ g.T + q)
    return EkfBelief(TargetState.from_vector(x_pred), m_pred)


def kalman_gain(m_pred: np.ndarray, e: np.ndarray, noise: MeasurementNoise) -> np.ndarray:
    """Gain M E^T (R + E M E^T)^-1 for the linearized delay measurement."""
    innov_cov = noise.matrix() + e @ m_pred @ e.T
    try:
        sol = np.linalg.solve(innov_cov.T, (m_pred @ e.T).T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("innovation covariance is singular") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericalBreakdown("non-finite Kalman gain")
    return sol


def measurement_update(pred: EkfBelief, k: np.ndarray, y: Measurement,
                       predicted_meas: Measurement, e: np.ndarray) -> EkfBelief:
    """Correction step; covariance is re-symmetrized to suppress round-off drift."""
    innovation = y.as_vector() - predicted_meas.as_vector()
    x_new = pred.x_hat.as_vector() + k @ innovation
    m_new = _symmetrize((np.eye(4) - k @ e) @ pred.m)
    return EkfBelief(TargetState.from_vector(x_new), m_new)
