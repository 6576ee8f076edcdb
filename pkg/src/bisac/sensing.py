"""Bistatic delay measurements, Fisher information, and the position CRB.

Each leg (transmitter-target, target-receiver) contributes a one-way delay
d_m / c.  Delay noise variance grows with the fourth power of the slant range
and shrinks with transmit power and array sizes, so UAV placement directly
shapes the Fisher information about the target position.  The CRB here is the
trace of the inverse 2x2 position FIM, kept in closed form so its gradient with
respect to both UAV locations is available analytically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometrySingular, InvalidConfig, InvalidCovariance
from .model import TargetState, UavPose, slant_distance

SPEED_OF_LIGHT = 299792458.0

# FIM condition number beyond which the geometry is treated as singular rather
# than silently regularized.
FIM_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class SensingParams:
    """Matched-filter and link-budget constants for the delay measurements."""

    a_tau: float      # system timing constant
    sigma2_r: float   # receiver noise power, W
    g_mf: float       # matched-filtering gain
    n_t: int
    n_r: int
    p_t: float        # transmit power, W
    xi: float         # squared reflection-coefficient magnitude
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("a_tau", "sigma2_r", "g_mf", "n_t", "n_r", "p_t", "xi", "c"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")

    @property
    def noise_scale(self) -> float:
        """Coefficient k in sigma2_tau = k * d^4."""
        return (self.a_tau ** 2 * self.sigma2_r
                / (self.g_mf * self.p_t * self.n_t * self.n_r * self.xi))


@dataclass(frozen=True)
class Measurement:
    """Per-leg delay pair, seconds."""

    tau1: float
    tau2: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.tau1, self.tau2], dtype=float)


@dataclass(frozen=True)
class MeasurementNoise:
    """Diagonal delay-noise covariance, s^2 entries."""

    sigma2_tau1: float
    sigma2_tau2: float

    def __post_init__(self):
        if not (self.sigma2_tau1 > 0 and self.sigma2_tau2 > 0):
            raise InvalidCovariance("delay noise variances must be positive")

    def matrix(self) -> np.ndarray:
        return np.diag([self.sigma2_tau1, self.sigma2_tau2])


@dataclass(frozen=True)
class CrbReport:
    """Closed-form CRB with the underlying FIM entries and conditioning."""

    crb: float
    p_a: float
    p_b: float
    p_c: float
    fim_condition: float


def delay_noise_variance(uav: UavPose, target: TargetState, params: SensingParams) -> float:
    """Delay noise variance for one leg; scales as slant distance to the fourth power."""
    d2 = (uav.qx - target.x) ** 2 + (uav.qy - target.y) ** 2 + uav.height ** 2
    return params.noise_scale * d2 * d2


def true_delays(q1: UavPose, q2: UavPose, target: TargetState,
                params: SensingParams) -> Measurement:
    """Noise-free per-leg propagation delays d_m / c."""
    return Measurement(slant_distance(q1, target) / params.c,
                       slant_distance(q2, target) / params.c)


def generate_measurement(q1: UavPose, q2: UavPose, target: TargetState,
                         params: SensingParams,
                         rng: np.random.Generator) -> tuple[Measurement, MeasurementNoise]:
    """Draw a noisy delay pair and return it together with the covariance used."""
    clean = true_delays(q1, q2, target, params)
    noise = MeasurementNoise(delay_noise_variance(q1, target, params),
                             delay_noise_variance(q2, target, params))
    z = rng.standard_normal(2)
    return (Measurement(clean.tau1 + z[0] * np.sqrt(noise.sigma2_tau1),
                        clean.tau2 + z[1] * np.sqrt(noise.sigma2_tau2)),
            noise)


def measurement_jacobian(q1: UavPose, q2: UavPose, state: TargetState) -> np.ndarray:
    """2x4 Jacobian of the delay pair in the target state; velocity columns are zero."""
    e = np.zeros((2, 4))
    for row, uav in enumerate((q1, q2)):
        d = slant_distance(uav, state)
        e[row, 0] = (state.x - uav.qx) / (SPEED_OF_LIGHT * d)
        e[row, 1] = (state.y - uav.qy) / (SPEED_OF_LIGHT * d)
    return e


def fim(q1: UavPose, q2: UavPose, target: TargetState, noise: MeasurementNoise,
        params: SensingParams) -> np.ndarray:
    """Position FIM C^T R^-1 C from the position block of the Jacobian."""
    r = noise.matrix()
    if np.linalg.det(r) <= 0:
        raise InvalidCovariance("measurement covariance must be positive definite")
    c_block = measurement_jacobian(q1, q2, target)[:, :2]
    return c_block.T @ np.linalg.inv(r) @ c_block


def _fim_entries(q1: UavPose, q2: UavPose, target: TargetState,
                 params: SensingParams) -> tuple[float, float, float]:
    """Scalar-form FIM entries (P_a, P_b, P_c), one additive term per leg."""
    k = params.noise_scale
    p_a = p_b = p_c = 0.0
    for uav in (q1, q2):
        dx = target.x - uav.qx
        dy = target.y - uav.qy
        d2 = dx * dx + dy * dy + uav.height * uav.height
        # sigma2_tau = k d^4, so each term is (component^2) / (c^2 k d^6)
        w = 1.0 / (params.c ** 2 * k * d2 ** 3)
        p_a += dx * dx * w
        p_b += dy * dy * w
        p_c += dx * dy * w
    return p_a, p_b, p_c


def _condition_2x2(p_a: float, p_b: float, p_c: float) -> float:
    tr = p_a + p_b
    det = p_a * p_b - p_c * p_c
    disc = max(tr * tr - 4.0 * det, 0.0)
    lam_hi = (tr + np.sqrt(disc)) / 2.0
    lam_lo = (tr - np.sqrt(disc)) / 2.0
    if lam_lo <= 0.0:
        return np.inf
    return lam_hi / lam_lo


def crb(q1: UavPose, q2: UavPose, target: TargetState, params: SensingParams) -> CrbReport:
    """Closed-form position CRB (P_a + P_b) / (P_a P_b - P_c^2)."""
    p_a, p_b, p_c = _fim_entries(q1, q2, target, params)
    cond = _condition_2x2(p_a, p_b, p_c)
    if not cond < FIM_CONDITION_LIMIT:
        raise GeometrySingular(
            f"FIM condition {cond:.3e} exceeds {FIM_CONDITION_LIMIT:.0e}")
    value = (p_a + p_b) / (p_a * p_b - p_c * p_c)
    return CrbReport(crb=value, p_a=p_a, p_b=p_b, p_c=p_c, fim_condition=cond)


def predicted_crb(q1: UavPose, q2: UavPose, predicted_target: TargetState,
                  params: SensingParams) -> CrbReport:
    """Same closed form evaluated at the filter's predicted target state."""
    return crb(q1, q2, predicted_target, params)


def crb_gradient(q1: UavPose, q2: UavPose, predicted_target: TargetState,
                 params: SensingParams) -> np.ndarray:
    """Analytic gradient of the predicted CRB in (q1x, q1y, q2x, q2y).

    Chains through the FIM entries and the distance dependence of the delay
    noise; each leg's entries depend only on that leg's UAV location.
    """
    p_a, p_b, p_c = _fim_entries(q1, q2, predicted_target, params)
    cond = _condition_2x2(p_a, p_b, p_c)
    if not cond < FIM_CONDITION_LIMIT:
        raise GeometrySingular(
            f"FIM condition {cond:.3e} exceeds {FIM_CONDITION_LIMIT:.0e}")
    s = p_a + p_b
    det = p_a * p_b - p_c * p_c

    k = params.noise_scale
    grad = np.zeros(4)
    for leg, uav in enumerate((q1, q2)):
        dx = predicted_target.x - uav.qx
        dy = predicted_target.y - uav.qy
        d2 = dx * dx + dy * dy + uav.height ** 2
        w = 1.0 / (params.c ** 2 * k * d2 ** 3)
        # Derivatives of this leg's contribution w.r.t. its UAV coordinates;
        # moving the UAV negates dx/dy and rescales w through d^-6.
        da_dqx = w * dx * (6.0 * dx * dx / d2 - 2.0)
        da_dqy = 6.0 * w * dx * dx * dy / d2
        db_dqx = 6.0 * w * dy * dy * dx / d2
        db_dqy = w * dy * (6.0 * dy * dy / d2 - 2.0)
        dc_dqx = w * dy * (6.0 * dx * dx / d2 - 1.0)
        dc_dqy = w * dx * (6.0 * dy * dy / d2 - 1.0)
        for j, (da, db, dc) in enumerate(((da_dqx, db_dqx, dc_dqx),
                                          (da_dqy, db_dqy, dc_dqy))):
            ds = da + db
            ddet = da * p_b + p_a * db - 2.0 * p_c * dc
            grad[2 * leg + j] = (ds * det - s * ddet) / (det * det)
    return grad
