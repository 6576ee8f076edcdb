"""Air-to-ground probabilistic LoS channel and robust communication-SNR machinery.

The transmitter carries a vertical half-wavelength ULA, so the steering phase
depends only on the elevation-from-vertical angle.  Link gain mixes LoS and NLoS
power by the elevation-dependent LoS probability.  Planning works with a channel
predicted at the filter's prior state; the prediction error is bounded in norm
by a ball whose radius scales with the prior covariance, and robust feasibility
against that ball is available both in closed form (worst case under the matched
unit-power beamformer) and as an LMI feasibility check with a multiplier search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, InvalidCovariance, InvalidInput
from .model import TargetState, UavPose, elevation_angle_deg, slant_distance


def to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def from_db(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Propagation-environment and transmit-array parameters (linear units)."""

    e1: float            # LoS model offset (dimensionless, in degrees scale)
    e2: float            # LoS model slope per degree
    beta0: float         # power gain at 1 m reference distance (linear)
    kappa_nlos: float    # NLoS power attenuation factor, (0, 1]
    alpha: float         # path loss exponent
    n_t: int             # transmit antenna count
    p_t: float           # transmit power, W
    sigma2_c: float      # receiver noise power, W

    def __post_init__(self):
        if not self.beta0 > 0:
            raise InvalidConfig("beta0 must be positive")
        if not 0 < self.kappa_nlos <= 1:
            raise InvalidConfig("kappa_nlos must lie in (0, 1]")
        if not self.alpha > 0:
            raise InvalidConfig("alpha must be positive")
        if self.n_t < 1:
            raise InvalidConfig("n_t must be at least 1")
        if not self.p_t > 0:
            raise InvalidConfig("p_t must be positive")
        if not self.sigma2_c > 0:
            raise InvalidConfig("sigma2_c must be positive")


@dataclass(frozen=True)
class ErrorBall:
    """Norm bound on the channel prediction error."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidConfig("error ball radius must be nonnegative")


def los_probability(theta_deg: float, params: ChannelParams) -> float:
    """LoS probability 1 / (1 + e1 exp(-e2 (theta - e1))), strictly increasing in theta."""
    if not 0.0 <= theta_deg <= 90.0:
        raise InvalidInput(f"elevation angle must lie in [0, 90] degrees, got {theta_deg}")
    return 1.0 / (1.0 + params.e1 * math.exp(-params.e2 * (theta_deg - params.e1)))


def channel_gain(theta_deg: float, d: float, params: ChannelParams) -> float:
    """Linear link power gain: LoS/NLoS mixed reference gain times d^(-alpha)."""
    p_los = los_probability(theta_deg, params)
    beta_d = params.beta0 * (p_los + (1.0 - p_los) * params.kappa_nlos)
    return beta_d * d ** (-params.alpha)


def steering_vector(theta_deg: float, n_t: int) -> np.ndarray:
    """Unit-norm ULA steering vector; element k phase is pi*k*cos(theta)."""
    if not 0.0 <= theta_deg <= 90.0:
        raise InvalidInput(f"elevation angle must lie in [0, 90] degrees, got {theta_deg}")
    k = np.arange(n_t)
    phase = math.pi * math.cos(math.radians(theta_deg)) * k
    return np.exp(1j * phase) / math.sqrt(n_t)


def channel_vector(uav1: UavPose, target: TargetState, params: ChannelParams) -> np.ndarray:
    """Transmit channel vector; its squared norm equals the link power gain."""
    theta = elevation_angle_deg(uav1, target)
    d = slant_distance(uav1, target)
    return math.sqrt(channel_gain(theta, d, params)) * steering_vector(theta, params.n_t)


def predicted_channel(uav1: UavPose, predicted_target: TargetState,
                      params: ChannelParams) -> np.ndarray:
    """Channel vector evaluated at the filter's predicted target state."""
    return channel_vector(uav1, predicted_target, params)


def matched_beamformer(h: np.ndarray) -> np.ndarray:
    """Unit-power beamformer matched to h."""
    n = np.linalg.norm(h)
    if n == 0.0:
        raise InvalidInput("cannot match a zero channel")
    return h / n


def snr(h: np.ndarray, f: np.ndarray, params: ChannelParams) -> float:
    """Received SNR p_t |h^H f|^2 / sigma2_c for a unit-power beamformer f."""
    if np.linalg.norm(f) > 1.0 + 1e-9:
        raise InvalidInput("beamformer must have at most unit power")
    return params.p_t * abs(np.vdot(h, f)) ** 2 / params.sigma2_c


def snr_db(h: np.ndarray, f: np.ndarray, params: ChannelParams) -> float:
    return to_db(snr(h, f, params))


def error_radius(m_pred: np.ndarray, psi: float) -> ErrorBall:
    """Channel-error ball radius psi * ||M_pred||_F from the prior covariance."""
    m_pred = np.asarray(m_pred, dtype=float)
    if psi < 0:
        raise InvalidConfig("psi must be nonnegative")
    if not np.allclose(m_pred, m_pred.T, atol=1e-8 * (1.0 + np.abs(m_pred).max())):
        raise InvalidCovariance("predicted covariance must be symmetric")
    eigmin = float(np.linalg.eigvalsh(m_pred).min())
    if eigmin < -1e-8 * (1.0 + np.abs(m_pred).max()):
        raise InvalidCovariance(f"predicted covariance not PSD (min eigenvalue {eigmin})")
    return ErrorBall(psi * float(np.linalg.norm(m_pred, "fro")))


def worst_case_snr(h_hat: np.ndarray, ball: ErrorBall, params: ChannelParams) -> float:
    """Worst received SNR over the prediction-error ball under the matched beamformer.

    With f matched to the predicted channel, the adversarial error shrinks the
    effective amplitude to (||h_hat|| - epsilon), clipped at zero.
    """
    amp = max(float(np.linalg.norm(h_hat)) - ball.epsilon, 0.0)
    return params.p_t * amp * amp / params.sigma2_c


def _lmi_matrix(u: np.ndarray, eps_rel: float, gamma_rel: float, mu: float) -> np.ndarray:
    """Multiplier form of the robust-SNR implication as an (n_t+1) Hermitian block matrix.

    Built in channel-normalized units (the implication is invariant to scaling
    the channel, the ball, and the threshold together), so every block is O(1)
    and the eigenvalue test keeps full relative precision.
    """
    n_t = u.shape[0]
    m = np.zeros((n_t + 1, n_t + 1), dtype=complex)
    m[:n_t, :n_t] = mu * np.eye(n_t) + np.outer(u, u.conj())
    m[:n_t, n_t] = u
    m[n_t, :n_t] = u.conj()
    m[n_t, n_t] = 1.0 - mu * eps_rel ** 2 - gamma_rel
    return m


def robust_snr_lmi_feasible(h_hat: np.ndarray, ball: ErrorBall, gamma_c: float,
                            params: ChannelParams) -> bool:
    """Check the robust SNR constraint by searching the LMI multiplier.

    Feasible iff some mu >= 0 makes the block matrix PSD.  The smallest
    eigenvalue is concave in mu, so a golden-section search over a geometric
    bracket finds its maximum.
    """
    if not gamma_c > 0:
        raise InvalidInput("gamma_c must be positive")
    h_hat = np.asarray(h_hat, dtype=complex)
    h_norm = float(np.linalg.norm(h_hat))
    if h_norm == 0.0:
        return False  # a positive threshold is unreachable from a zero channel
    u = h_hat / h_norm
    eps_rel = ball.epsilon / h_norm
    gamma_rel = gamma_c * params.sigma2_c / (params.p_t * h_norm ** 2)

    def lam_min(mu):
        return float(np.linalg.eigvalsh(_lmi_matrix(u, eps_rel, gamma_rel, mu))[0])

    # The decision margin of a non-boundary instance scales with the normalized
    # threshold, so the PSD tolerance must track it (floored near roundoff).
    tol = 1e-12 * gamma_rel + 1e-15
    # Useful multipliers never exceed ~1/eps_rel; cap the bracket so the
    # eigenvalue solve keeps enough relative precision at the extremes.
    mu_cap = 1e5 * (1.0 + 1.0 / max(eps_rel, 1e-7))
    lo, hi = 0.0, 1.0
    best = lam_min(lo)
    if best >= -tol:
        return True
    while hi <= mu_cap:
        val = lam_min(hi)
        if val >= -tol:
            return True
        if val < best:
            break
        best = val
        hi *= 4.0
    hi = min(hi, mu_cap)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = lam_min(c), lam_min(d)
    for _ in range(200):
        if max(fc, fd) >= -tol:
            return True
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = lam_min(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = lam_min(d)
        if b - a <= 1e-14 * (1.0 + b):
            break
    return max(fc, fd) >= -tol
