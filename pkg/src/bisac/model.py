"""Target kinematics, UAV poses, and constant-velocity state-transition machinery.

The ground target follows a discrete constant-velocity model: position advances
by velocity times the slot duration, then position and velocity each pick up an
independent zero-mean Gaussian perturbation.  UAVs fly at fixed altitude, so all
planning happens on horizontal coordinates while ranges are slant distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig

# Absolute slack used by constraint checks to absorb solver round-off.
CONSTRAINT_SLACK = 1e-9


@dataclass(frozen=True)
class TargetState:
    """Planar position (m) and velocity (m/s) of the moving target."""

    x: float
    y: float
    vx: float
    vy: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy], dtype=float)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @staticmethod
    def from_vector(v) -> "TargetState":
        v = np.asarray(v, dtype=float)
        return TargetState(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


@dataclass(frozen=True)
class UavPose:
    """Horizontal UAV location (m) plus its fixed flight altitude (m)."""

    qx: float
    qy: float
    height: float

    def __post_init__(self):
        if not self.height > 0:
            raise InvalidConfig(f"UAV height must be positive, got {self.height}")

    @property
    def horizontal(self) -> np.ndarray:
        return np.array([self.qx, self.qy], dtype=float)

    def moved_to(self, q) -> "UavPose":
        """Same altitude, new horizontal location."""
        return UavPose(float(q[0]), float(q[1]), self.height)


@dataclass(frozen=True)
class MotionNoise:
    """Per-axis variances of the transition noise (m^2 and (m/s)^2)."""

    sigma2_x: float
    sigma2_y: float
    sigma2_vx: float
    sigma2_vy: float

    def __post_init__(self):
        for name in ("sigma2_x", "sigma2_y", "sigma2_vx", "sigma2_vy"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be nonnegative")

    def covariance(self) -> np.ndarray:
        return np.diag([self.sigma2_x, self.sigma2_y, self.sigma2_vx, self.sigma2_vy])


def build_transition_matrix(dt: float) -> np.ndarray:
    """4x4 constant-velocity transition matrix: identity with dt coupling position to velocity."""
    if not dt > 0:
        raise InvalidConfig(f"slot duration must be positive, got {dt}")
    g = np.eye(4)
    g[0, 2] = dt
    g[1, 3] = dt
    return g


def propagate_target(s: TargetState, dt: float, noise: MotionNoise,
                     rng: np.random.Generator) -> TargetState:
    """Advance the target one slot through the CV model with Gaussian transition noise."""
    if not dt > 0:
        raise InvalidConfig(f"slot duration must be positive, got {dt}")
    w = rng.standard_normal(4) * np.sqrt(
        [noise.sigma2_x, noise.sigma2_y, noise.sigma2_vx, noise.sigma2_vy])
    return TargetState(
        s.x + s.vx * dt + w[0],
        s.y + s.vy * dt + w[1],
        s.vx + w[2],
        s.vy + w[3],
    )


def slant_distance(p: UavPose, t: TargetState) -> float:
    """3D range from UAV to target; never less than the flight altitude."""
    dx = p.qx - t.x
    dy = p.qy - t.y
    return math.sqrt(dx * dx + dy * dy + p.height * p.height)


def elevation_angle_deg(p: UavPose, t: TargetState) -> float:
    """Departure/arrival angle from the vertical, in degrees: 0 directly overhead, ->90 far out."""
    d = slant_distance(p, t)
    return math.degrees(math.acos(min(1.0, p.height / d)))


def check_speed(prev: UavPose, nxt: UavPose, vmax: float, dt: float) -> bool:
    """True iff the horizontal displacement fits within one slot at max speed."""
    if not dt > 0:
        raise InvalidConfig(f"slot duration must be positive, got {dt}")
    step = float(np.linalg.norm(nxt.horizontal - prev.horizontal))
    return step <= vmax * dt + CONSTRAINT_SLACK


def check_separation(a: UavPose, b: UavPose, dmin: float) -> bool:
    """True iff the horizontal UAV separation respects the safety distance."""
    return float(np.linalg.norm(a.horizontal - b.horizontal)) >= dmin - CONSTRAINT_SLACK
