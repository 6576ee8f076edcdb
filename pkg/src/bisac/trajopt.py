"""Per-slot joint UAV placement: SCA on the linearized CRB under convex constraints.

Each slot solves: minimize the first-order CRB surrogate over the two speed
balls, the linearized (inner-approximated) collision halfspace, and a robust
communication ball that keeps the transmitter within a feasibility radius of
the predicted target.  Subproblems are tiny (two or four variables) and are
solved with a log-barrier interior method, so no external solver is involved.
A candidate step is accepted only if the true predicted CRB decreases;
otherwise the step is halved toward the expansion point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, ErrorBall, channel_vector, error_radius, worst_case_snr
from .errors import DegenerateLinearization, SnrInfeasible, SubproblemInfeasible
from .model import TargetState, UavPose
from .sensing import SensingParams, crb_gradient, predicted_crb

# Normalized-objective duality-gap target for the barrier method.
BARRIER_GAP = 1e-8
# Grid pitch (m) and bisection width (m) for the SNR feasibility radius.
RADIUS_GRID = 1.0
RADIUS_REFINE = 1e-3


@dataclass(frozen=True)
class Surrogate:
    """Affine model of the predicted CRB around an expansion point."""

    base_value: float
    gradient: np.ndarray          # d(CRB)/d(q1x, q1y, q2x, q2y)
    expansion_q1: np.ndarray
    expansion_q2: np.ndarray

    def value(self, q1, q2) -> float:
        dq = np.concatenate([np.asarray(q1, float) - self.expansion_q1,
                             np.asarray(q2, float) - self.expansion_q2])
        return self.base_value + float(self.gradient @ dq)


@dataclass(frozen=True)
class SlotConstraints:
    """Feasible region of one placement subproblem."""

    q1_center: np.ndarray         # previous transmitter location
    q2_center: np.ndarray         # previous (or fixed) receiver location
    speed_radius: float           # V_max * dt
    collision_normal: np.ndarray  # a such that a.(q1 - q2) >= collision_offset
    collision_offset: float
    snr_center: np.ndarray        # predicted target, horizontal
    snr_radius: float             # may be inf
    q2_free: bool = True


@dataclass
class ScaTrace:
    """Objective/step history of one SCA run."""

    objectives: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    snr_enforced: bool = False
    snr_fallback: bool = False


@dataclass(frozen=True)
class PlannerParams:
    """Everything the per-slot planner needs besides the filter prediction."""

    sensing: SensingParams
    channel: ChannelParams
    psi: float
    gamma_c: float                # linear SNR threshold; 0 disables the constraint
    v_max: float
    dt: float
    d_min: float
    eta: float = 1e-3             # relative SCA stopping threshold
    k_max: int = 20
    q2_free: bool = True


def linearize_crb(q1_k: UavPose, q2_k: UavPose, predicted_target: TargetState,
                  params: SensingParams) -> Surrogate:
    """First-order model of the predicted CRB at the current iterate."""
    report = predicted_crb(q1_k, q2_k, predicted_target, params)
    grad = crb_gradient(q1_k, q2_k, predicted_target, params)
    return Surrogate(report.crb, grad, q1_k.horizontal, q2_k.horizontal)


def linearize_collision(q1_k: UavPose, q2_k: UavPose, dmin: float) -> tuple[np.ndarray, float]:
    """Linear inner approximation of the separation constraint.

    Returns (a, b) with a.(q1 - q2) >= b; any point satisfying it also satisfies
    ||q1 - q2|| >= dmin because the squared norm dominates its linearization.
    """
    diff = q1_k.horizontal - q2_k.horizontal
    if float(np.linalg.norm(diff)) <= 1e-6:
        raise DegenerateLinearization("collision linearization at coincident UAV locations")
    return 2.0 * diff, dmin ** 2 + float(diff @ diff)


def _channel_norm_pose(center: np.ndarray, r: float, height: float) -> UavPose:
    """Synthetic transmitter pose at horizontal distance r from the ball center."""
    return UavPose(float(center[0]) + r, float(center[1]), height)


def snr_feasible_radius(predicted_target: TargetState, ball: ErrorBall, gamma_c: float,
                        params: ChannelParams, height: float) -> float:
    """Largest transmitter-to-target radius certified by the worst-case SNR.

    The channel depends on the horizontal offset only through its magnitude, so
    feasibility is a 1-D scan: a 1 m grid from directly overhead, refined by
    bisection to millimeter precision over the first feasible run.
    """
    if gamma_c < 0:
        raise SnrInfeasible("gamma_c must be nonnegative")
    if gamma_c == 0.0:
        return math.inf
    target = TargetState(predicted_target.x, predicted_target.y, 0.0, 0.0)
    center = predicted_target.position

    def feasible(r: float) -> bool:
        h = channel_vector(_channel_norm_pose(center, r, height), target, params)
        return worst_case_snr(h, ball, params) >= gamma_c

    if not feasible(0.0):
        raise SnrInfeasible(
            "robust SNR threshold unreachable even directly above the predicted target")
    # Beyond this slant range even a pure-LoS link misses the threshold.
    d_bound = (params.beta0 * params.p_t / (gamma_c * params.sigma2_c)) ** (1.0 / params.alpha)
    if d_bound <= height:
        return 0.0
    r_bound = math.sqrt(d_bound * d_bound - height * height)
    lo = 0.0
    hi = None
    r = RADIUS_GRID
    while r <= r_bound + RADIUS_GRID:
        if feasible(r):
            lo = r
        else:
            hi = r
            break
        r += RADIUS_GRID
    if hi is None:
        hi = lo + RADIUS_GRID
    while hi - lo > RADIUS_REFINE:
        mid = (lo + hi) / 2.0
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


class _Subproblem:
    """Constraint bookkeeping for the barrier solver over z = (q1[, q2]).

    The problem is tiny (two or four variables, at most four constraints), so
    the inner loops use scalar arithmetic; numpy only solves the Newton system.
    """

    def __init__(self, surrogate: Surrogate, con: SlotConstraints):
        self.con = con
        self.dim = 4 if con.q2_free else 2
        g = np.asarray(surrogate.gradient, dtype=float)
        self.gradient = g[: self.dim].copy()
        # Balls as (block offset, cx, cy, radius).
        self.balls = [(0, float(con.q1_center[0]), float(con.q1_center[1]),
                       float(con.speed_radius))]
        if con.q2_free:
            self.balls.append((2, float(con.q2_center[0]), float(con.q2_center[1]),
                               float(con.speed_radius)))
        if np.isfinite(con.snr_radius):
            self.balls.append((0, float(con.snr_center[0]), float(con.snr_center[1]),
                               float(con.snr_radius)))
        a = np.asarray(con.collision_normal, float)
        if con.q2_free:
            self.lin_a = np.concatenate([a, -a])
            self.lin_b = float(con.collision_offset)
        else:
            self.lin_a = a.copy()
            self.lin_b = float(con.collision_offset
                               + a @ np.asarray(con.q2_center, float))

    def constraint_values(self, z) -> np.ndarray:
        """f_i(z) <= 0 form; positive entries are violations."""
        vals = [(z[i] - cx) ** 2 + (z[i + 1] - cy) ** 2 - r * r
                for i, cx, cy, r in self.balls]
        vals.append(self.lin_b - float(self.lin_a @ z))
        return np.array(vals)

    def start_point(self) -> np.ndarray:
        z = np.asarray(self.con.q1_center, float).copy()
        if self.con.q2_free:
            z = np.concatenate([z, np.asarray(self.con.q2_center, float)])
        return z

    def find_interior(self, z0: np.ndarray, max_iter: int = 2000) -> np.ndarray:
        """Alternating projections onto slightly shrunk sets; None if they stall.

        Termination is tolerance-based: a point sitting on a shrunk boundary
        re-projects by rounding-sized amounts forever, so satisfaction is
        checked against small positive slacks that still leave a strict margin
        inside the true sets.
        """
        z = z0.copy()
        shrunk = [(i, cx, cy, r * (1.0 - 1e-7) - 1e-7) for i, cx, cy, r in self.balls]
        a_norm2 = float(self.lin_a @ self.lin_a)
        b_pad = self.lin_b + 1e-7 * (1.0 + abs(self.lin_b))
        for _ in range(max_iter):
            for i, cx, cy, r in shrunk:
                if r <= 0:
                    return None
                dx, dy = z[i] - cx, z[i + 1] - cy
                dist = math.hypot(dx, dy)
                if dist > r:
                    z[i] = cx + dx * (r / dist)
                    z[i + 1] = cy + dy * (r / dist)
            gap = b_pad - float(self.lin_a @ z)
            if gap > 0:
                z = z + gap * self.lin_a / a_norm2
            done = True
            for i, cx, cy, r in shrunk:
                f = (z[i] - cx) ** 2 + (z[i + 1] - cy) ** 2 - r * r
                if f > 1e-9 * (1.0 + r * r):
                    done = False
                    break
            if done and b_pad - float(self.lin_a @ z) > 1e-9 * (1.0 + abs(b_pad)):
                done = False
            if done:
                return z
        return None

    def solve(self) -> np.ndarray:
        """Log-barrier interior method; requires a strictly feasible start to exist."""
        z = self.start_point()
        if float(np.max(self.constraint_values(z))) >= 0.0:
            z = self.find_interior(z)
            if z is None:
                raise SubproblemInfeasible("placement constraint set has empty interior")
        g_norm = float(np.linalg.norm(self.gradient))
        g_hat = self.gradient / g_norm if g_norm > 0 else np.zeros(self.dim)
        m = len(self.balls) + 1
        t = 1.0
        while True:
            z = self._center(z, g_hat, t)
            if m / t <= BARRIER_GAP:
                return z
            t *= 10.0

    def _barrier_value(self, z, g_hat, t) -> float:
        total = t * float(g_hat @ z)
        for i, cx, cy, r in self.balls:
            f = (z[i] - cx) ** 2 + (z[i + 1] - cy) ** 2 - r * r
            if f >= 0.0:
                return math.inf
            total -= math.log(-f)
        f = self.lin_b - float(self.lin_a @ z)
        if f >= 0.0:
            return math.inf
        return total - math.log(-f)

    def _max_step(self, z, p) -> float:
        """Largest alpha keeping z + alpha p strictly inside every constraint."""
        alpha = math.inf
        for i, cx, cy, r in self.balls:
            dx, dy = z[i] - cx, z[i + 1] - cy
            px, py = p[i], p[i + 1]
            a2 = px * px + py * py
            if a2 == 0.0:
                continue
            a1 = 2.0 * (dx * px + dy * py)
            a0 = dx * dx + dy * dy - r * r
            disc = a1 * a1 - 4.0 * a2 * a0
            if disc <= 0.0:
                continue
            root = (-a1 + math.sqrt(disc)) / (2.0 * a2)
            if root > 0.0:
                alpha = min(alpha, root)
        slope = -float(self.lin_a @ p)
        if slope > 0.0:
            gap = float(self.lin_a @ z) - self.lin_b
            alpha = min(alpha, gap / slope)
        return alpha

    def _center(self, z: np.ndarray, g_hat: np.ndarray, t: float,
                max_newton: int = 50) -> np.ndarray:
        dim = self.dim
        for _ in range(max_newton):
            grad = t * g_hat.copy()
            hess = np.zeros((dim, dim))
            for i, cx, cy, r in self.balls:
                dx, dy = z[i] - cx, z[i + 1] - cy
                f = dx * dx + dy * dy - r * r
                inv = 1.0 / (-f)
                gx, gy = 2.0 * dx, 2.0 * dy
                grad[i] += gx * inv
                grad[i + 1] += gy * inv
                hess[i, i] += 2.0 * inv + gx * gx * inv * inv
                hess[i + 1, i + 1] += 2.0 * inv + gy * gy * inv * inv
                hess[i, i + 1] += gx * gy * inv * inv
                hess[i + 1, i] += gx * gy * inv * inv
            f_lin = self.lin_b - float(self.lin_a @ z)
            grad += self.lin_a / f_lin  # gradient of -log(a.z - b)
            hess += np.outer(self.lin_a, self.lin_a) / (f_lin * f_lin)
            step = np.linalg.solve(hess, -grad)
            decrement = float(-grad @ step)
            if decrement / 2.0 <= 1e-11:
                break
            base = self._barrier_value(z, g_hat, t)
            alpha = min(1.0, 0.99 * self._max_step(z, step))
            ok = False
            for _ in range(40):
                cand = z + alpha * step
                if self._barrier_value(cand, g_hat, t) <= base - 0.25 * alpha * decrement:
                    z = cand
                    ok = True
                    break
                alpha *= 0.5
            if not ok:
                break
        return z


def _expansion_feasible(sub: _Subproblem, z: np.ndarray, slack: float = 1e-9) -> bool:
    return bool(np.max(sub.constraint_values(z)) <= slack)


def solve_subproblem(surrogate: Surrogate, constraints: SlotConstraints
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Minimize the affine surrogate over the slot's constraint set."""
    sub = _Subproblem(surrogate, constraints)
    expansion = np.concatenate([surrogate.expansion_q1, surrogate.expansion_q2])[: sub.dim]
    radius_scale = max(constraints.speed_radius,
                       constraints.snr_radius if np.isfinite(constraints.snr_radius) else 0.0)
    # Zero (or negligible) gradient: every feasible point ties, keep the current one.
    if (float(np.linalg.norm(sub.gradient)) * radius_scale
            <= 1e-12 * max(abs(surrogate.base_value), 1e-300)
            and _expansion_feasible(sub, expansion)):
        z = expansion
    else:
        z = sub.solve()
    q1 = z[0:2]
    q2 = z[2:4] if constraints.q2_free else np.asarray(constraints.q2_center, float)
    return q1, q2


def _forced_approach_radius(prev_q1: UavPose, target_xy: np.ndarray,
                            v_max: float, dt: float) -> float:
    """Ball radius that forces the transmitter to close most of the gap this slot."""
    dist = float(np.linalg.norm(prev_q1.horizontal - target_xy))
    return max(dist - 0.9 * v_max * dt, 1.0)


def sca_step(prev_q1: UavPose, prev_q2: UavPose, predicted_target: TargetState,
             m_pred: np.ndarray, planner: PlannerParams
             ) -> tuple[UavPose, UavPose, ScaTrace]:
    """One slot of successive convex approximation for both UAV locations.

    Starts from the previous poses, repeatedly linearizes the predicted CRB and
    solves the convex placement subproblem until the relative improvement drops
    below eta or the iteration cap is hit.  A candidate is accepted only if the
    true predicted CRB decreases; otherwise the step is halved toward the
    expansion point a few times before terminating.
    """
    trace = ScaTrace()
    ball = error_radius(m_pred, planner.psi)
    target_xy = predicted_target.position

    snr_radius = math.inf
    if planner.gamma_c > 0.0:
        trace.snr_enforced = True
        try:
            snr_radius = snr_feasible_radius(predicted_target, ball, planner.gamma_c,
                                             planner.channel, prev_q1.height)
        except SnrInfeasible:
            trace.snr_enforced = False
            trace.snr_fallback = True
            snr_radius = _forced_approach_radius(prev_q1, target_xy, planner.v_max, planner.dt)

    q1_k, q2_k = prev_q1, prev_q2
    f_k = None  # objective at the last accepted feasible iterate
    for _ in range(planner.k_max):
        trace.iterations += 1
        surrogate = linearize_crb(q1_k, q2_k, predicted_target, planner.sensing)
        a, b = linearize_collision(q1_k, q2_k, planner.d_min)
        con = SlotConstraints(
            q1_center=prev_q1.horizontal, q2_center=prev_q2.horizontal,
            speed_radius=planner.v_max * planner.dt,
            collision_normal=a, collision_offset=b,
            snr_center=target_xy, snr_radius=snr_radius,
            q2_free=planner.q2_free)
        sub = _Subproblem(surrogate, con)
        expansion_feasible = _expansion_feasible(
            sub, np.concatenate([q1_k.horizontal, q2_k.horizontal])[: sub.dim])
        try:
            q1_new, q2_new = solve_subproblem(surrogate, con)
        except SubproblemInfeasible:
            if np.isfinite(snr_radius) and not trace.snr_fallback:
                # Robust ball out of reach this slot: close the gap instead.
                trace.snr_enforced = False
                trace.snr_fallback = True
                snr_radius = _forced_approach_radius(prev_q1, target_xy,
                                                     planner.v_max, planner.dt)
                con = SlotConstraints(
                    q1_center=prev_q1.horizontal, q2_center=prev_q2.horizontal,
                    speed_radius=planner.v_max * planner.dt,
                    collision_normal=a, collision_offset=b,
                    snr_center=target_xy, snr_radius=snr_radius,
                    q2_free=planner.q2_free)
                sub = _Subproblem(surrogate, con)
                expansion_feasible = _expansion_feasible(
                    sub, np.concatenate([q1_k.horizontal, q2_k.horizontal])[: sub.dim])
                try:
                    q1_new, q2_new = solve_subproblem(surrogate, con)
                except SubproblemInfeasible:
                    break
            else:
                break

        cand_q1 = q1_k.moved_to(q1_new)
        cand_q2 = q2_k.moved_to(q2_new)
        f_cand = predicted_crb(cand_q1, cand_q2, predicted_target, planner.sensing).crb

        exhausted = False
        if f_k is None and not expansion_feasible:
            # First feasible iterate; nothing comparable to measure decrease against.
            accepted_q1, accepted_q2, f_acc = cand_q1, cand_q2, f_cand
        else:
            f_ref = surrogate.base_value if f_k is None else f_k
            if f_cand <= f_ref:
                accepted_q1, accepted_q2, f_acc = cand_q1, cand_q2, f_cand
            else:
                # Overshoot of the affine model: damp the step toward the
                # expansion point until the true objective improves.
                accepted_q1, accepted_q2, f_acc = q1_k, q2_k, f_ref
                exhausted = True
                z_k = np.concatenate([q1_k.horizontal, q2_k.horizontal])[: sub.dim]
                z_new = np.concatenate([q1_new, q2_new])[: sub.dim]
                for _ in range(8):
                    z_new = (z_k + z_new) / 2.0
                    if np.max(sub.constraint_values(z_new)) > 1e-9:
                        continue
                    h_q1 = q1_k.moved_to(z_new[0:2])
                    h_q2 = q2_k.moved_to(z_new[2:4]) if planner.q2_free else q2_k
                    f_half = predicted_crb(h_q1, h_q2, predicted_target,
                                           planner.sensing).crb
                    if f_half < f_ref:
                        accepted_q1, accepted_q2, f_acc = h_q1, h_q2, f_half
                        exhausted = False
                        break

        trace.objectives.append(f_acc)
        trace.step_norms.append(float(np.linalg.norm(
            np.concatenate([accepted_q1.horizontal - q1_k.horizontal,
                            accepted_q2.horizontal - q2_k.horizontal]))))
        improved_from = f_k if f_k is not None else (
            surrogate.base_value if expansion_feasible else None)
        q1_k, q2_k = accepted_q1, accepted_q2
        f_k = f_acc
        if exhausted:
            # No damped step improves: the iterate is stationary to within the
            # model's resolution, so the relative-change rule is met trivially.
            trace.converged = True
            break
        if improved_from is not None:
            if improved_from - f_acc <= planner.eta * max(abs(improved_from), 1e-300):
                trace.converged = True
                break
    return q1_k, q2_k, trace
