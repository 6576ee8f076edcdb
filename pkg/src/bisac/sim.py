"""Episode orchestration: tracking loop, planning policies, sweeps, and metrics.

One episode walks the slot loop: propagate the hidden target, run the filter
prediction, replan both UAVs against the predicted state, then measure and
correct.  Noise is drawn from per-slot, per-purpose substreams of one master
seed so different policies see identical disturbance realizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .ekf import EkfBelief, kalman_gain, measurement_update, time_update
from .errors import CalibrationDegenerate, InvalidConfig
from .model import (MotionNoise, TargetState, UavPose, build_transition_matrix,
                    check_separation, check_speed, propagate_target)
from .sensing import (Measurement, SensingParams, crb, generate_measurement,
                      measurement_jacobian, predicted_crb, true_delays)
from .trajopt import PlannerParams, ScaTrace, sca_step

POLICY_KINDS = ("proposed", "semi_dynamic", "static", "no_comm")

# Substream purposes; paired comparisons rely on these being slot-keyed only.
_INIT, _PROCESS, _MEAS, _CALIB = 0, 1, 2, 3

# Raw configuration schema with decided defaults.  Power-like quantities carry
# dB/dBm suffixes and are converted to linear units on resolution.  A
# gamma_c_db of exactly 0 means the communication constraint is disabled.
DEFAULT_RAW: dict = {
    "T": 15.0,
    "dt": 0.5,
    "e1": 25.0,
    "e2": 0.112,
    "beta0_db": -60.0,
    "sigma2_c_dbm": -110.0,
    "sigma2_r_dbm": -110.0,
    "p_t_dbm": 40.0,
    "n_t": 16,
    "n_r": 16,
    "sigma2_x": 1.0,
    "sigma2_y": 1.0,
    "sigma2_vx": 0.5,
    "sigma2_vy": 0.5,
    "a_tau": 1.2e-7,
    "g_mf": 10.0,
    "xi": 1.0,
    "target_init": [100.0, 100.0],
    "target_speed": 10.0,
    "target_heading_deg": 45.0,
    "q1_init": [140.0, 100.0],
    "q2_init": [120.0, 200.0],
    "height": 50.0,
    "d_min": 40.0,
    "v_max": 20.0,
    "alpha": 3.5,
    "kappa_nlos": 1.0,
    "psi": 9.33953764e-08,
    "eta": 1e-3,
    "k_max": 20,
    "gamma_c_db": 25.0,
    "m1_diag": [1.0, 1.0, 0.5, 0.5],
}

_PAIR_KEYS = {"target_init", "q1_init", "q2_init"}
_INT_KEYS = {"n_t", "n_r", "k_max"}


@dataclass(frozen=True)
class ScenarioConfig:
    """Resolved scenario parameters, all in linear units."""

    t_total: float
    dt: float
    e1: float
    e2: float
    beta0: float
    sigma2_c: float
    sigma2_r: float
    p_t: float
    n_t: int
    n_r: int
    sigma2_x: float
    sigma2_y: float
    sigma2_vx: float
    sigma2_vy: float
    a_tau: float
    g_mf: float
    xi: float
    target_init: tuple
    target_speed: float
    target_heading_deg: float
    q1_init: tuple
    q2_init: tuple
    height: float
    d_min: float
    v_max: float
    alpha: float
    kappa_nlos: float
    psi: float
    eta: float
    k_max: int
    gamma_c: float
    m1_diag: tuple
    raw: dict = field(compare=False, repr=False)

    @property
    def n_slots(self) -> int:
        return round(self.t_total / self.dt)

    def channel_params(self) -> ch.ChannelParams:
        return ch.ChannelParams(e1=self.e1, e2=self.e2, beta0=self.beta0,
                                kappa_nlos=self.kappa_nlos, alpha=self.alpha,
                                n_t=self.n_t, p_t=self.p_t, sigma2_c=self.sigma2_c)

    def sensing_params(self) -> SensingParams:
        return SensingParams(a_tau=self.a_tau, sigma2_r=self.sigma2_r, g_mf=self.g_mf,
                             n_t=self.n_t, n_r=self.n_r, p_t=self.p_t, xi=self.xi)

    def motion_noise(self) -> MotionNoise:
        return MotionNoise(self.sigma2_x, self.sigma2_y, self.sigma2_vx, self.sigma2_vy)

    def initial_target_state(self) -> TargetState:
        heading = math.radians(self.target_heading_deg)
        return TargetState(self.target_init[0], self.target_init[1],
                           self.target_speed * math.cos(heading),
                           self.target_speed * math.sin(heading))


def resolve_config(raw: dict) -> ScenarioConfig:
    """Overlay raw values on the defaults, validate, and convert units."""
    if not isinstance(raw, dict):
        raise InvalidConfig("configuration must be a JSON object")
    unknown = set(raw) - set(DEFAULT_RAW)
    if unknown:
        raise InvalidConfig(f"unknown configuration keys: {sorted(unknown)}")
    merged = {**DEFAULT_RAW, **raw}
    for key, value in merged.items():
        if key in _PAIR_KEYS:
            if (not isinstance(value, (list, tuple)) or len(value) != 2
                    or not all(isinstance(v, (int, float)) for v in value)):
                raise InvalidConfig(f"field '{key}' must be a pair of numbers")
        elif key == "m1_diag":
            if (not isinstance(value, (list, tuple)) or len(value) != 4
                    or not all(isinstance(v, (int, float)) for v in value)):
                raise InvalidConfig("field 'm1_diag' must be four numbers")
        elif key in _INT_KEYS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise InvalidConfig(f"field '{key}' must be an integer")
        else:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InvalidConfig(f"field '{key}' must be a number")
            if not math.isfinite(value):
                raise InvalidConfig(f"field '{key}' must be finite")

    n = merged["T"] / merged["dt"]
    if abs(n - round(n)) > 1e-9 or round(n) < 2:
        raise InvalidConfig("T must be an integer multiple of dt with at least 2 slots")
    gamma_db = merged["gamma_c_db"]
    cfg = ScenarioConfig(
        t_total=float(merged["T"]),
        dt=float(merged["dt"]),
        e1=float(merged["e1"]),
        e2=float(merged["e2"]),
        beta0=ch.from_db(merged["beta0_db"]),
        sigma2_c=ch.dbm_to_watts(merged["sigma2_c_dbm"]),
        sigma2_r=ch.dbm_to_watts(merged["sigma2_r_dbm"]),
        p_t=ch.dbm_to_watts(merged["p_t_dbm"]),
        n_t=merged["n_t"],
        n_r=merged["n_r"],
        sigma2_x=float(merged["sigma2_x"]),
        sigma2_y=float(merged["sigma2_y"]),
        sigma2_vx=float(merged["sigma2_vx"]),
        sigma2_vy=float(merged["sigma2_vy"]),
        a_tau=float(merged["a_tau"]),
        g_mf=float(merged["g_mf"]),
        xi=float(merged["xi"]),
        target_init=tuple(float(v) for v in merged["target_init"]),
        target_speed=float(merged["target_speed"]),
        target_heading_deg=float(merged["target_heading_deg"]),
        q1_init=tuple(float(v) for v in merged["q1_init"]),
        q2_init=tuple(float(v) for v in merged["q2_init"]),
        height=float(merged["height"]),
        d_min=float(merged["d_min"]),
        v_max=float(merged["v_max"]),
        alpha=float(merged["alpha"]),
        kappa_nlos=float(merged["kappa_nlos"]),
        psi=float(merged["psi"]),
        eta=float(merged["eta"]),
        k_max=merged["k_max"],
        gamma_c=0.0 if gamma_db == 0 else ch.from_db(gamma_db),
        m1_diag=tuple(float(v) for v in merged["m1_diag"]),
        raw=merged,
    )
    # Instantiating the parameter bundles runs their range validation.
    cfg.channel_params()
    cfg.sensing_params()
    cfg.motion_noise()
    if cfg.psi < 0 or cfg.eta <= 0 or cfg.k_max < 1:
        raise InvalidConfig("psi must be >= 0, eta > 0, k_max >= 1")
    if cfg.d_min < 0 or cfg.v_max <= 0 or cfg.height <= 0:
        raise InvalidConfig("d_min >= 0, v_max > 0, height > 0 required")
    return cfg


@dataclass(frozen=True)
class Policy:
    """Placement policy for an episode."""

    kind: str
    fixed_q2: tuple | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise InvalidConfig(f"unknown policy '{self.kind}'")
        if self.kind == "semi_dynamic" and self.fixed_q2 is None:
            raise InvalidConfig("semi_dynamic policy needs a fixed receiver location")

    def label(self) -> str:
        if self.kind == "semi_dynamic":
            return f"semi_dynamic@({self.fixed_q2[0]:g},{self.fixed_q2[1]:g})"
        return self.kind


@dataclass
class SlotLog:
    n: int
    true_state: TargetState
    belief: EkfBelief
    predicted: EkfBelief
    q1: UavPose
    q2: UavPose
    measurement: Measurement
    pred_crb: float
    crb_truth: float
    snr_db: float
    wc_snr_db: float
    epsilon: float
    sca_iterations: int
    converged: bool
    snr_enforced: bool
    snr_fallback: bool
    trace: ScaTrace


@dataclass
class EpisodeLog:
    config: ScenarioConfig
    policy: Policy
    seed: int
    slots: list
    summary: dict


def _substream(seed: int, purpose: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=(purpose, index)))


def _filter_update(pred: EkfBelief, meas: Measurement, meas_noise, q1: UavPose,
                   q2: UavPose, sensing: SensingParams, max_iters: int = 8) -> EkfBelief:
    """Measurement correction with relinearization.

    The delay noise is orders of magnitude below the prior position spread, so a
    single linearization at the predicted state leaves a quadratic residual far
    above the measurement noise floor.  Re-evaluating the Jacobian at the
    current iterate (with the standard first-order reference shift) drives the
    update to the nonlinear least-squares point; the first pass is exactly the
    plain gain/update pair.
    """
    x_pred = pred.x_hat.as_vector()
    belief = pred
    for _ in range(max_iters):
        e = measurement_jacobian(q1, q2, belief.x_hat)
        k = kalman_gain(pred.m, e, meas_noise)
        ref = true_delays(q1, q2, belief.x_hat, sensing).as_vector()
        ref = ref + e @ (x_pred - belief.x_hat.as_vector())
        updated = measurement_update(pred, k, meas, Measurement(ref[0], ref[1]), e)
        shift = float(np.linalg.norm(
            updated.x_hat.as_vector()[:2] - belief.x_hat.as_vector()[:2]))
        belief = updated
        if shift <= 1e-9:
            break
    return belief


def episode_summary(config: ScenarioConfig, policy: Policy, slots: list) -> dict:
    """Aggregate metrics recomputable from the slot logs alone."""
    sq_err = [(s.belief.x_hat.x - s.true_state.x) ** 2
              + (s.belief.x_hat.y - s.true_state.y) ** 2 for s in slots]
    d12 = [float(np.linalg.norm(s.q1.horizontal - s.q2.horizontal)) for s in slots]
    d1t = [float(np.linalg.norm(s.q1.horizontal - s.true_state.position)) for s in slots]
    gamma = 0.0 if policy.kind == "no_comm" else config.gamma_c
    gamma_db = ch.to_db(gamma) if gamma > 0 else -math.inf
    snr_ok = [s.snr_db >= gamma_db for s in slots]

    violations = 0
    prev_q1 = UavPose(config.q1_init[0], config.q1_init[1], config.height)
    q2_start = (policy.fixed_q2 if policy.kind == "semi_dynamic" else config.q2_init)
    prev_q2 = UavPose(q2_start[0], q2_start[1], config.height)
    for s in slots:
        if not check_speed(prev_q1, s.q1, config.v_max, config.dt):
            violations += 1
        if not check_speed(prev_q2, s.q2, config.v_max, config.dt):
            violations += 1
        if not check_separation(s.q1, s.q2, config.d_min):
            violations += 1
        if s.snr_enforced and gamma > 0:
            if s.wc_snr_db < gamma_db - 1e-9 * abs(gamma_db):
                violations += 1
        prev_q1, prev_q2 = s.q1, s.q2

    return {
        "rmse_pos": math.sqrt(sum(sq_err) / len(slots)),
        "mean_crb": sum(s.crb_truth for s in slots) / len(slots),
        "max_crb": max(s.crb_truth for s in slots),
        "mean_pred_crb": sum(s.pred_crb for s in slots) / len(slots),
        "snr_satisfaction_rate": sum(snr_ok) / len(slots),
        "mean_inter_uav_dist": sum(d12) / len(slots),
        "mean_q1_target_dist": sum(d1t) / len(slots),
        "constraint_violations": violations,
        "snr_infeasible_slots": sum(1 for s in slots if s.snr_fallback),
        "convergence_rate": sum(1 for s in slots if s.converged) / len(slots),
        "mean_sca_iterations": sum(s.sca_iterations for s in slots) / len(slots),
    }


def run_episode(config: ScenarioConfig, policy: Policy, seed: int) -> EpisodeLog:
    """Simulate one full episode under the given placement policy."""
    g = build_transition_matrix(config.dt)
    q_mat = config.motion_noise().covariance()
    sensing = config.sensing_params()
    channel = config.channel_params()
    noise = config.motion_noise()

    truth = config.initial_target_state()
    init_draw = _substream(seed, _INIT, 1).standard_normal(4) * np.sqrt(np.diag(q_mat))
    belief = EkfBelief(TargetState.from_vector(truth.as_vector() + init_draw),
                       np.diag(config.m1_diag))

    q1 = UavPose(config.q1_init[0], config.q1_init[1], config.height)
    if policy.kind == "semi_dynamic":
        q2 = UavPose(policy.fixed_q2[0], policy.fixed_q2[1], config.height)
    else:
        q2 = UavPose(config.q2_init[0], config.q2_init[1], config.height)

    gamma = 0.0 if policy.kind == "no_comm" else config.gamma_c
    planner = PlannerParams(
        sensing=sensing, channel=channel, psi=config.psi, gamma_c=gamma,
        v_max=config.v_max, dt=config.dt, d_min=config.d_min,
        eta=config.eta, k_max=config.k_max,
        q2_free=policy.kind in ("proposed", "no_comm"))

    slots = []
    for n in range(2, config.n_slots + 1):
        truth = propagate_target(truth, config.dt, noise, _substream(seed, _PROCESS, n))
        pred = time_update(belief, g, q_mat)
        ball = ch.error_radius(pred.m, config.psi)

        if policy.kind == "static":
            q1_new, q2_new = q1, q2
            trace = ScaTrace(converged=True, iterations=0)
        else:
            q1_new, q2_new, trace = sca_step(q1, q2, pred.x_hat, pred.m, planner)

        meas, meas_noise = generate_measurement(q1_new, q2_new, truth, sensing,
                                                _substream(seed, _MEAS, n))
        belief = _filter_update(pred, meas, meas_noise, q1_new, q2_new, sensing)

        h_hat = ch.predicted_channel(q1_new, pred.x_hat, channel)
        h_true = ch.channel_vector(q1_new, truth, channel)
        realized = ch.snr(h_true, ch.matched_beamformer(h_hat), channel)
        wc = ch.worst_case_snr(h_hat, ball, channel)
        slots.append(SlotLog(
            n=n,
            true_state=truth,
            belief=belief,
            predicted=pred,
            q1=q1_new,
            q2=q2_new,
            measurement=meas,
            pred_crb=predicted_crb(q1_new, q2_new, pred.x_hat, sensing).crb,
            crb_truth=crb(q1_new, q2_new, truth, sensing).crb,
            snr_db=ch.to_db(realized) if realized > 0 else -math.inf,
            wc_snr_db=ch.to_db(wc) if wc > 0 else -math.inf,
            epsilon=ball.epsilon,
            sca_iterations=trace.iterations,
            converged=trace.converged,
            snr_enforced=trace.snr_enforced,
            snr_fallback=trace.snr_fallback,
            trace=trace,
        ))
        q1, q2 = q1_new, q2_new

    return EpisodeLog(config=config, policy=policy, seed=seed, slots=slots,
                      summary=episode_summary(config, policy, slots))


def run_sweep(raw_config: dict, param: str, values, seeds, policy: Policy) -> list:
    """One episode per (value, seed), overriding a single raw configuration key."""
    if param not in DEFAULT_RAW:
        raise InvalidConfig(f"unknown sweep parameter '{param}'")
    episodes = []
    for value in values:
        cfg = resolve_config({**raw_config, param: value})
        for seed in seeds:
            episodes.append(run_episode(cfg, policy, seed))
    return episodes


def summarize(episodes: list) -> list:
    """Per-policy aggregate table recomputed from the raw slot logs."""
    if not episodes:
        raise InvalidConfig("cannot summarize an empty episode list")
    groups: dict = {}
    for ep in episodes:
        groups.setdefault(ep.policy.label(), []).append(ep)
    table = []
    for label, eps in sorted(groups.items()):
        sums = [episode_summary(ep.config, ep.policy, ep.slots) for ep in eps]
        n_slots = sum(len(ep.slots) for ep in eps)
        row = {
            "policy": label,
            "episodes": len(eps),
            "rmse_pos": math.sqrt(sum(s["rmse_pos"] ** 2 * len(ep.slots)
                                      for s, ep in zip(sums, eps)) / n_slots),
            "mean_crb": sum(s["mean_crb"] * len(ep.slots)
                            for s, ep in zip(sums, eps)) / n_slots,
            "max_crb": max(s["max_crb"] for s in sums),
            "snr_satisfaction_rate": sum(s["snr_satisfaction_rate"] * len(ep.slots)
                                         for s, ep in zip(sums, eps)) / n_slots,
            "mean_inter_uav_dist": sum(s["mean_inter_uav_dist"] * len(ep.slots)
                                       for s, ep in zip(sums, eps)) / n_slots,
            "mean_q1_target_dist": sum(s["mean_q1_target_dist"] * len(ep.slots)
                                       for s, ep in zip(sums, eps)) / n_slots,
            "constraint_violations": sum(s["constraint_violations"] for s in sums),
            "snr_infeasible_slots": sum(s["snr_infeasible_slots"] for s in sums),
            "convergence_rate": sum(s["convergence_rate"] * len(ep.slots)
                                    for s, ep in zip(sums, eps)) / n_slots,
        }
        table.append(row)
    return table


def calibrate_psi(config: ScenarioConfig, trials: int, coverage: float, seed: int) -> float:
    """Smallest scale factor covering the observed channel prediction errors.

    Runs communication-unconstrained episodes, pairs each slot's realized
    channel against its prediction, and returns the coverage quantile of
    ||h - h_hat|| / ||M_pred||_F so the resulting error ball holds with the
    requested empirical frequency.
    """
    if trials < 1000:
        raise InvalidConfig("calibration needs at least 1000 trials")
    if not 0.0 < coverage < 1.0:
        raise InvalidConfig("coverage must lie strictly between 0 and 1")
    channel = config.channel_params()
    policy = Policy("no_comm")
    per_episode = config.n_slots - 1
    n_episodes = -(-trials // per_episode)
    ratios = []
    for i in range(n_episodes):
        ep_seed = int(np.random.SeedSequence(entropy=seed,
                                             spawn_key=(_CALIB, i)).generate_state(1)[0])
        ep = run_episode(config, policy, ep_seed)
        for slot in ep.slots:
            h_hat = ch.predicted_channel(slot.q1, slot.predicted.x_hat, channel)
            h_true = ch.channel_vector(slot.q1, slot.true_state, channel)
            err = float(np.linalg.norm(h_true - h_hat))
            m_f = float(np.linalg.norm(slot.predicted.m, "fro"))
            if m_f == 0.0:
                if err > 0.0:
                    raise CalibrationDegenerate(
                        "zero predicted covariance with nonzero channel error")
                ratios.append(0.0)
            else:
                ratios.append(err / m_f)
            if len(ratios) >= trials:
                break
        if len(ratios) >= trials:
            break
    ratios.sort()
    k = math.ceil(coverage * len(ratios))
    return ratios[k - 1]
