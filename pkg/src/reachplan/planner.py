"""Goal-set stochastic trajectory optimization and iterative re-planning.

The planner deforms an initial straight-line trajectory (seeded with a
Jacobian-IK goal configuration) by sampling rollouts from the goal-set
metric, projecting them to the joint limits and the goal set, scoring them
with the learned cost, and combining them through exponentiated-cost weights.
The combined update is smoothed through R^-1 and the best-cost trajectory
seen so far is kept, so the reported cost trace is non-increasing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .features import FeatureRanges, FeatureSetConfig, Scene, compute_feature_vector, obstacle_cost
from .ioc import WeightVector
from .kinematics import KinematicModel, frame_position, ik_seed
from .sampling import (
    GoalSet,
    project_goal_batch,
    project_to_joint_limits,
    sample_trajectories,
    sigma_for_hand_spread,
)
from .trajectory import GOAL_SET, MIN_WAYPOINTS, BoundaryState, Trajectory, make_control_metric

logger = logging.getLogger(__name__)


class PlanningError(RuntimeError):
    """Raised when planning cannot start or finish (e.g. IK seeding fails)."""


class FingerprintMismatchError(ValueError):
    """Weight labels do not match the feature set they are applied to."""


@dataclass(frozen=True)
class PlannerConfig:
    iterations: int = 100
    rollouts: int = 10
    sigma: float | None = None  # None: calibrated for sigma_hand_spread at the goal
    sigma_hand_spread: float = 0.05
    sigma_decay: float = 0.97  # geometric noise annealing per iteration
    w_obs: float = 1.0
    temperature: float = 10.0  # sharpness of the exponentiated-cost weighting
    seed: int = 0
    goal_epsilon: float = 1e-3
    eta: float = 0.01
    projection_max_iter: int = 500
    projection_regularization: float = 1e-8
    n_waypoints: int = 100
    dt: float = 0.01
    tick: float = 0.1  # re-planning period used by the experiment harness

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.rollouts < 2:
            raise ValueError("need at least 2 rollouts per iteration")
        if self.w_obs < 0.0:
            raise ValueError("w_obs must be non-negative")


@dataclass
class PlanResult:
    trajectory: Trajectory
    cost_trace: np.ndarray
    converged: bool
    goal_error: float
    skipped_iterations: int = 0


@dataclass
class ReplanResult:
    trajectory: Trajectory
    completed: bool
    plans: list = field(default_factory=list)


def trajectory_cost(
    traj: Trajectory,
    model: KinematicModel,
    scene: Scene,
    weights: WeightVector,
    w_obs: float,
    feature_config: FeatureSetConfig = FeatureSetConfig(),
    ranges: FeatureRanges | None = None,
    time_origin: float = 0.0,
) -> float:
    """w . Phi(xi) + w_obs * obstacle cost, with Phi normalized by ``ranges``."""
    labels = feature_config.labels(traj.m)
    if tuple(weights.labels) != tuple(labels):
        raise FingerprintMismatchError(
            "weight labels do not match the feature configuration"
        )
    phi = compute_feature_vector(traj, model, scene, feature_config, time_origin).values
    if ranges is not None:
        phi = ranges.apply(phi)
    cost = float(weights.w @ phi)
    if w_obs != 0.0:
        cost += w_obs * obstacle_cost(traj, model, scene)
    return cost


def _exponentiated_weights(costs: np.ndarray, temperature: float) -> np.ndarray:
    lo, hi = costs.min(), costs.max()
    if hi - lo <= 1e-12:
        return np.full(costs.shape[0], 1.0 / costs.shape[0])
    p = np.exp(-temperature * (costs - lo) / (hi - lo))
    return p / p.sum()


def goalset_stomp(
    model: KinematicModel,
    scene: Scene,
    q_start,
    boundary: BoundaryState,
    goal: GoalSet,
    weights: WeightVector,
    cfg: PlannerConfig,
    feature_config: FeatureSetConfig = FeatureSetConfig(),
    ranges: FeatureRanges | None = None,
    time_origin: float = 0.0,
) -> PlanResult:
    """Stochastic trajectory optimization toward a task-space goal point."""
    q_start = model.check_configuration(np.asarray(q_start, dtype=np.float64))
    if np.any(q_start < model.lower - 1e-9) or np.any(q_start > model.upper + 1e-9):
        raise PlanningError("start configuration violates joint limits")
    q_goal = ik_seed(model, q_start, goal.point, frame=goal.frame, tol=goal.epsilon)
    if q_goal is None:
        raise PlanningError("IK seeding failed: goal point appears unreachable")

    n = cfg.n_waypoints
    alphas = np.linspace(0.0, 1.0, n)[:, None]
    init_wp = (1.0 - alphas) * q_start + alphas * q_goal
    buffer = boundary.to_buffer(q_start, cfg.dt)
    current = Trajectory(init_wp, cfg.dt, buffer=buffer)

    metric = make_control_metric(n, model.m, cfg.dt, GOAL_SET)
    sigma = cfg.sigma
    if sigma is None:
        sigma = sigma_for_hand_spread(model, q_goal, metric, cfg.sigma_hand_spread, goal.frame)
    metric = metric.with_sigma(sigma)

    def cost_of(traj):
        return trajectory_cost(
            traj, model, scene, weights, cfg.w_obs, feature_config, ranges, time_origin
        )

    def project(trajs):
        trajs = [project_to_joint_limits(t, metric, model) for t in trajs]
        return project_goal_batch(
            trajs,
            metric,
            model,
            goal,
            eta=cfg.eta,
            max_iter=cfg.projection_max_iter,
            regularization=cfg.projection_regularization,
        )

    best = current
    best_cost = cost_of(current)
    current_cost = best_cost
    skipped = 0
    trace = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        seed = int(np.random.SeedSequence([cfg.seed, it]).generate_state(1)[0])
        batch = sample_trajectories(
            current, metric, cfg.rollouts, seed, sigma_scale=cfg.sigma_decay**it
        )
        rollouts = [r for r in project(batch.samples) if r is not None]
        if not rollouts:
            skipped += 1
            trace[it] = best_cost
            continue
        costs = np.array([cost_of(r) for r in rollouts])
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best, best_cost = rollouts[k], costs[k]
        p = _exponentiated_weights(costs, cfg.temperature)
        delta = np.zeros((metric.n_free, model.m))
        for w_s, r in zip(p, rollouts):
            delta += w_s * (r.waypoints[metric.free] - current.waypoints[metric.free])
        smooth = metric.rfree_inv @ delta
        peak = np.abs(smooth).max()
        if peak > 0.0:
            smooth *= np.abs(delta).max() / peak
        wp = current.waypoints.copy()
        wp[metric.free] += smooth
        candidate = project([current.with_waypoints(wp)])[0]
        c_cand = np.inf if candidate is None else cost_of(candidate)
        if c_cand < best_cost:
            best, best_cost = candidate, c_cand
        # descend when any move improves on the current solution, otherwise
        # keep following the weighted update so exploration continues
        if costs[k] < min(c_cand, current_cost):
            current, current_cost = rollouts[k], costs[k]
        elif candidate is not None:
            current, current_cost = candidate, c_cand
        trace[it] = best_cost

    goal_error = float(np.linalg.norm(frame_position(model, best.waypoints[-1], goal.frame) - goal.point))
    return PlanResult(
        trajectory=best,
        cost_trace=trace,
        converged=goal_error < goal.epsilon,
        goal_error=goal_error,
        skipped_iterations=skipped,
    )


def _history_boundary(history: np.ndarray, dt: float) -> BoundaryState:
    q0, b1, b2, b3 = history[-1], history[-2], history[-3], history[-4]
    return BoundaryState(
        (q0 - b1) / dt,
        (q0 - 2.0 * b1 + b2) / dt**2,
        (q0 - 3.0 * b1 + 3.0 * b2 - b3) / dt**3,
    )


def replan_loop(
    model: KinematicModel,
    scene: Scene,
    q_start,
    goal: GoalSet,
    weights: WeightVector,
    cfg: PlannerConfig,
    tick: float,
    horizon: float,
    boundary: BoundaryState | None = None,
    feature_config: FeatureSetConfig = FeatureSetConfig(),
    ranges: FeatureRanges | None = None,
) -> ReplanResult:
    """Plan-execute-replan against the passive agent frozen at each tick.

    At every tick the passive agent is fixed at its current-time
    configuration, the remaining horizon is re-planned from the currently
    executed configuration (with boundary derivatives from the executed
    history), and one tick of the plan is executed. ``tick >= horizon``
    degenerates to a single planning call. On a tick's planning failure the
    partial trajectory executed so far is returned with ``completed=False``.
    """
    q_start = model.check_configuration(np.asarray(q_start, dtype=np.float64))
    total_steps = int(round(horizon / cfg.dt))
    tick_steps = max(int(round(tick / cfg.dt)), 1)
    if total_steps + 1 < MIN_WAYPOINTS:
        raise ValueError("horizon too short for a trajectory")
    boundary = boundary if boundary is not None else BoundaryState.at_rest(model.m)
    init_buffer = boundary.to_buffer(q_start, cfg.dt)
    history = np.vstack([init_buffer, q_start[None, :]])
    plans = []
    tick_index = 0
    while history.shape[0] - 4 < total_steps:
        steps_done = history.shape[0] - 4
        t_now = steps_done * cfg.dt
        n_plan = max(total_steps - steps_done + 1, MIN_WAYPOINTS)
        frozen = scene.with_passive(scene.passive.frozen_at(t_now)) if scene.passive else scene
        tick_cfg = replace(cfg, n_waypoints=n_plan, seed=cfg.seed + 7919 * tick_index)
        try:
            result = goalset_stomp(
                model,
                frozen,
                history[-1],
                _history_boundary(history, cfg.dt),
                goal,
                weights,
                tick_cfg,
                feature_config,
                ranges,
                time_origin=t_now,
            )
        except PlanningError as exc:
            if history.shape[0] - 3 < MIN_WAYPOINTS:
                raise  # nothing useful executed yet
            logger.warning("re-planning tick %d failed: %s", tick_index, exc)
            return ReplanResult(
                Trajectory(history[3:], cfg.dt, buffer=init_buffer), completed=False, plans=plans
            )
        plans.append(result)
        n_exec = min(tick_steps, total_steps - steps_done)
        history = np.vstack([history, result.trajectory.waypoints[1 : n_exec + 1]])
        tick_index += 1
    return ReplanResult(
        Trajectory(history[3:], cfg.dt, buffer=init_buffer), completed=True, plans=plans
    )


def baseline_weights(
    kind: str, feature_config: FeatureSetConfig, m: int
) -> WeightVector:
    """Hand-tuned comparison weight vectors.

    ``baseline0`` (aggressive): configuration-space squared acceleration
    only. ``baseline1`` (conservative): squared acceleration plus the 16
    link distances, all with the same weight. Neither uses the postural
    terms.
    """
    labels = feature_config.labels(m)
    w = np.zeros(len(labels))
    acc = labels.index("smooth_config_acc_sq")
    w[acc] = 1.0
    if kind == "baseline1":
        for i, label in enumerate(labels):
            if label.startswith("dist_"):
                w[i] = 1.0
    elif kind != "baseline0":
        raise ValueError(f"unknown baseline kind {kind!r}")
    return WeightVector(w, labels)
