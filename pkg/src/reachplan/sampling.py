"""Trajectory sampling around a nominal and projection back to constraints.

Samples are drawn from a multivariate Gaussian centered at the nominal
trajectory with covariance sigma^2 R_free^-1 (via the Cholesky factor of
R_free), then projected first to the joint limits and then to the task-space
goal set, both with respect to the metric R. The goal-set projection loop is
batched: each iteration does a single chain sweep over all still-active
samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _backend
from .kinematics import KinematicModel, fk_and_jacobian
from .trajectory import GOAL_SET, ControlMetric, Trajectory

LIMIT_TOL = 1e-9


@dataclass(frozen=True)
class GoalSet:
    """Task-space point the final configuration must place ``frame`` at."""

    point: np.ndarray
    frame: str = "hand"
    epsilon: float = 1e-3

    def __post_init__(self):
        p = np.array(self.point, dtype=np.float64)
        if p.shape != (3,):
            raise ValueError("goal point must be a 3-vector")
        p.flags.writeable = False
        object.__setattr__(self, "point", p)
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


@dataclass
class SampleBatch:
    samples: list[Trajectory]
    seed: int
    accepted: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.accepted is None:
            self.accepted = np.ones(len(self.samples), dtype=bool)


def sample_trajectories(
    nominal: Trajectory, metric: ControlMetric, count: int, seed: int, sigma_scale: float = 1.0
) -> SampleBatch:
    """Draw ``count`` perturbed trajectories around ``nominal``.

    Perturbations are zero at pinned waypoints and have per-DoF covariance
    (sigma * sigma_scale)^2 R_free^-1 on the free ones; identical seeds give
    bit-identical batches.
    """
    metric.check_trajectory(nominal)
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    nf = metric.n_free
    z = rng.standard_normal((count, nf, metric.m))
    # eps = sigma * L^-T z  has covariance sigma^2 (L L^T)^-1 = sigma^2 R_free^-1
    flat = z.transpose(1, 0, 2).reshape(nf, count * metric.m)
    eps = scipy.linalg.solve_triangular(metric.chol_free.T, flat, lower=False)
    eps = metric.sigma * sigma_scale * eps.reshape(nf, count, metric.m).transpose(1, 0, 2)
    samples = []
    for s in range(count):
        wp = nominal.waypoints.copy()
        wp[metric.free] += eps[s]
        samples.append(nominal.with_waypoints(wp))
    return SampleBatch(samples, seed)


def project_goal_batch(
    trajs: list,
    metric: ControlMetric,
    model: KinematicModel,
    goal: GoalSet,
    eta: float = 0.01,
    max_iter: int = 500,
    regularization: float = 1e-8,
    limit_aware: bool = True,
):
    """Project a batch of trajectories onto the goal set under the R metric.

    Each iteration applies an eta-scaled minimal-R-norm correction for the
    linearized constraint ||x(q_N) - x0||; C R^-1 C^T is regularized on its
    diagonal before inversion. With ``limit_aware`` the Jacobian columns of
    end-configuration joints sitting at a limit and being pushed outward are
    zeroed, so those joints do not contribute to the update. Returns a list
    with the projected trajectory per input, or None where the tolerance was
    not reached within ``max_iter`` iterations.
    """
    if metric.variant != GOAL_SET:
        raise ValueError("goal-set projection requires a goal_set metric")
    for t in trajs:
        metric.check_trajectory(t)
    if not trajs:
        return []
    fr = model.frame(goal.frame)
    wps = np.stack([t.waypoints for t in trajs])
    done = _backend.project_goal(
        model._kinds,
        model._axes,
        model._orot,
        model._otrans,
        model.lower,
        model.upper,
        fr.joint_index,
        fr.offset,
        wps,
        metric.rfree_inv_last_col,
        goal.point,
        float(eta),
        float(goal.epsilon),
        int(max_iter),
        float(regularization),
        bool(limit_aware),
    )
    return [
        traj.with_waypoints(wps[i]) if done[i] else None for i, traj in enumerate(trajs)
    ]


def project_to_goal_set(
    traj: Trajectory,
    metric: ControlMetric,
    model: KinematicModel,
    goal: GoalSet,
    eta: float = 0.01,
    max_iter: int = 500,
    regularization: float = 1e-8,
) -> Trajectory | None:
    """Project one trajectory onto the goal set (no joint-limit handling).

    Already-satisfied trajectories return unchanged after zero iterations;
    None signals non-convergence within ``max_iter``.
    """
    return project_goal_batch(
        [traj], metric, model, goal, eta, max_iter, regularization, limit_aware=False
    )[0]


def limit_aware_goal_projection(
    traj: Trajectory,
    metric: ControlMetric,
    model: KinematicModel,
    goal: GoalSet,
    eta: float = 0.01,
    max_iter: int = 500,
    regularization: float = 1e-8,
) -> Trajectory | None:
    """Goal-set projection that never drives the end configuration past a limit."""
    return project_goal_batch(
        [traj], metric, model, goal, eta, max_iter, regularization, limit_aware=True
    )[0]


def _box_qp(hess, lb, ub, tol=1e-10, max_pivots=300):
    """min 1/2 d^T H d subject to lb <= d <= ub, H symmetric positive definite.

    Primal active-set method started from the componentwise clamp of 0 into
    the box, so the objective never exceeds the clamp's. Active bounds are
    dropped one at a time on multiplier sign violations; KKT holds at exit.
    """
    n = hess.shape[0]
    x = np.clip(np.zeros(n), lb, ub)
    act = np.zeros(n, dtype=int)
    act[x == lb] = -1
    act[x == ub] = 1
    for _ in range(max_pivots):
        free = act == 0
        y = x.copy()
        if free.any():
            pinned = ~free
            rhs = -hess[np.ix_(free, pinned)] @ x[pinned] if pinned.any() else np.zeros(free.sum())
            y[free] = scipy.linalg.cho_solve(
                scipy.linalg.cho_factor(hess[np.ix_(free, free)]), rhs
            )
        p = y - x
        moving = free & (np.abs(p) > tol)
        alpha = 1.0
        blocker = -1
        if moving.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                bound = np.where(p > 0.0, ub, lb)
                steps = np.where(moving, (bound - x) / np.where(p == 0.0, 1.0, p), np.inf)
            i = int(np.argmin(steps))
            if steps[i] < 1.0:
                alpha = max(steps[i], 0.0)
                blocker = i
        x = np.clip(x + alpha * p, lb, ub)
        if blocker >= 0:
            act[blocker] = 1 if p[blocker] > 0.0 else -1
            continue
        g = hess @ x
        releasable = ((act == -1) & (g < -tol)) | ((act == 1) & (g > tol))
        releasable &= lb < ub
        if not releasable.any():
            return x
        act[int(np.argmax(np.abs(g) * releasable))] = 0
    return x


def project_to_joint_limits(
    traj: Trajectory, metric: ControlMetric, model: KinematicModel
) -> Trajectory:
    """Smallest R-norm correction that brings every waypoint inside the limits.

    Per DoF this is the bound-constrained quadratic program
    min d^T R_free d with lo - q <= d <= hi - q, solved independently for
    each joint that violates its limits. The solver starts from the
    componentwise clamp, so the correction never costs more than naive
    clamping; feasible trajectories are returned unchanged.
    """
    metric.check_trajectory(traj)
    wp = traj.waypoints
    lo, hi = model.lower, model.upper
    violated = np.where(
        (wp[metric.free] < lo - LIMIT_TOL).any(axis=0)
        | (wp[metric.free] > hi + LIMIT_TOL).any(axis=0)
    )[0]
    if violated.size == 0:
        return traj
    out = wp.copy()
    for j in violated:
        col = wp[metric.free, j]
        d = _box_qp(metric.R_free, lo[j] - col, hi[j] - col)
        out[metric.free, j] = np.clip(col + d, lo[j], hi[j])
    return traj.with_waypoints(out)


def sigma_for_hand_spread(
    model: KinematicModel,
    q_end,
    metric: ControlMetric,
    target_std: float = 0.05,
    frame: str = "hand",
) -> float:
    """Sampling sigma giving roughly ``target_std`` meters of end-frame spread.

    Uses the linearized map from end-configuration perturbations (variance
    sigma^2 * endpoint_variance per DoF) through the frame Jacobian:
    E||dx||^2 ~= sigma^2 * endpoint_variance * trace(J J^T).
    """
    if metric.variant != GOAL_SET:
        raise ValueError("hand-spread calibration applies to goal_set metrics")
    _, jac = fk_and_jacobian(model, np.asarray(q_end, dtype=np.float64), frame)
    scale = metric.endpoint_variance * float(np.sum(jac * jac))
    if scale <= 0.0:
        raise ValueError("degenerate Jacobian: cannot calibrate sigma")
    return float(target_std / np.sqrt(scale))
