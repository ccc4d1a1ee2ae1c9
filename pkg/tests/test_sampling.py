import numpy as np
import pytest
from scipy.optimize import lsq_linear, minimize

from conftest import random_trajectory
from reachplan import models
from reachplan.kinematics import frame_position
from reachplan.sampling import (
    GoalSet,
    _box_qp,
    limit_aware_goal_projection,
    project_goal_batch,
    project_to_goal_set,
    project_to_joint_limits,
    sample_trajectories,
    sigma_for_hand_spread,
)
from reachplan.trajectory import FIXED_GOAL, GOAL_SET, Trajectory, make_control_metric, trajectory_distance


def straight_line(q0, q1, n, dt, buffer=None):
    alphas = np.linspace(0.0, 1.0, n)[:, None]
    return Trajectory((1.0 - alphas) * q0 + alphas * q1, dt, buffer=buffer)


def test_sampler_reproducible_bit_identical():
    met = make_control_metric(10, 2, 0.1, GOAL_SET, sigma=0.3)
    nominal = random_trajectory(np.random.default_rng(0), 10, 2, dt=0.1)
    a = sample_trajectories(nominal, met, 5, seed=42)
    b = sample_trajectories(nominal, met, 5, seed=42)
    for sa, sb in zip(a.samples, b.samples):
        assert np.array_equal(sa.waypoints, sb.waypoints)
    c = sample_trajectories(nominal, met, 5, seed=43)
    assert not np.array_equal(a.samples[0].waypoints, c.samples[0].waypoints)


def test_sampler_mean_and_covariance():
    n, count, sigma = 10, 100_000, 0.7
    met = make_control_metric(n, 1, 0.1, GOAL_SET, sigma=sigma)
    nominal = Trajectory(np.zeros((n, 1)), 0.1)
    batch = sample_trajectories(nominal, met, count, seed=5)
    eps = np.stack([s.waypoints[:, 0] for s in batch.samples])
    # unbiasedness: componentwise mean within 3 sigma_i / sqrt(count)
    std = np.sqrt(np.diag(sigma**2 * met.rfree_inv))
    assert np.all(np.abs(eps[:, 1:].mean(axis=0)) <= 3.0 * std / np.sqrt(count))
    emp = np.cov(eps[:, 1:].T)
    target = sigma**2 * met.rfree_inv
    rel = np.linalg.norm(emp - target) / np.linalg.norm(target)
    assert rel < 0.10


def test_endpoint_variance_by_variant():
    nominal = Trajectory(np.zeros((10, 1)), 0.1)
    fixed = make_control_metric(10, 1, 0.1, FIXED_GOAL, sigma=0.5)
    bf = sample_trajectories(nominal, fixed, 200, seed=1)
    ef = np.stack([s.waypoints[:, 0] for s in bf.samples])
    assert np.all(ef[:, 0] == 0.0)
    assert np.all(ef[:, -1] == 0.0)  # fixed goal: endpoint perturbation exactly 0
    free = make_control_metric(10, 1, 0.1, GOAL_SET, sigma=0.5)
    bg = sample_trajectories(nominal, free, 200, seed=1)
    eg = np.stack([s.waypoints[:, 0] for s in bg.samples])
    assert np.all(eg[:, 0] == 0.0)
    assert eg[:, -1].var() > 0.0


def test_goal_projection_early_exit(arm2):
    n = 10
    met = make_control_metric(n, 2, 0.1, GOAL_SET)
    q = np.array([0.3, 0.4])
    traj = straight_line(np.zeros(2), q, n, 0.1)
    goal = GoalSet(frame_position(arm2, q, "hand"))
    out = project_to_goal_set(traj, met, arm2, goal)
    assert np.array_equal(out.waypoints, traj.waypoints)


def constrained_minimum_distance(traj, met, model, goal):
    """SLSQP oracle: min ||xi - xi0||_R s.t. ||hand(q_N) - x0|| <= epsilon."""
    n, m = traj.n, traj.m
    x0_flat = traj.waypoints[1:].ravel()

    def unpack(z):
        wp = traj.waypoints.copy()
        wp[1:] = z.reshape(n - 1, m)
        return wp

    def objective(z):
        d = unpack(z) - traj.waypoints
        return float(np.sum(d * (met.R @ d)))

    def constraint(z):
        wp = unpack(z)
        return goal.epsilon - np.linalg.norm(frame_position(model, wp[-1], "hand") - goal.point)

    res = minimize(
        objective,
        x0_flat,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": constraint}],
        options={"maxiter": 300, "ftol": 1e-12},
    )
    assert res.success, res.message
    return trajectory_distance(traj.with_waypoints(unpack(res.x)), traj, met)


def test_goal_projection_matches_constrained_oracle(arm2):
    rng = np.random.default_rng(3)
    n = 10
    met = make_control_metric(n, 2, 0.1, GOAL_SET)
    for _ in range(5):
        q0 = rng.uniform(-0.5, 0.5, 2)
        q1 = rng.uniform(-0.5, 0.5, 2)
        traj = straight_line(q0, q1, n, 0.1)
        goal_point = frame_position(arm2, q1, "hand") + np.append(rng.uniform(-0.05, 0.05, 2), 0.0)
        goal = GoalSet(goal_point)
        out = project_to_goal_set(traj, met, arm2, goal)
        assert out is not None
        err = np.linalg.norm(frame_position(arm2, out.waypoints[-1], "hand") - goal.point)
        assert err < 1e-3
        # start stays pinned
        assert np.array_equal(out.waypoints[0], traj.waypoints[0])
        d_alg = trajectory_distance(out, traj, met)
        d_opt = constrained_minimum_distance(traj, met, arm2, goal)
        assert d_alg <= 1.05 * d_opt + 1e-9


def test_goal_projection_failure(arm2):
    n = 10
    met = make_control_metric(n, 2, 0.1, GOAL_SET)
    traj = straight_line(np.zeros(2), np.array([0.1, 0.1]), n, 0.1)
    out = project_to_goal_set(traj, met, arm2, GoalSet(np.array([5.0, 0.0, 0.0])), max_iter=50)
    assert out is None


def test_limit_projection_feasible_unchanged(arm2):
    met = make_control_metric(10, 2, 0.1, GOAL_SET)
    traj = straight_line(np.zeros(2), np.array([0.5, 0.5]), 10, 0.1)
    assert project_to_joint_limits(traj, met, arm2) is traj


def test_limit_projection_beats_naive_clamp():
    model = models.planar_arm((1.0, 1.0), limits=(-1.0, 1.0))
    n = 12
    met = make_control_metric(n, 2, 0.05, GOAL_SET)
    wp = np.zeros((n, 2))
    wp[:, 0] = np.linspace(0.0, 0.9, n)
    wp[6, 0] = 1.1  # one waypoint 0.1 rad above the limit
    traj = Trajectory(wp, 0.05)
    out = project_to_joint_limits(traj, met, model)
    assert np.all(out.waypoints[:, 0] <= 1.0 + 1e-12)
    assert np.all(out.waypoints[:, 0] >= -1.0 - 1e-12)
    clamp = traj.with_waypoints(np.clip(wp, model.lower, model.upper))
    d_qp = trajectory_distance(out, traj, met)
    d_clamp = trajectory_distance(clamp, traj, met)
    assert d_qp <= d_clamp + 1e-12
    # idempotent: output already feasible
    assert project_to_joint_limits(out, met, model) is out


def test_box_qp_matches_bvls_oracle():
    rng = np.random.default_rng(7)
    met = make_control_metric(20, 1, 0.05, GOAL_SET)
    for _ in range(20):
        col = rng.normal(0.0, 0.5, met.n_free)
        lb = -0.4 - col
        ub = 0.4 - col
        x = _box_qp(met.R_free, lb, ub)
        ref = lsq_linear(met.K_free, np.zeros(met.K_free.shape[0]), bounds=(lb, ub), method="bvls").x
        assert np.all(x >= lb - 1e-9) and np.all(x <= ub + 1e-9)
        fx = x @ met.R_free @ x
        fr = ref @ met.R_free @ ref
        assert fx <= fr * (1.0 + 1e-9) + 1e-12


def test_limit_aware_matches_plain_when_inactive(arm2):
    rng = np.random.default_rng(4)
    n = 10
    met = make_control_metric(n, 2, 0.1, GOAL_SET)
    q1 = np.array([0.4, 0.3])
    traj = straight_line(np.zeros(2), q1, n, 0.1)
    goal = GoalSet(frame_position(arm2, q1, "hand") + np.array([0.03, -0.02, 0.0]))
    a = project_to_goal_set(traj, met, arm2, goal)
    b = limit_aware_goal_projection(traj, met, arm2, goal)
    np.testing.assert_array_equal(a.waypoints, b.waypoints)


def test_limit_aware_pins_joint_and_converges():
    # joint 0 starts at its upper limit; the goal stays reachable by the
    # remaining joints alone
    model = models.planar_arm(
        (1.0, 1.0, 0.6), limits=[(-2.5, 0.0), (-2.5, 2.5), (-2.5, 2.5)]
    )
    n = 10
    met = make_control_metric(n, 3, 0.1, GOAL_SET)
    wp = straight_line(np.zeros(3), np.array([0.0, 0.2, 0.1]), n, 0.1).waypoints
    traj = Trajectory(wp, 0.1)
    hand = frame_position(model, wp[-1], "hand")
    goal = GoalSet(hand + np.array([-0.03, 0.04, 0.0]))
    out = limit_aware_goal_projection(traj, met, model, goal, max_iter=1500)
    assert out is not None
    assert np.all(out.waypoints[-1] <= model.upper + 1e-12)
    err = np.linalg.norm(frame_position(model, out.waypoints[-1], "hand") - goal.point)
    assert err < 1e-3


def test_project_goal_batch_matches_single(arm2):
    n = 10
    met = make_control_metric(n, 2, 0.1, GOAL_SET, sigma=0.4)
    q1 = np.array([0.6, -0.3])
    nominal = straight_line(np.zeros(2), q1, n, 0.1)
    goal = GoalSet(frame_position(arm2, q1, "hand"))
    batch = sample_trajectories(nominal, met, 6, seed=9)
    joint = project_goal_batch(batch.samples, met, arm2, goal)
    singles = [limit_aware_goal_projection(s, met, arm2, goal) for s in batch.samples]
    for a, b in zip(joint, singles):
        assert (a is None) == (b is None)
        if a is not None:
            np.testing.assert_array_equal(a.waypoints, b.waypoints)


def test_sigma_calibration_hits_target_spread(arm3):
    n = 30
    met = make_control_metric(n, 3, 0.02, GOAL_SET)
    q1 = np.array([0.5, 0.4, -0.2])
    nominal = straight_line(np.zeros(3), q1, n, 0.02)
    sigma = sigma_for_hand_spread(arm3, q1, met, target_std=0.05)
    met = met.with_sigma(sigma)
    batch = sample_trajectories(nominal, met, 3000, seed=2)
    ends = np.stack([frame_position(arm3, s.waypoints[-1], "hand") for s in batch.samples])
    spread = np.sqrt(np.sum(ends.var(axis=0)))
    assert 0.03 < spread < 0.08  # linearization keeps it near the 5 cm target


def test_goal_set_requires_goal_set_metric(arm2):
    met = make_control_metric(10, 2, 0.1, FIXED_GOAL)
    traj = straight_line(np.zeros(2), np.ones(2) * 0.1, 10, 0.1)
    with pytest.raises(ValueError):
        project_to_goal_set(traj, met, arm2, GoalSet(np.array([1.0, 0.5, 0.0])))
