import logging

import numpy as np
import pytest

from conftest import random_trajectory
from reachplan import models
from reachplan.features import (
    BoxObstacle,
    FeatureSetConfig,
    PassiveAgent,
    Scene,
    SphereObstacle,
    compute_feature_vector,
    distance_kernel,
    exact_signed_distance,
    link_distance_features,
    normalize_features,
    obstacle_cost,
    posture_features,
    smoothness_features,
    trajectory_collision_free,
)
from reachplan.kinematics import multi_frame_positions
from reachplan.trajectory import FIXED_GOAL, Trajectory, make_control_metric


LINKS = ("wrist", "elbow", "shoulder", "pelvis")


@pytest.fixture
def pair_scene(arm3):
    passive = models.planar_arm((1.0, 1.0, 0.6), base=(0.8, 0.8, 0.0))
    return Scene(
        passive=PassiveAgent(passive, static_config=np.array([0.4, -0.3, 0.2])),
        rest_posture=np.zeros(3),
    )


def test_link_distance_far_passive_is_zero(arm3):
    passive = models.planar_arm((0.5, 0.5, 0.3), base=(10.0, 0.0, 0.0))
    scene = Scene(passive=PassiveAgent(passive, static_config=np.zeros(3)))
    traj = random_trajectory(np.random.default_rng(0), 10, 3, dt=0.1, scale=0.3)
    vals = link_distance_features(traj, arm3, scene)
    np.testing.assert_array_equal(vals, 0.0)


def test_link_distance_coincident_wrists_at_kernel_max(arm3):
    # passive shares the base: identical configurations, coincident links
    passive = models.planar_arm((1.0, 1.0, 0.6))
    n, dt = 10, 0.1
    q = np.tile(np.array([0.2, 0.1, -0.3]), (n, 1))
    traj = Trajectory(q, dt)
    scene = Scene(passive=PassiveAgent(passive, static_config=q[0]))
    cfg = FeatureSetConfig()
    vals = link_distance_features(traj, arm3, scene, config=cfg)
    idx = cfg.distance_pairs.index(("wrist", "wrist"))
    assert vals[idx] == pytest.approx(n * dt * distance_kernel(0.0, cfg.distance_dmax))


def test_link_distance_matches_naive_oracle(arm3, pair_scene):
    rng = np.random.default_rng(1)
    traj = random_trajectory(rng, 8, 3, dt=0.05, scale=0.4)
    cfg = FeatureSetConfig()
    vals = link_distance_features(traj, arm3, pair_scene, time_origin=0.0, config=cfg)
    passive = pair_scene.passive
    for k, (a, b) in enumerate(cfg.distance_pairs):
        total = 0.0
        for i in range(traj.n):
            pa = multi_frame_positions(arm3, traj.waypoints[i : i + 1], (a,))[0, 0]
            pb = multi_frame_positions(
                passive.model, passive.configs_at([i * traj.dt]), (b,)
            )[0, 0]
            total += distance_kernel(np.linalg.norm(pa - pb), cfg.distance_dmax) * traj.dt
        assert vals[k] == pytest.approx(total, rel=1e-12)


def test_link_distance_missing_passive_warns(arm3, caplog):
    traj = random_trajectory(np.random.default_rng(2), 8, 3, dt=0.1)
    with caplog.at_level(logging.WARNING):
        vals = link_distance_features(traj, arm3, Scene())
    np.testing.assert_array_equal(vals, 0.0)
    assert any("no passive agent" in r.message for r in caplog.records)


def test_smoothness_stationary_is_zero(arm3):
    q = np.tile(np.array([0.1, 0.2, 0.3]), (10, 1))
    traj = Trajectory(q, 0.1, buffer=np.tile(q[0], (3, 1)))
    np.testing.assert_array_equal(smoothness_features(traj, arm3), 0.0)


def test_smoothness_ramp(arm3):
    ramp = np.linspace(0.0, 0.5, 12)[:, None] * np.array([1.0, 0.5, -0.3])
    traj = Trajectory(ramp, 0.1)
    vals = smoothness_features(traj, arm3)
    length, vel, acc, jerk = vals[:4]
    assert length > 0.0 and vel > 0.0
    assert acc == pytest.approx(0.0, abs=1e-9)
    assert jerk == pytest.approx(0.0, abs=1e-9)


def test_smoothness_acc_matches_metric_interior(arm3):
    rng = np.random.default_rng(3)
    n, dt = 15, 0.05
    traj = random_trajectory(rng, n, 3, dt=dt, scale=0.2)
    met = make_control_metric(n, 3, dt, FIXED_GOAL)
    interior = met.K[2:-2]  # stencils fully inside the waypoints
    acc = interior @ traj.waypoints
    oracle = float(np.sum(acc * acc))
    got = smoothness_features(traj, arm3)[2]
    assert got == pytest.approx(oracle, rel=1e-9)


def test_posture_features(arm3):
    n, dt = 10, 0.1
    rest = np.array([0.1, -0.2, 0.3])
    traj = Trajectory(np.tile(rest, (n, 1)), dt)
    np.testing.assert_array_equal(posture_features(traj, rest), 0.0)
    q = np.tile(rest, (n, 1))
    q[:, 1] += 0.25
    vals = posture_features(Trajectory(q, dt), rest)
    assert vals[1] == pytest.approx(n * 0.25**2 * dt)
    assert vals[0] == 0.0 and vals[2] == 0.0
    shuffled = q.copy()
    np.random.default_rng(0).shuffle(shuffled)
    np.testing.assert_allclose(posture_features(Trajectory(shuffled, dt), rest), vals)


def test_obstacle_cost_far_scene_zero(arm3):
    scene = Scene(obstacles=[SphereObstacle(np.array([50.0, 0.0, 0.0]), 0.5)])
    traj = random_trajectory(np.random.default_rng(4), 8, 3, dt=0.1, scale=0.2)
    assert obstacle_cost(traj, arm3, scene) == 0.0


def test_obstacle_cost_sphere_in_box_analytic():
    # single body sphere of radius r held at depth d inside a large box:
    # per-waypoint penetration = d + r + clearance
    from reachplan.kinematics import CollisionSphere, Frame, JointSpec, KinematicModel

    r = 0.04
    model = KinematicModel(
        [JointSpec(name="j0", kind="hinge", axis=np.array([0.0, 0.0, 1.0]))],
        {"hand": Frame(0)},
        [CollisionSphere(0, np.array([0.5, 0.0, 0.0]), r)],
    )
    n, dt = 10, 0.1
    traj = Trajectory(np.zeros((n, 1)), dt)  # sphere center fixed at (0.5, 0, 0)
    box = BoxObstacle(np.array([0.5, 0.0, 0.0]), np.array([1.0, 1.0, 1.0]))
    scene = Scene(obstacles=[box], edt_resolution=0.05, clearance=0.03)
    d = 1.0  # depth of the center inside the box
    expected = n * (d + r + 0.03) * dt
    got = obstacle_cost(traj, model, scene)
    assert got == pytest.approx(expected, rel=0.06)  # grid resolution error


def test_edt_query_within_resolution_of_exact():
    obstacles = [
        SphereObstacle(np.array([0.3, 0.1, -0.2]), 0.25),
        BoxObstacle(np.array([-0.4, 0.3, 0.2]), np.array([0.2, 0.15, 0.3])),
    ]
    scene = Scene(obstacles=obstacles, edt_resolution=0.02, edt_margin=0.3)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-0.6, 0.6, (500, 3))
    approx = scene.edt.query(pts)
    exact = exact_signed_distance(obstacles, pts)
    inside = np.isfinite(approx)
    assert np.all(np.abs(approx[inside] - exact[inside]) <= 0.02)


def test_edt_outside_grid_is_free(caplog):
    scene = Scene(obstacles=[SphereObstacle(np.zeros(3), 0.2)], edt_margin=0.1)
    with caplog.at_level(logging.WARNING):
        vals = scene.edt.query(np.array([[5.0, 5.0, 5.0]]))
    assert vals[0] == np.inf
    assert any("outside the grid" in r.message for r in caplog.records)


def test_feature_vector_layout(arm3, pair_scene):
    traj = random_trajectory(np.random.default_rng(6), 8, 3, dt=0.1, scale=0.2)
    full = compute_feature_vector(traj, arm3, pair_scene)
    assert len(full.values) == 16 + 8 + 3
    assert full.names[0] == "dist_wrist_wrist"
    assert "smooth_config_acc_sq" in full.names
    assert full.names[-1] == "posture_q2"
    no_posture = compute_feature_vector(
        traj, arm3, pair_scene, FeatureSetConfig(posture=False)
    )
    assert len(no_posture.values) == 24
    assert all(not n.startswith("posture") for n in no_posture.names)
    again = compute_feature_vector(traj, arm3, pair_scene)
    assert np.array_equal(full.values, again.values)
    assert np.all(full.values >= 0.0) and np.all(np.isfinite(full.values))


def test_feature_additivity_over_pieces(arm3, pair_scene):
    # G-type features (distances, posture) add over concatenated pieces
    rng = np.random.default_rng(7)
    wp = rng.normal(0.0, 0.3, (16, 3))
    whole = Trajectory(wp, 0.1)
    first = Trajectory(wp[:8], 0.1)
    second = Trajectory(wp[8:], 0.1)
    cfg = FeatureSetConfig(smoothness=False)
    v_whole = compute_feature_vector(whole, arm3, pair_scene, cfg).values
    v_first = compute_feature_vector(first, arm3, pair_scene, cfg, time_origin=0.0).values
    v_second = compute_feature_vector(second, arm3, pair_scene, cfg, time_origin=0.8).values
    np.testing.assert_allclose(v_whole, v_first + v_second, rtol=1e-12)


def test_normalize_features():
    samples = [np.array([[2.0, 1.0], [4.0, 1.0]]), np.array([[3.0, 1.0]])]
    demos = np.array([[3.0, 5.0]])
    demo_norm, sample_norm, ranges = normalize_features(demos, samples)
    assert demo_norm[0, 0] == pytest.approx(0.5)
    assert ranges.constant[1]
    assert demo_norm[0, 1] == 0.0
    # monotone: ordering within a feature is preserved
    vals = np.array([s[:, 0] for s in sample_norm[0][None]])
    assert sample_norm[0][0, 0] < sample_norm[0][1, 0]
    with pytest.raises(ValueError):
        normalize_features(demos, [np.zeros((0, 2))])


def test_collision_checks(arm3):
    # static obstacle right on the arm
    scene = Scene(obstacles=[SphereObstacle(np.array([0.5, 0.0, 0.0]), 0.2)])
    q = np.zeros((8, 3))
    traj = Trajectory(q, 0.1)
    assert not trajectory_collision_free(traj, arm3, scene)
    clear = Scene(obstacles=[SphereObstacle(np.array([0.0, 5.0, 0.0]), 0.2)])
    assert trajectory_collision_free(traj, arm3, clear)
    # overlapping passive arm
    passive = models.planar_arm((1.0, 1.0, 0.6))
    hit = Scene(passive=PassiveAgent(passive, static_config=np.zeros(3)))
    assert not trajectory_collision_free(traj, arm3, hit)
    away = Scene(passive=PassiveAgent(passive, static_config=np.array([np.pi / 2, 0.0, 0.0])))
    assert trajectory_collision_free(traj, arm3, away)


def test_passive_agent_time_alignment():
    passive_model = models.planar_arm((0.5, 0.5))
    wp = np.linspace(0.0, 1.0, 11)[:, None] * np.array([1.0, -1.0])
    agent = PassiveAgent(passive_model, trajectory=Trajectory(wp, 0.1))
    np.testing.assert_array_equal(agent.configs_at([0.0])[0], wp[0])
    np.testing.assert_array_equal(agent.configs_at([0.52])[0], wp[5])  # nearest index
    np.testing.assert_array_equal(agent.configs_at([99.0])[0], wp[-1])  # clamped
    with pytest.raises(ValueError):
        PassiveAgent(passive_model)
