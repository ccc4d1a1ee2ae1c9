import numpy as np
import pytest

from reachplan import models
from reachplan.kinematics import (
    Frame,
    JointSpec,
    KinematicModel,
    batch_fk_jacobian,
    clamp_to_limits,
    fk_and_jacobian,
    forward_kinematics,
    frame_position,
    ik_seed,
    jacobian,
    joint_transforms,
    multi_frame_positions,
)


def test_joint_spec_validation():
    with pytest.raises(ValueError):
        JointSpec(name="bad", kind="hinge", axis=np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        JointSpec(name="bad", kind="hinge", axis=np.array([0.0, 0.0, 1.0]), lower=1.0, upper=-1.0)
    with pytest.raises(ValueError):
        JointSpec(name="bad", kind="screw", axis=np.array([0.0, 0.0, 1.0]))


def test_fk_zero_config_composes_origins(human):
    pose = forward_kinematics(human, np.zeros(human.m), "shoulder")
    # chain of pure translations at zero config: sum of origin offsets
    expected = sum((j.origin_trans for j in human.joints[:10]), np.zeros(3))
    np.testing.assert_allclose(pose.position, expected, atol=1e-12)
    np.testing.assert_allclose(pose.quaternion, [1.0, 0.0, 0.0, 0.0], atol=1e-12)


def test_fk_two_link_hand_composed(arm2):
    # lengths (1, 1), angles (pi/2, 0): first link along +y, tip at (0, 2, 0)
    p = frame_position(arm2, np.array([np.pi / 2.0, 0.0]), "hand")
    np.testing.assert_allclose(p, [0.0, 2.0, 0.0], atol=1e-12)
    p = frame_position(arm2, np.array([np.pi / 2.0, -np.pi / 2.0]), "hand")
    np.testing.assert_allclose(p, [1.0, 1.0, 0.0], atol=1e-12)


def test_fk_at_joint_limits_is_finite(human):
    for q in (human.lower, human.upper):
        pose = forward_kinematics(human, q, "hand")
        assert np.all(np.isfinite(pose.position))


def test_fk_deterministic_bit_identical(human):
    rng = np.random.default_rng(3)
    q = rng.uniform(-0.4, 0.4, human.m)
    a = forward_kinematics(human, q, "hand")
    b = forward_kinematics(human, q, "hand")
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.quaternion, b.quaternion)


def test_fk_errors(human):
    with pytest.raises(KeyError):
        forward_kinematics(human, np.zeros(human.m), "toe")
    with pytest.raises(ValueError):
        forward_kinematics(human, np.zeros(human.m - 1), "hand")


@pytest.mark.parametrize("frame", ["hand", "elbow"])
def test_jacobian_matches_finite_differences(human, arm3, frame):
    rng = np.random.default_rng(11)
    h = 1e-6
    for model in (arm3, human):
        for _ in range(50):
            q = rng.uniform(model.lower.clip(-1.0), model.upper.clip(1.0))
            jac = jacobian(model, q, frame)
            for j in range(model.m):
                dq = np.zeros(model.m)
                dq[j] = h
                fd = (frame_position(model, q + dq, frame) - frame_position(model, q - dq, frame)) / (2 * h)
                np.testing.assert_allclose(jac[:, j], fd, atol=2e-5)


def test_jacobian_zero_column_axis_through_origin(arm3):
    # the wrist frame sits on joint 2's own origin and axis: zero column
    jac = jacobian(arm3, np.array([0.3, -0.4, 0.7]), "wrist")
    np.testing.assert_allclose(jac[:, 2], 0.0, atol=1e-12)


def test_prismatic_column_is_world_axis():
    g = models.prismatic_gantry()
    jac = jacobian(g, np.array([0.1, -0.2, 0.3]), "hand")
    np.testing.assert_allclose(jac, np.eye(3), atol=1e-12)


def test_batch_fk_jacobian_consistency(human):
    rng = np.random.default_rng(5)
    qs = rng.uniform(-0.3, 0.3, (7, human.m))
    p, jac = batch_fk_jacobian(human, qs, "hand")
    for i, q in enumerate(qs):
        pi, ji = fk_and_jacobian(human, q, "hand")
        np.testing.assert_allclose(p[i], pi, atol=1e-12)
        np.testing.assert_allclose(jac[i], ji, atol=1e-12)


def test_multi_frame_positions_matches_single(human):
    rng = np.random.default_rng(6)
    qs = rng.uniform(-0.3, 0.3, (4, human.m))
    frames = ("pelvis", "shoulder", "wrist", "hand")
    pos = multi_frame_positions(human, qs, frames)
    for k, f in enumerate(frames):
        for i in range(4):
            np.testing.assert_allclose(pos[i, k], frame_position(human, qs[i], f), atol=1e-12)


def test_clamp_to_limits(human):
    q = np.zeros(human.m)
    np.testing.assert_array_equal(clamp_to_limits(human, q), q)
    q2 = q.copy()
    q2[3] = human.upper[3] + 0.1
    out = clamp_to_limits(human, q2)
    assert out[3] == human.upper[3]
    np.testing.assert_array_equal(clamp_to_limits(human, out), out)


def test_ik_identity(arm3):
    q0 = np.array([0.2, 0.3, -0.1])
    x0 = frame_position(arm3, q0, "hand")
    np.testing.assert_array_equal(ik_seed(arm3, q0, x0), q0)


def test_ik_reachable_near_optimal(arm3):
    rng = np.random.default_rng(8)
    q0 = np.array([0.3, 0.5, -0.2])
    x0 = frame_position(arm3, q0, "hand") + np.array([-0.15, -0.1, 0.0])
    q = ik_seed(arm3, q0, x0)
    assert q is not None
    assert np.linalg.norm(frame_position(arm3, q, "hand") - x0) < 1e-3
    # random-restart oracle: best configuration-space distance among restarts
    best = np.inf
    for _ in range(100):
        qr = ik_seed(arm3, rng.uniform(-np.pi, np.pi, 3), x0)
        if qr is not None and np.linalg.norm(frame_position(arm3, qr, "hand") - x0) < 1e-3:
            best = min(best, np.linalg.norm(qr - q0))
    assert np.linalg.norm(q - q0) <= 1.05 * best + 1e-9


def test_ik_unreachable_returns_none(arm3):
    assert ik_seed(arm3, np.zeros(3), np.array([5.0, 0.0, 0.0])) is None


def test_ik_respects_limits(human):
    rng = np.random.default_rng(9)
    for _ in range(10):
        goal = np.array([rng.uniform(0.2, 0.5), rng.uniform(-0.4, 0.0), rng.uniform(0.9, 1.25)])
        q = ik_seed(human, np.zeros(human.m), goal)
        if q is None:
            continue
        assert np.all(q >= human.lower - 1e-12)
        assert np.all(q <= human.upper + 1e-12)


def test_joint_transforms_shape(human):
    tf = joint_transforms(human, np.zeros((3, human.m)))
    assert tf.shape == (3, human.m, 12)


def test_model_validation():
    joint = JointSpec(name="j", kind="hinge", axis=np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        KinematicModel([joint], {"hand": Frame(3)})
    with pytest.raises(ValueError):
        KinematicModel([], {})
