"""Agreement between the compiled kernels and the NumPy fallback."""

import numpy as np
import pytest

from reachplan import _pure, models
from reachplan.sampling import GoalSet
from reachplan.trajectory import GOAL_SET, make_control_metric

try:
    from reachplan import _native
except ImportError:
    _native = None

needs_native = pytest.mark.skipif(_native is None, reason="compiled extension not built")


def _packed(model):
    return model._kinds, model._axes, model._orot, model._otrans


@needs_native
def test_chain_transforms_agree(human):
    rng = np.random.default_rng(0)
    q = rng.uniform(-0.5, 0.5, (20, human.m))
    a = _native.chain_transforms(*_packed(human), q)
    b = _pure.chain_transforms(*_packed(human), q)
    np.testing.assert_allclose(a, b, atol=1e-12)


@needs_native
def test_frame_state_agrees(human):
    rng = np.random.default_rng(1)
    fr = human.frame("hand")
    for _ in range(20):
        q = rng.uniform(-0.5, 0.5, human.m)
        pa, ja = _native.frame_state(*_packed(human), q, fr.joint_index, fr.offset)
        pb, jb = _pure.frame_state(*_packed(human), q, fr.joint_index, fr.offset)
        np.testing.assert_allclose(pa, pb, atol=1e-12)
        np.testing.assert_allclose(ja, jb, atol=1e-12)


@needs_native
def test_project_goal_agrees(arm3):
    rng = np.random.default_rng(2)
    n = 12
    met = make_control_metric(n, 3, 0.05, GOAL_SET, sigma=0.3)
    goal = GoalSet(np.array([1.1, 0.9, 0.0]))
    fr = arm3.frame("hand")
    base = np.linspace(0.0, 1.0, n)[:, None] * np.array([0.5, 0.4, -0.2])
    wps_a = np.stack([base + rng.normal(0.0, 0.05, base.shape) * [0, 1, 1] for _ in range(6)])
    wps_a[:, 0] = base[0]
    wps_b = wps_a.copy()
    args = (
        *_packed(arm3),
        arm3.lower,
        arm3.upper,
        fr.joint_index,
        fr.offset,
    )
    tail = (met.rfree_inv_last_col, goal.point, 0.01, 1e-3, 800, 1e-8, True)
    done_a = _native.project_goal(*args, wps_a, *tail)
    done_b = _pure.project_goal(*args, wps_b, *tail)
    np.testing.assert_array_equal(done_a, done_b)
    np.testing.assert_allclose(wps_a, wps_b, atol=1e-8)


@needs_native
def test_dtw_agrees():
    rng = np.random.default_rng(3)
    for _ in range(10):
        cost = rng.uniform(0.0, 1.0, (15, 11))
        assert _native.dtw_accumulate(cost) == pytest.approx(
            _pure.dtw_accumulate(cost), rel=1e-12
        )
