import numpy as np
import pytest

from reachplan import models


@pytest.fixture(scope="session")
def human():
    return models.load_reference_human()


@pytest.fixture
def arm2():
    return models.planar_arm((1.0, 1.0))


@pytest.fixture
def arm3():
    return models.planar_arm((1.0, 1.0, 0.6))


def zero_pad_acceleration_sum(waypoints, dt, variant):
    """Independent oracle for the metric identity.

    Slides the [1, -2, 1] / dt^2 stencil over the zero-padded waypoints and
    sums squared values; fixed_goal pads two zeros at both ends, goal_set
    only at the start (the stencils reaching past the free end are dropped).
    """
    waypoints = np.asarray(waypoints, dtype=np.float64)
    m = waypoints.shape[1]
    pad = np.zeros((2, m))
    if variant == "fixed_goal":
        ext = np.vstack([pad, waypoints, pad])
    else:
        ext = np.vstack([pad, waypoints])
    acc = (ext[:-2] - 2.0 * ext[1:-1] + ext[2:]) / dt**2
    return float(np.sum(acc * acc))


def random_trajectory(rng, n, m, dt=0.01, scale=1.0):
    from reachplan.trajectory import Trajectory

    return Trajectory(rng.normal(0.0, scale, (n, m)), dt)
