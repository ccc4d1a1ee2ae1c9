"""Discretized trajectories and the finite-difference control metric.

A trajectory is an (N, M) waypoint matrix at a fixed timestep, optionally
carrying a short buffer of preceding configurations so velocity, acceleration
and jerk stay well-defined across re-planning boundaries.

The control metric R = K^T K measures summed squared accelerations, where K
stacks [1, -2, 1] / dt^2 second-difference stencils slid over the waypoints
with zero padding outside. Two variants differ in how the trailing boundary
is handled:

* ``fixed_goal``: stencils cover both boundaries (K is (N+2) x N), so both
  endpoints are treated as pinned. Interior rows of R are proportional to
  [1, -4, 6, -4, 1] and both corner entries to 6.
* ``goal_set``: the stencils that would reach past the final waypoint are
  dropped (K is N x N, lower triangular), freeing the end configuration.
  The bottom-right corner of R drops to 1 and sampled perturbations get
  nonzero variance at the final waypoint.

Sampling, projection and smoothing operate on the *free* waypoints: the
first waypoint is always pinned, the last one only in the fixed-goal
variant. Restricting K to the free columns is exactly the Gaussian
conditioning of N(0, R^{-1}) on zero perturbation at the pinned waypoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

FIXED_GOAL = "fixed_goal"
GOAL_SET = "goal_set"

MIN_WAYPOINTS = 5


def _read_only(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BoundaryState:
    """Initial velocity, acceleration and jerk (each an M-vector)."""

    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray

    def __post_init__(self):
        for name in ("velocity", "acceleration", "jerk"):
            v = _read_only(getattr(self, name))
            if not np.all(np.isfinite(v)):
                raise ValueError(f"boundary {name} must be finite")
            object.__setattr__(self, name, v)

    @classmethod
    def at_rest(cls, m: int) -> "BoundaryState":
        z = np.zeros(m)
        return cls(z, z.copy(), z.copy())

    def to_buffer(self, q0, dt: float) -> np.ndarray:
        """Three preceding configurations consistent with these derivatives.

        Inverse of :meth:`Trajectory.boundary_state`: backward differences
        over the returned rows reproduce velocity/acceleration/jerk exactly.
        """
        q0 = np.asarray(q0, dtype=np.float64)
        b1 = q0 - self.velocity * dt
        b2 = self.acceleration * dt**2 - q0 + 2.0 * b1
        b3 = q0 - 3.0 * b1 + 3.0 * b2 - self.jerk * dt**3
        return np.stack([b3, b2, b1])


@dataclass(frozen=True)
class Trajectory:
    """Waypoints (N, M), timestep dt, optional preceding buffer (>= 3 rows)."""

    waypoints: np.ndarray
    dt: float
    buffer: np.ndarray | None = None

    def __post_init__(self):
        wp = np.atleast_2d(np.asarray(self.waypoints, dtype=np.float64))
        if wp.shape[0] < MIN_WAYPOINTS:
            raise ValueError(f"trajectory needs at least {MIN_WAYPOINTS} waypoints, got {wp.shape[0]}")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "waypoints", _read_only(wp))
        if self.buffer is not None:
            buf = np.atleast_2d(np.asarray(self.buffer, dtype=np.float64))
            if buf.shape[0] < 3:
                raise ValueError("buffer needs at least 3 preceding configurations")
            if buf.shape[1] != wp.shape[1]:
                raise ValueError("buffer dimension does not match waypoints")
            object.__setattr__(self, "buffer", _read_only(buf))

    @property
    def n(self) -> int:
        return self.waypoints.shape[0]

    @property
    def m(self) -> int:
        return self.waypoints.shape[1]

    @property
    def duration(self) -> float:
        return (self.n - 1) * self.dt

    def extended(self) -> np.ndarray:
        """Buffer rows (oldest first) followed by the waypoints."""
        if self.buffer is None:
            return self.waypoints
        return np.vstack([self.buffer, self.waypoints])

    def boundary_state(self) -> BoundaryState:
        """Backward-difference derivatives at the first waypoint.

        Zero (at rest) when no buffer is attached.
        """
        if self.buffer is None:
            return BoundaryState.at_rest(self.m)
        q0 = self.waypoints[0]
        b1, b2, b3 = self.buffer[-1], self.buffer[-2], self.buffer[-3]
        vel = (q0 - b1) / self.dt
        acc = (q0 - 2.0 * b1 + b2) / self.dt**2
        jerk = (q0 - 3.0 * b1 + 3.0 * b2 - b3) / self.dt**3
        return BoundaryState(vel, acc, jerk)

    def with_waypoints(self, waypoints) -> "Trajectory":
        return Trajectory(waypoints, self.dt, self.buffer)


def _difference_matrix(n: int, dt: float, variant: str) -> np.ndarray:
    """Stack of second-difference stencils over zero-padded waypoints."""
    last_center = n if variant == FIXED_GOAL else n - 2
    rows = []
    for center in range(-1, last_center + 1):
        row = np.zeros(n)
        for off, coef in ((-1, 1.0), (0, -2.0), (1, 1.0)):
            j = center + off
            if 0 <= j < n:
                row[j] = coef
        rows.append(row)
    return np.array(rows) / dt**2


class ControlMetric:
    """Banded derivative matrix K, its quadratic form R = K^T K, and caches.

    ``sigma`` is the standard deviation used when the metric doubles as the
    precision matrix of the trajectory sampler (covariance sigma^2 R_free^-1).
    """

    def __init__(self, n: int, m: int, dt: float, variant: str, sigma: float = 1.0):
        if variant not in (FIXED_GOAL, GOAL_SET):
            raise ValueError(f"unknown metric variant {variant!r}")
        if n < MIN_WAYPOINTS:
            raise ValueError(f"metric needs at least {MIN_WAYPOINTS} waypoints, got {n}")
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if sigma <= 0.0:
            raise ValueError("sigma must be positive")
        self.n = n
        self.m = m
        self.dt = dt
        self.variant = variant
        self.sigma = sigma
        self.K = _read_only(_difference_matrix(n, dt, variant))
        self.R = _read_only(self.K.T @ self.K)
        # waypoint 0 is always pinned; the last waypoint only for fixed goals
        self.free = slice(1, n - 1) if variant == FIXED_GOAL else slice(1, n)
        self.K_free = _read_only(self.K[:, self.free])
        self.R_free = _read_only(self.K_free.T @ self.K_free)

    @property
    def n_free(self) -> int:
        return self.R_free.shape[0]

    @cached_property
    def chol_free(self) -> np.ndarray:
        """Lower Cholesky factor of R_free."""
        return np.linalg.cholesky(self.R_free)

    @cached_property
    def rfree_inv(self) -> np.ndarray:
        identity = np.eye(self.n_free)
        inv = scipy.linalg.cho_solve((self.chol_free, True), identity)
        return 0.5 * (inv + inv.T)

    @cached_property
    def rfree_inv_last_col(self) -> np.ndarray:
        return self.rfree_inv[:, -1].copy()

    @property
    def endpoint_variance(self) -> float:
        """Unit-sigma marginal variance of the final waypoint's perturbation."""
        if self.variant == FIXED_GOAL:
            return 0.0
        return float(self.rfree_inv[-1, -1])

    def with_sigma(self, sigma: float) -> "ControlMetric":
        return make_control_metric(self.n, self.m, self.dt, self.variant, sigma)

    def embed_free(self, delta_free: np.ndarray) -> np.ndarray:
        """Lift a free-waypoint perturbation (n_free, M) to all N waypoints."""
        full = np.zeros((self.n, delta_free.shape[1]))
        full[self.free] = delta_free
        return full

    def check_trajectory(self, traj: Trajectory):
        if traj.n != self.n or traj.m != self.m:
            raise ValueError(
                f"trajectory is {traj.n}x{traj.m}, metric expects {self.n}x{self.m}"
            )


def make_control_metric(n: int, m: int, dt: float, variant: str, sigma: float = 1.0) -> ControlMetric:
    """Build the acceleration metric for N waypoints of an M-DoF model."""
    return ControlMetric(n, m, dt, variant, sigma)


def smoothness_quadratic(traj: Trajectory, metric: ControlMetric) -> float:
    """xi^T R xi summed over DoF: total squared acceleration under the metric."""
    metric.check_trajectory(traj)
    xi = traj.waypoints
    return float(np.sum(xi * (metric.R @ xi)))


def trajectory_distance(a: Trajectory, b: Trajectory, metric: ControlMetric) -> float:
    """R-norm of the waypoint difference; zero iff the waypoints coincide."""
    metric.check_trajectory(a)
    metric.check_trajectory(b)
    d = a.waypoints - b.waypoints
    return float(np.sqrt(max(np.sum(d * (metric.R @ d)), 0.0)))


def segment_demonstration(demo: Trajectory, advance: float, min_len: int = 20):
    """Suffix segments taken every ``advance`` seconds along a demonstration.

    Segment k starts at waypoint k * round(advance / dt) and runs to the end
    of the demo; segments shorter than ``min_len`` waypoints are discarded.
    Each segment carries the three preceding demo waypoints as its buffer
    (segment 0 inherits the demo's own buffer) and is paired with the
    boundary derivatives computed from that buffer.
    """
    if advance < demo.dt:
        raise ValueError("advance must be at least one timestep")
    step = int(round(advance / demo.dt))
    out = []
    for start in range(0, demo.n, step):
        if demo.n - start < max(min_len, MIN_WAYPOINTS):
            break
        if start == 0:
            seg = demo
        else:
            ext = demo.extended()
            offset = 0 if demo.buffer is None else demo.buffer.shape[0]
            i = offset + start
            buf = ext[max(i - 3, 0) : i]
            if buf.shape[0] < 3:  # demo had no buffer and starts near t=0
                buf = np.vstack([np.repeat(ext[:1], 3 - buf.shape[0], axis=0), buf])
            seg = Trajectory(demo.waypoints[start:], demo.dt, buffer=buf)
        out.append((seg, seg.boundary_state()))
    return out


def resample_uniform(traj: Trajectory, n_target: int) -> Trajectory:
    """Linear-in-time resampling to ``n_target`` uniformly spaced waypoints.

    Endpoints are preserved exactly; any buffer is dropped because its
    timestep no longer matches.
    """
    if n_target < 2:
        raise ValueError("n_target must be at least 2")
    if n_target == traj.n:
        return Trajectory(traj.waypoints, traj.dt)
    t_old = np.arange(traj.n) * traj.dt
    t_new = np.linspace(0.0, traj.duration, n_target)
    wp = np.empty((n_target, traj.m))
    for j in range(traj.m):
        wp[:, j] = np.interp(t_new, t_old, traj.waypoints[:, j])
    wp[0] = traj.waypoints[0]
    wp[-1] = traj.waypoints[-1]
    new_dt = traj.duration / (n_target - 1)
    return Trajectory(wp, new_dt)
