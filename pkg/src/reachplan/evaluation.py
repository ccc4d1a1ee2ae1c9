"""Prediction-quality metrics: DTW alignment costs and spectral arc length.

Two configuration metrics are supported: the sum of Euclidean distances
between the five joint centers (pelvis, torso, shoulder, elbow, wrist), and
a task-space metric combining hand position distance with the angle between
orientation quaternions,

    d(T1, T2) = ||p1 - p2|| + 0.1 * arccos(|<v1, v2>|).

DTW uses the classic unit-step pattern {(1,0), (0,1), (1,1)} with matched
endpoints and reports the unnormalized alignment cost; the warping path
length is available so a normalized convention can be recovered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .kinematics import KinematicModel, Pose, forward_kinematics, multi_frame_positions
from .trajectory import Trajectory

JOINT_CENTER_NAMES = ("pelvis", "torso", "shoulder", "elbow", "wrist")
JOINT_CENTERS = "joint_centers"
TASK_SPACE = "task_space"

_QUAT_TOL = 1e-6


@dataclass(frozen=True)
class MetricKind:
    """Which configuration metric to use and its parameters."""

    kind: str = TASK_SPACE
    joint_names: tuple = JOINT_CENTER_NAMES
    quaternion_weight: float = 0.1
    frame: str = "hand"

    def __post_init__(self):
        if self.kind not in (JOINT_CENTERS, TASK_SPACE):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.quaternion_weight <= 0.0:
            raise ValueError("quaternion weight must be positive")


@dataclass(frozen=True)
class SpeedProfile:
    """Speed samples (m/s) at a uniform timestep."""

    samples: np.ndarray
    dt: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("speed profile must be one-dimensional")
        if np.any(s < 0.0):
            raise ValueError("speeds must be non-negative")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "samples", s)


def pose_distance(a: Pose, b: Pose, quaternion_weight: float = 0.1) -> float:
    """Position distance plus weighted quaternion angle (sign-flip invariant)."""
    for pose in (a, b):
        if abs(np.linalg.norm(pose.quaternion) - 1.0) > _QUAT_TOL:
            raise ValueError("quaternions must be normalized")
    dot = abs(float(np.dot(a.quaternion, b.quaternion)))
    angle = float(np.arccos(np.clip(dot, -1.0, 1.0)))
    return float(np.linalg.norm(a.position - b.position)) + quaternion_weight * angle


def config_distance(q1, q2, model: KinematicModel, metric: MetricKind) -> float:
    """Distance between two configurations under the chosen metric."""
    if metric.kind == JOINT_CENTERS:
        pos = multi_frame_positions(model, np.vstack([q1, q2]), metric.joint_names)
        return float(np.sum(np.linalg.norm(pos[0] - pos[1], axis=1)))
    pa = forward_kinematics(model, q1, metric.frame)
    pb = forward_kinematics(model, q2, metric.frame)
    return pose_distance(pa, pb, metric.quaternion_weight)


def dtw_matrix(cost: np.ndarray) -> float:
    """Accumulated DTW cost of a precomputed pairwise distance matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        raise ValueError("empty cost matrix")
    return float(_backend.dtw_accumulate(cost))


def dtw_path_length(cost: np.ndarray) -> int:
    """Number of matched index pairs on an optimal warping path."""
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
    i, j, steps = n, m, 1
    while i > 1 or j > 1:
        moves = [(acc[i - 1, j - 1], i - 1, j - 1), (acc[i - 1, j], i - 1, j), (acc[i, j - 1], i, j - 1)]
        _, i, j = min(moves, key=lambda t: t[0])
        steps += 1
    return steps


def dtw_sequences(x, y, dist) -> float:
    """DTW between two generic sequences under a pointwise distance function."""
    x, y = list(x), list(y)
    if not x or not y:
        raise ValueError("sequences must be non-empty")
    cost = np.array([[dist(a, b) for b in y] for a in x], dtype=np.float64)
    return dtw_matrix(cost)


def _pairwise_config_costs(a: Trajectory, b: Trajectory, model, metric: MetricKind) -> np.ndarray:
    if metric.kind == JOINT_CENTERS:
        pa = multi_frame_positions(model, a.waypoints, metric.joint_names)
        pb = multi_frame_positions(model, b.waypoints, metric.joint_names)
        diff = pa[:, None, :, :] - pb[None, :, :, :]
        return np.linalg.norm(diff, axis=-1).sum(axis=-1)
    pa = [forward_kinematics(model, q, metric.frame) for q in a.waypoints]
    pb = [forward_kinematics(model, q, metric.frame) for q in b.waypoints]
    cost = np.empty((a.n, b.n))
    for i, pi in enumerate(pa):
        for j, pj in enumerate(pb):
            cost[i, j] = pose_distance(pi, pj, metric.quaternion_weight)
    return cost


def dtw(a: Trajectory, b: Trajectory, model: KinematicModel, metric: MetricKind) -> float:
    """DTW alignment cost between two trajectories of the same model."""
    if a.m != model.m or b.m != model.m:
        raise ValueError("trajectories do not match the model dimension")
    return dtw_matrix(_pairwise_config_costs(a, b, model, metric))


def speed_profile(traj: Trajectory, model: KinematicModel, metric: MetricKind) -> SpeedProfile:
    """Movement speed profile of the kinematic quantity the metric tracks.

    Task-space: hand-frame speed. Joint centers: sum of the five joint-center
    speeds.
    """
    if metric.kind == TASK_SPACE:
        pos = multi_frame_positions(model, traj.waypoints, (metric.frame,))[:, 0]
        speeds = np.linalg.norm(np.diff(pos, axis=0), axis=1) / traj.dt
    else:
        pos = multi_frame_positions(model, traj.waypoints, metric.joint_names)
        speeds = np.linalg.norm(np.diff(pos, axis=0), axis=2).sum(axis=1) / traj.dt
    return SpeedProfile(speeds, traj.dt)


def spectral_arc_length(profile: SpeedProfile, cutoff_hz: float = 20.0, padding: int = 1000) -> float:
    """Smoothness score from the speed profile's Fourier magnitude spectrum.

    The profile is zero-padded to at least ``padding`` samples, the magnitude
    spectrum is normalized by its DC value, and the negated arc length of the
    normalized spectrum curve up to ``cutoff_hz`` is returned. Smoother
    motion concentrates spectral mass at low frequency, so its score is
    closer to the single-peak bound of -1; added ripples push the score more
    negative. Invariant to uniform amplitude scaling.
    """
    v = profile.samples
    if v.shape[0] < 4:
        raise ValueError("speed profile needs at least 4 samples")
    if not np.any(v > 0.0):
        raise ValueError("speed profile is identically zero")
    nfft = max(int(padding), v.shape[0])
    spectrum = np.abs(np.fft.rfft(v, nfft))
    freqs = np.fft.rfftfreq(nfft, d=profile.dt)
    spectrum = spectrum / spectrum[0]
    sel = freqs <= cutoff_hz
    if sel.sum() < 2:
        raise ValueError("cutoff frequency leaves fewer than two spectral samples")
    f_sel = freqs[sel]
    m_sel = spectrum[sel]
    df = np.diff(f_sel) / (f_sel[-1] - f_sel[0])
    return float(-np.sum(np.sqrt(df**2 + np.diff(m_sel) ** 2)))


@dataclass
class ScoreRecord:
    """Similarity scores of one (prediction, observation) pair."""

    pair_id: str
    dtw_task: float
    dtw_joints: float
    sal_pred: float
    sal_obs: float
    sal_diff_pct: float
    dtw_task_path: int
    dtw_joints_path: int


def score_report(
    pred: Trajectory,
    observed: Trajectory,
    model: KinematicModel,
    pair_id: str = "",
    cutoff_hz: float = 20.0,
    padding: int = 1000,
) -> ScoreRecord:
    """DTW under both metrics plus the smoothness-score difference.

    ``sal_diff_pct`` is positive when the prediction is smoother than the
    observation.
    """
    task = MetricKind(TASK_SPACE)
    joints = MetricKind(JOINT_CENTERS)
    cost_task = _pairwise_config_costs(pred, observed, model, task)
    cost_joints = _pairwise_config_costs(pred, observed, model, joints)
    sal_pred = spectral_arc_length(speed_profile(pred, model, task), cutoff_hz, padding)
    sal_obs = spectral_arc_length(speed_profile(observed, model, task), cutoff_hz, padding)
    return ScoreRecord(
        pair_id=pair_id,
        dtw_task=dtw_matrix(cost_task),
        dtw_joints=dtw_matrix(cost_joints),
        sal_pred=sal_pred,
        sal_obs=sal_obs,
        sal_diff_pct=100.0 * (sal_pred - sal_obs) / abs(sal_obs),
        dtw_task_path=dtw_path_length(cost_task),
        dtw_joints_path=dtw_path_length(cost_joints),
    )


def aggregate_scores(records: list) -> dict:
    """Mean, std, min and max of every numeric score column."""
    out = {}
    for name in ("dtw_task", "dtw_joints", "sal_pred", "sal_obs", "sal_diff_pct"):
        col = np.array([getattr(r, name) for r in records], dtype=np.float64)
        out[name] = {
            "mean": float(col.mean()),
            "std": float(col.std()),
            "min": float(col.min()),
            "max": float(col.max()),
        }
    return out
