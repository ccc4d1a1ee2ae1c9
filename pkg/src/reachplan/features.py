"""Trajectory features: link distances, smoothness, posture, obstacle cost.

The feature vector concatenates, in declared order, 16 pairwise link-distance
features between the active and passive agents, 8 smoothness features
(configuration- and task-space length and summed squared velocities,
accelerations, jerks), and one resting-posture feature per joint. The
obstacle penetration cost is computed over a signed Euclidean distance
transform of the static scene and is kept out of the feature vector: it is a
separately weighted planner term.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.ndimage import map_coordinates

from .kinematics import KinematicModel, frame_positions, multi_frame_positions, sphere_centers
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

LINK_NAMES = ("wrist", "elbow", "shoulder", "pelvis")
SMOOTHNESS_LABELS = (
    "smooth_config_length",
    "smooth_config_vel_sq",
    "smooth_config_acc_sq",
    "smooth_config_jerk_sq",
    "smooth_task_length",
    "smooth_task_vel_sq",
    "smooth_task_acc_sq",
    "smooth_task_jerk_sq",
)


@dataclass(frozen=True)
class SphereObstacle:
    center: np.ndarray
    radius: float

    def signed_distance(self, points):
        return np.linalg.norm(points - np.asarray(self.center), axis=-1) - self.radius

    def bounds(self):
        c = np.asarray(self.center, dtype=np.float64)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class BoxObstacle:
    """Axis-aligned box given by center and half extents."""

    center: np.ndarray
    half_extents: np.ndarray

    def signed_distance(self, points):
        d = np.abs(points - np.asarray(self.center)) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(d.max(axis=-1), 0.0)
        return outside + inside

    def bounds(self):
        c = np.asarray(self.center, dtype=np.float64)
        h = np.asarray(self.half_extents, dtype=np.float64)
        return c - h, c + h


class SignedDistanceField:
    """Regular grid of signed distances to the static obstacle surfaces.

    Grid corners hold exact signed distances (min over primitives, negative
    inside); queries interpolate trilinearly, so the error per query is below
    one grid resolution. Queries outside the grid are treated as free space.
    """

    def __init__(self, obstacles, resolution: float, margin: float):
        if resolution <= 0.0:
            raise ValueError("resolution must be positive")
        if not obstacles:
            raise ValueError("cannot build a distance field without obstacles")
        lo = np.full(3, np.inf)
        hi = np.full(3, -np.inf)
        for obs in obstacles:
            blo, bhi = obs.bounds()
            lo = np.minimum(lo, blo)
            hi = np.maximum(hi, bhi)
        self.origin = lo - margin
        self.resolution = resolution
        shape = np.ceil((hi + margin - self.origin) / resolution).astype(int) + 1
        if int(np.prod(shape)) > 40_000_000:
            raise ValueError(f"distance field grid too large: {tuple(shape)}")
        axes = [self.origin[k] + resolution * np.arange(shape[k]) for k in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
        self.values = exact_signed_distance(obstacles, pts).reshape(tuple(shape))
        self._warned = False

    def query(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        coords = (points - self.origin) / self.resolution
        limits = np.array(self.values.shape) - 1
        outside = (coords < 0.0).any(axis=1) | (coords > limits).any(axis=1)
        if outside.any() and not self._warned:
            logger.warning(
                "%d signed-distance queries outside the grid; treating them as free space",
                int(outside.sum()),
            )
            self._warned = True
        out = map_coordinates(self.values, coords.T, order=1, mode="nearest")
        out[outside] = np.inf
        return out


def exact_signed_distance(obstacles, points) -> np.ndarray:
    """Signed distance to the union of primitives (min over their distances)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if not obstacles:
        return np.full(points.shape[0], np.inf)
    return np.min([obs.signed_distance(points) for obs in obstacles], axis=0)


@dataclass
class PassiveAgent:
    """The other agent: a model plus either a recorded trajectory or a fixed pose."""

    model: KinematicModel
    trajectory: Trajectory | None = None
    static_config: np.ndarray | None = None

    def __post_init__(self):
        if (self.trajectory is None) == (self.static_config is None):
            raise ValueError("passive agent needs exactly one of trajectory or static_config")
        if self.static_config is not None:
            self.static_config = self.model.check_configuration(self.static_config)

    def configs_at(self, times) -> np.ndarray:
        """Configurations at absolute times, nearest waypoint, clamped at the ends."""
        times = np.atleast_1d(np.asarray(times, dtype=np.float64))
        if self.static_config is not None:
            return np.tile(self.static_config, (times.shape[0], 1))
        idx = np.clip(np.rint(times / self.trajectory.dt).astype(int), 0, self.trajectory.n - 1)
        return self.trajectory.waypoints[idx]

    def frozen_at(self, time: float) -> "PassiveAgent":
        return PassiveAgent(self.model, static_config=self.configs_at([time])[0])


@dataclass
class Scene:
    """Static obstacles, the passive agent, resting posture and goal points."""

    obstacles: list = field(default_factory=list)
    passive: PassiveAgent | None = None
    rest_posture: np.ndarray | None = None
    goals: list = field(default_factory=list)
    edt_resolution: float = 0.02
    edt_margin: float = 0.5
    clearance: float = 0.03
    _edt: SignedDistanceField | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.edt_resolution <= 0.0:
            raise ValueError("edt resolution must be positive")
        if self.rest_posture is not None:
            self.rest_posture = np.asarray(self.rest_posture, dtype=np.float64)

    @property
    def edt(self) -> SignedDistanceField | None:
        """Lazily built distance field; None when the scene has no obstacles."""
        if self._edt is None and self.obstacles:
            self._edt = SignedDistanceField(self.obstacles, self.edt_resolution, self.edt_margin)
        return self._edt

    def with_passive(self, passive) -> "Scene":
        return Scene(
            obstacles=self.obstacles,
            passive=passive,
            rest_posture=self.rest_posture,
            goals=self.goals,
            edt_resolution=self.edt_resolution,
            edt_margin=self.edt_margin,
            clearance=self.clearance,
            _edt=self._edt,
        )


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.names),):
            raise ValueError("feature values and names disagree in length")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", tuple(self.names))


@dataclass(frozen=True)
class FeatureSetConfig:
    """Which feature groups are active and how distances are kernelized."""

    link_distances: bool = True
    smoothness: bool = True
    posture: bool = True
    distance_pairs: tuple = tuple(product(LINK_NAMES, LINK_NAMES))
    distance_dmax: float = 0.8

    def labels(self, m: int) -> tuple:
        names = []
        if self.link_distances:
            names += [f"dist_{a}_{b}" for a, b in self.distance_pairs]
        if self.smoothness:
            names += list(SMOOTHNESS_LABELS)
        if self.posture:
            names += [f"posture_q{j}" for j in range(m)]
        return tuple(names)

    def fingerprint_payload(self, m: int) -> dict:
        return {
            "labels": list(self.labels(m)),
            "distance_dmax": self.distance_dmax,
        }


@dataclass(frozen=True)
class FeatureRanges:
    """Per-feature affine normalization onto [0, 1] fitted on sample features."""

    lo: np.ndarray
    hi: np.ndarray
    constant: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        span = np.where(self.constant, 1.0, self.hi - self.lo)
        out = (values - self.lo) / span
        return np.where(self.constant, 0.0, out)

    @classmethod
    def identity(cls, f: int) -> "FeatureRanges":
        return cls(np.zeros(f), np.ones(f), np.zeros(f, dtype=bool))


def distance_kernel(d, dmax: float):
    """Bounded decreasing kernel: max(0, 1 - d/dmax)^2; closer means larger."""
    return np.maximum(0.0, 1.0 - d / dmax) ** 2


def link_distance_features(
    traj: Trajectory,
    model_active: KinematicModel,
    scene: Scene,
    time_origin: float = 0.0,
    config: FeatureSetConfig = FeatureSetConfig(),
) -> np.ndarray:
    """Kernelized pairwise link-distance sums between active and passive agents.

    Waypoint i of the trajectory is aligned with the passive configuration at
    absolute time time_origin + i * dt. Without a passive agent the group is
    zero-filled (logged once per call site).
    """
    if scene.passive is None:
        logger.warning("scene has no passive agent; link-distance features are zero")
        return np.zeros(len(config.distance_pairs))
    times = time_origin + np.arange(traj.n) * traj.dt
    passive_configs = scene.passive.configs_at(times)
    active_pos = multi_frame_positions(model_active, traj.waypoints, LINK_NAMES)
    passive_pos = multi_frame_positions(scene.passive.model, passive_configs, LINK_NAMES)
    active_index = {name: k for k, name in enumerate(LINK_NAMES)}
    out = np.empty(len(config.distance_pairs))
    for k, (a, b) in enumerate(config.distance_pairs):
        d = np.linalg.norm(active_pos[:, active_index[a]] - passive_pos[:, active_index[b]], axis=1)
        out[k] = np.sum(distance_kernel(d, config.distance_dmax)) * traj.dt
    return out


def _diff_sums(series: np.ndarray, dt: float, first_real: int):
    """Length and squared velocity/acceleration/jerk sums of one series.

    ``first_real`` is the index of the first actual waypoint within the
    (possibly buffer-extended) series; a derivative term is counted when its
    newest contributing point is an actual waypoint, so buffers contribute
    boundary continuity terms without double counting the previous segment.
    """
    vel = np.diff(series, axis=0) / dt
    acc = np.diff(vel, axis=0) / dt
    jerk = np.diff(acc, axis=0) / dt
    length = float(np.sum(np.linalg.norm(np.diff(series[first_real:], axis=0), axis=1)))

    def tail_sq(arr, order):
        start = max(first_real - order, 0)
        sel = arr[start:]
        return float(np.sum(sel * sel))

    return (
        length,
        tail_sq(vel, 1),
        tail_sq(acc, 2),
        tail_sq(jerk, 3),
    )


def smoothness_features(traj: Trajectory, model: KinematicModel) -> np.ndarray:
    """The 8 smoothness features, configuration space first, then task space.

    Task-space quantities use hand-frame positions. With no buffer the sums
    cover only differences interior to the waypoints (a trajectory at rest
    scores zero everywhere); with a buffer the junction terms are included so
    re-planned segments pay for discontinuities against their history.
    """
    ext = traj.extended()
    first_real = 0 if traj.buffer is None else traj.buffer.shape[0]
    config_part = _diff_sums(ext, traj.dt, first_real)
    hand = frame_positions(model, ext, "hand")
    task_part = _diff_sums(hand, traj.dt, first_real)
    return np.array(config_part + task_part)


def posture_features(traj: Trajectory, q_rest) -> np.ndarray:
    """Per-joint squared distance to the resting posture, integrated over time."""
    q_rest = np.asarray(q_rest, dtype=np.float64)
    if q_rest.shape != (traj.m,):
        raise ValueError("resting posture dimension does not match trajectory")
    d = traj.waypoints - q_rest
    return np.sum(d * d, axis=0) * traj.dt


def obstacle_cost(
    traj: Trajectory, model: KinematicModel, scene: Scene, clearance: float | None = None
) -> float:
    """Penetration cost of the body spheres against the static distance field.

    Sums max(0, clearance - sd) * dt over waypoints and spheres, where sd is
    the field value at the sphere center minus the sphere radius.
    """
    if not scene.obstacles or not model.spheres:
        return 0.0
    clearance = scene.clearance if clearance is None else clearance
    centers = sphere_centers(model, traj.waypoints)
    sd = scene.edt.query(centers.reshape(-1, 3)).reshape(centers.shape[:2])
    sd = sd - model.sphere_radii[None, :]
    return float(np.sum(np.maximum(0.0, clearance - sd)) * traj.dt)


def compute_feature_vector(
    traj: Trajectory,
    model: KinematicModel,
    scene: Scene,
    config: FeatureSetConfig = FeatureSetConfig(),
    time_origin: float = 0.0,
) -> FeatureVector:
    """Concatenate the enabled feature groups in declared order."""
    parts = []
    if config.link_distances:
        parts.append(link_distance_features(traj, model, scene, time_origin, config))
    if config.smoothness:
        parts.append(smoothness_features(traj, model))
    if config.posture:
        if scene.rest_posture is None:
            raise ValueError("posture features need a resting posture in the scene")
        parts.append(posture_features(traj, scene.rest_posture))
    values = np.concatenate(parts) if parts else np.zeros(0)
    return FeatureVector(values, config.labels(traj.m))


def normalize_features(demo_features: np.ndarray, sample_features: list):
    """Fit per-feature [0, 1] ranges on the samples and apply them everywhere.

    Returns (normalized demos, normalized sample sets, ranges). Constant
    features (zero range across all samples) are flagged and mapped to 0.
    """
    stacked = np.vstack(sample_features)
    if stacked.size == 0:
        raise ValueError("cannot normalize against an empty sample set")
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    constant = hi - lo <= 0.0
    ranges = FeatureRanges(lo, hi, constant)
    demo_norm = np.vstack([ranges.apply(row) for row in np.atleast_2d(demo_features)])
    sample_norm = [np.vstack([ranges.apply(row) for row in block]) for block in sample_features]
    return demo_norm, sample_norm, ranges


def trajectory_collision_free(
    traj: Trajectory,
    model: KinematicModel,
    scene: Scene,
    time_origin: float = 0.0,
) -> bool:
    """Exact-geometry collision check against static obstacles and the passive agent."""
    centers = sphere_centers(model, traj.waypoints)
    if scene.obstacles and centers.size:
        sd = exact_signed_distance(scene.obstacles, centers.reshape(-1, 3))
        if np.any(sd < np.tile(model.sphere_radii, traj.n)):
            return False
    if scene.passive is not None and centers.size and scene.passive.model.spheres:
        times = time_origin + np.arange(traj.n) * traj.dt
        passive_configs = scene.passive.configs_at(times)
        pc = sphere_centers(scene.passive.model, passive_configs)
        dist = np.linalg.norm(centers[:, :, None, :] - pc[:, None, :, :], axis=-1)
        radii = model.sphere_radii[:, None] + scene.passive.model.sphere_radii[None, :]
        if np.any(dist < radii[None, :, :]):
            return False
    return True
