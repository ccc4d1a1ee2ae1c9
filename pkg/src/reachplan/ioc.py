"""Inverse optimal control on reaching demonstrations (goal-set PIIRL).

Demonstrations are segmented into re-planning suffixes, trajectory samples
are drawn around each segment from the goal-set metric and projected to the
joint limits and the goal set, and colliding samples are discarded. The
feature weights then minimize the sample-contrast loss

    L(w) = -sum_i log( exp(-w . F_i) / sum_s exp(-w . F_{i,s}) )

where the demonstration itself is included among the s-indexed set, which
bounds the loss below by zero. An L1 penalty is added for feature selection;
weights are constrained non-negative because every feature is a penalty.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .features import (
    FeatureRanges,
    FeatureSetConfig,
    Scene,
    compute_feature_vector,
    normalize_features,
    trajectory_collision_free,
)
from .kinematics import KinematicModel, frame_position
from .sampling import (
    GoalSet,
    project_goal_batch,
    project_to_joint_limits,
    sample_trajectories,
    sigma_for_hand_spread,
)
from .trajectory import (
    GOAL_SET,
    BoundaryState,
    Trajectory,
    make_control_metric,
    segment_demonstration,
)
from ._parallel import ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IocConfig:
    """Sampling, segmentation and optimizer settings for weight learning."""

    samples_per_demo: int = 50
    sigma: float | None = None  # None: calibrated to sigma_hand_spread per segment
    sigma_hand_spread: float = 0.05
    l1_strength: float = 0.01
    advance: float = 0.1
    min_segment_len: int = 20
    seed: int = 0
    goal_frame: str = "hand"
    goal_epsilon: float = 1e-3
    projection_eta: float = 0.01
    projection_max_iter: int = 500
    projection_regularization: float = 1e-8
    optimizer_max_iter: int = 1000
    optimizer_tol: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        if self.samples_per_demo < 1:
            raise ValueError("samples_per_demo must be at least 1")
        if self.l1_strength < 0.0:
            raise ValueError("l1_strength must be non-negative")


@dataclass(frozen=True)
class WeightVector:
    """Learned feature weights, one scalar per feature label."""

    w: np.ndarray
    labels: tuple
    converged: bool = True

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (len(self.labels),):
            raise ValueError("weight vector and labels disagree in length")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass
class DemoRecord:
    """Normalized features of one demonstration segment and its samples."""

    demo_features: np.ndarray
    sample_features: np.ndarray
    boundary: BoundaryState
    time_origin: float
    demo_index: int
    segment_start: int
    n_rejected: int = 0


@dataclass
class IocDataset:
    records: list
    ranges: FeatureRanges
    feature_names: tuple
    config: IocConfig


def _build_record(args):
    (
        model,
        scene,
        cfg,
        feature_config,
        demo_index,
        segment_index,
        segment,
        boundary,
        time_origin,
    ) = args
    goal_point = frame_position(model, segment.waypoints[-1], cfg.goal_frame)
    goal = GoalSet(goal_point, cfg.goal_frame, cfg.goal_epsilon)
    metric = make_control_metric(segment.n, segment.m, segment.dt, GOAL_SET)
    sigma = cfg.sigma
    if sigma is None:
        sigma = sigma_for_hand_spread(
            model, segment.waypoints[-1], metric, cfg.sigma_hand_spread, cfg.goal_frame
        )
    metric = metric.with_sigma(sigma)
    seed = int(np.random.SeedSequence([cfg.seed, demo_index, segment_index]).generate_state(1)[0])
    batch = sample_trajectories(segment, metric, cfg.samples_per_demo, seed)
    limited = [project_to_joint_limits(s, metric, model) for s in batch.samples]
    projected = project_goal_batch(
        limited,
        metric,
        model,
        goal,
        eta=cfg.projection_eta,
        max_iter=cfg.projection_max_iter,
        regularization=cfg.projection_regularization,
    )
    kept = [
        p
        for p in projected
        if p is not None and trajectory_collision_free(p, model, scene, time_origin)
    ]
    n_rejected = len(batch.samples) - len(kept)
    if not kept:
        return None, (demo_index, segment_index, n_rejected)
    demo_phi = compute_feature_vector(segment, model, scene, feature_config, time_origin).values
    sample_phi = np.vstack(
        [
            compute_feature_vector(s, model, scene, feature_config, time_origin).values
            for s in kept
        ]
    )
    record = DemoRecord(
        demo_features=demo_phi,
        sample_features=sample_phi,
        boundary=boundary,
        time_origin=time_origin,
        demo_index=demo_index,
        segment_start=segment_index,
        n_rejected=n_rejected,
    )
    return record, None


def build_dataset(
    demos: list,
    model: KinematicModel,
    scene: Scene,
    cfg: IocConfig,
    feature_config: FeatureSetConfig = FeatureSetConfig(),
) -> IocDataset:
    """Segment, sample, project, filter and featurize a demonstration set.

    Every segment's features use that segment's own boundary buffer and the
    passive agent aligned at the segment's start time. Records whose samples
    are all rejected are dropped with a report.
    """
    if not demos:
        raise ValueError("need at least one demonstration")
    jobs = []
    for demo_index, demo in enumerate(demos):
        segments = segment_demonstration(demo, cfg.advance, cfg.min_segment_len)
        step = int(round(cfg.advance / demo.dt))
        for segment_index, (segment, boundary) in enumerate(segments):
            time_origin = segment_index * step * demo.dt
            jobs.append(
                (
                    model,
                    scene,
                    cfg,
                    feature_config,
                    demo_index,
                    segment_index,
                    segment,
                    boundary,
                    time_origin,
                )
            )
    results = ordered_map(_build_record, jobs, cfg.threads)
    records = []
    for record, dropped in results:
        if record is None:
            demo_index, segment_index, n_rejected = dropped
            logger.warning(
                "all %d samples rejected for demo %d segment %d; record dropped",
                n_rejected,
                demo_index,
                segment_index,
            )
            continue
        records.append(record)
    if not records:
        raise ValueError("every record was rejected; cannot build a dataset")
    demo_matrix = np.vstack([r.demo_features for r in records])
    sample_blocks = [r.sample_features for r in records]
    demo_norm, sample_norm, ranges = normalize_features(demo_matrix, sample_blocks)
    for i, r in enumerate(records):
        r.demo_features = demo_norm[i]
        r.sample_features = sample_norm[i]
    names = feature_config.labels(model.m)
    return IocDataset(records=records, ranges=ranges, feature_names=names, config=cfg)


def piirl_loss(w: np.ndarray, dataset: IocDataset):
    """Sample-contrast loss and its analytic gradient.

    Stabilized with max-subtraction inside the log-sum-exp; the demonstration
    is part of the denominator set, so the loss is non-negative and reaches 0
    only when the demonstration is infinitely better than every sample.
    """
    w = np.asarray(w, dtype=np.float64)
    if not dataset.records:
        raise ValueError("empty dataset")
    loss = 0.0
    grad = np.zeros_like(w)
    for rec in dataset.records:
        phi = np.vstack([rec.demo_features[None, :], rec.sample_features])
        if not np.all(np.isfinite(phi)):
            raise ValueError("non-finite features in dataset")
        a = -(phi @ w)
        amax = a.max()
        e = np.exp(a - amax)
        z = e.sum()
        loss += float(-a[0] + amax + np.log(z))
        p = e / z
        grad += rec.demo_features - p @ phi
    return loss, grad


def learn_weights(dataset: IocDataset, cfg: IocConfig | None = None) -> WeightVector:
    """Minimize the L1-penalized contrast loss over non-negative weights.

    On the non-negative orthant the L1 term is the linear form sum(w), so a
    bound-constrained quasi-Newton solves the convex problem exactly; large
    enough l1_strength yields exactly w = 0.
    """
    cfg = cfg if cfg is not None else dataset.config
    f = len(dataset.feature_names)

    def objective(w):
        loss, grad = piirl_loss(w, dataset)
        return loss + cfg.l1_strength * np.sum(w), grad + cfg.l1_strength

    res = minimize(
        objective,
        x0=np.zeros(f),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * f,
        options={"maxiter": cfg.optimizer_max_iter, "ftol": cfg.optimizer_tol, "gtol": 1e-10},
    )
    if not res.success:
        logger.warning("weight optimization stopped early: %s", res.message)
    return WeightVector(res.x, dataset.feature_names, converged=bool(res.success))


def default_regularizer_grid() -> np.ndarray:
    """Ten log-spaced L1 strengths spanning 1e-4 .. 1e2 (includes 0.01)."""
    return np.logspace(-4.0, 2.0, 10)


def cross_validate_regularizer(
    dataset: IocDataset, grid=None, folds: int = 5, seed: int = 0
) -> float:
    """Pick the L1 strength minimizing held-out contrast loss over k folds."""
    grid = default_regularizer_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("regularizer grid is empty")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    n = len(dataset.records)
    folds = min(folds, n)
    order = np.random.default_rng(seed).permutation(n)
    splits = np.array_split(order, folds)
    scores = np.zeros(grid.size)
    for k, holdout in enumerate(splits):
        train_idx = np.setdiff1d(order, holdout, assume_unique=True)
        train = IocDataset(
            records=[dataset.records[i] for i in train_idx],
            ranges=dataset.ranges,
            feature_names=dataset.feature_names,
            config=dataset.config,
        )
        test = IocDataset(
            records=[dataset.records[i] for i in holdout],
            ranges=dataset.ranges,
            feature_names=dataset.feature_names,
            config=dataset.config,
        )
        for g, l1 in enumerate(grid):
            weights = learn_weights(train, replace(dataset.config, l1_strength=float(l1)))
            held_loss, _ = piirl_loss(weights.w, test)
            scores[g] += held_loss
    return float(grid[int(np.argmin(scores))])
