"""End-to-end experiment harness: synthesize demos, learn weights, predict, score.

A single experiment spec (JSON) names the model, the scene, the demonstration
set (explicit files or a synthesis block with a hand-set weight vector), and
the learning / planning configurations. The harness mirrors a controlled
study: demonstrations are produced by the planner under a known cost, weights
are recovered by leave-one-out IOC, and predictions are scored against the
held-out demonstrations.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .evaluation import aggregate_scores, score_report
from .features import FeatureRanges, FeatureSetConfig
from .fileio import (
    check_fingerprint,
    load_model,
    load_scene,
    load_trajectory,
    load_weights,
    save_report,
    save_trajectory,
    save_weights,
)
from .ioc import (
    DemoRecord,
    IocConfig,
    IocDataset,
    WeightVector,
    build_dataset,
    cross_validate_regularizer,
    learn_weights,
)
from .kinematics import KinematicModel, frame_position
from .planner import PlannerConfig, PlanningError, replan_loop
from .sampling import GoalSet
from .trajectory import BoundaryState, Trajectory, resample_uniform

logger = logging.getLogger(__name__)


@dataclass
class ExperimentSpec:
    root: Path
    model_path: Path
    scene_path: Path
    demo_paths: list | None
    synthesize: dict | None
    ioc: IocConfig
    planner: PlannerConfig
    outputs: Path

    @property
    def demos_dir(self) -> Path:
        return self.outputs / "demos"

    @property
    def predictions_dir(self) -> Path:
        return self.outputs / "predictions"

    @property
    def cache_dir(self) -> Path:
        return self.outputs / "cache"


def _config_from_dict(cls, doc: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**doc)


def load_experiment_spec(path) -> ExperimentSpec:
    path = Path(path)
    with open(path) as handle:
        doc = json.load(handle)
    root = path.parent
    demos = doc.get("demos")
    demo_paths = None
    synthesize = None
    if isinstance(demos, list):
        demo_paths = [root / d for d in demos]
    elif isinstance(demos, dict) and "synthesize" in demos:
        synthesize = demos["synthesize"]
        if "w_true" not in synthesize:
            raise ValueError("synthesize block requires w_true")
    else:
        raise ValueError("spec needs 'demos': either a file list or a synthesize block")
    return ExperimentSpec(
        root=root,
        model_path=root / doc["model"],
        scene_path=root / doc["scene"],
        demo_paths=demo_paths,
        synthesize=synthesize,
        ioc=_config_from_dict(IocConfig, doc.get("ioc", {})),
        planner=_config_from_dict(PlannerConfig, doc.get("planner", {})),
        outputs=root / doc.get("outputs", "out"),
    )


def weight_vector_from_mapping(mapping: dict, feature_config: FeatureSetConfig, m: int) -> WeightVector:
    """Weight vector from {label: value}; unnamed features get weight zero."""
    labels = feature_config.labels(m)
    unknown = set(mapping) - set(labels)
    if unknown:
        raise ValueError(f"unknown feature labels: {sorted(unknown)}")
    w = np.array([float(mapping.get(label, 0.0)) for label in labels])
    return WeightVector(w, labels)


def _demo_case_goal(model: KinematicModel, demo: Trajectory, frame: str) -> GoalSet:
    return GoalSet(frame_position(model, demo.waypoints[-1], frame), frame)


def cmd_synth_demos(spec: ExperimentSpec, feature_config: FeatureSetConfig = FeatureSetConfig()):
    """Plan one demonstration per synthesis case under the hand-set weights."""
    if spec.synthesize is None:
        raise ValueError("experiment spec has no synthesize block")
    model = load_model(spec.model_path)
    scene = load_scene(spec.scene_path)
    w_true = weight_vector_from_mapping(spec.synthesize["w_true"], feature_config, model.m)
    paths = []
    failures = []
    for i, case in enumerate(spec.synthesize["cases"]):
        cfg = replace(spec.planner, seed=int(case.get("seed", i)))
        goal = GoalSet(np.asarray(case["goal"], dtype=np.float64), "hand")
        try:
            result = replan_loop(
                model,
                scene,
                np.asarray(case["start"], dtype=np.float64),
                goal,
                w_true,
                cfg,
                tick=spec.synthesize.get("duration", 1.0),
                horizon=spec.synthesize.get("duration", 1.0),
                feature_config=feature_config,
            )
        except PlanningError as exc:
            failures.append((i, str(exc)))
            continue
        if not result.completed:
            failures.append((i, "re-planning returned a partial trajectory"))
            continue
        path = spec.demos_dir / f"demo_{i:02d}.csv"
        save_trajectory(path, result.trajectory)
        paths.append(path)
    if failures:
        for i, msg in failures:
            logger.error("demo %d failed: %s", i, msg)
        raise PlanningError(f"{len(failures)} of {len(spec.synthesize['cases'])} demos failed")
    return paths


def _demo_files(spec: ExperimentSpec):
    if spec.demo_paths is not None:
        return list(spec.demo_paths)
    paths = sorted(spec.demos_dir.glob("demo_*.csv"))
    if not paths:
        raise FileNotFoundError(f"no demonstrations in {spec.demos_dir}; run synth-demos first")
    return paths


def _dataset_cache_key(spec: ExperimentSpec, demo_paths, leave_out) -> str:
    h = hashlib.sha256()
    for p in demo_paths:
        h.update(Path(p).read_bytes())
    h.update(Path(spec.scene_path).read_bytes())
    h.update(Path(spec.model_path).read_bytes())
    h.update(json.dumps({f.name: getattr(spec.ioc, f.name) for f in fields(IocConfig)}, sort_keys=True).encode())
    h.update(str(leave_out).encode())
    h.update(str(spec.planner.n_waypoints).encode())
    return h.hexdigest()[:24]


def _save_dataset_cache(path: Path, dataset: IocDataset):
    arrays = {}
    meta = []
    for i, rec in enumerate(dataset.records):
        arrays[f"demo_{i}"] = rec.demo_features
        arrays[f"samples_{i}"] = rec.sample_features
        arrays[f"boundary_{i}"] = np.stack(
            [rec.boundary.velocity, rec.boundary.acceleration, rec.boundary.jerk]
        )
        meta.append(
            {
                "time_origin": rec.time_origin,
                "demo_index": rec.demo_index,
                "segment_start": rec.segment_start,
                "n_rejected": rec.n_rejected,
            }
        )
    arrays["ranges_lo"] = dataset.ranges.lo
    arrays["ranges_hi"] = dataset.ranges.hi
    arrays["ranges_constant"] = dataset.ranges.constant
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        np.savez(handle, meta=json.dumps({"records": meta, "names": list(dataset.feature_names)}), **arrays)


def _load_dataset_cache(path: Path, cfg: IocConfig) -> IocDataset:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        records = []
        for i, rec_meta in enumerate(meta["records"]):
            boundary = data[f"boundary_{i}"]
            records.append(
                DemoRecord(
                    demo_features=data[f"demo_{i}"],
                    sample_features=data[f"samples_{i}"],
                    boundary=BoundaryState(boundary[0], boundary[1], boundary[2]),
                    time_origin=float(rec_meta["time_origin"]),
                    demo_index=int(rec_meta["demo_index"]),
                    segment_start=int(rec_meta["segment_start"]),
                    n_rejected=int(rec_meta["n_rejected"]),
                )
            )
        ranges = FeatureRanges(
            data["ranges_lo"].copy(), data["ranges_hi"].copy(), data["ranges_constant"].copy()
        )
        return IocDataset(records, ranges, tuple(meta["names"]), cfg)


def cmd_learn(
    spec: ExperimentSpec,
    leave_out: int | None = None,
    cross_validate: bool = False,
    use_cache: bool = True,
    out_path=None,
    feature_config: FeatureSetConfig = FeatureSetConfig(),
):
    """Build (or load) the IOC dataset, learn weights, write the weight file."""
    model = load_model(spec.model_path)
    scene = load_scene(spec.scene_path)
    demo_paths = _demo_files(spec)
    if leave_out is not None:
        if not 0 <= leave_out < len(demo_paths):
            raise ValueError(f"--leave-out {leave_out} out of range for {len(demo_paths)} demos")
        demo_paths = [p for i, p in enumerate(demo_paths) if i != leave_out]
    cache_path = spec.cache_dir / f"dataset_{_dataset_cache_key(spec, demo_paths, leave_out)}.npz"
    if use_cache and cache_path.exists():
        logger.info("dataset cache hit: %s", cache_path.name)
        dataset = _load_dataset_cache(cache_path, spec.ioc)
    else:
        demos = [
            resample_uniform(load_trajectory(p), spec.planner.n_waypoints) for p in demo_paths
        ]
        dataset = build_dataset(demos, model, scene, spec.ioc, feature_config)
        if use_cache:
            _save_dataset_cache(cache_path, dataset)
    cfg = spec.ioc
    if cross_validate:
        best = cross_validate_regularizer(dataset, seed=cfg.seed)
        logger.info("cross-validated l1 strength: %g", best)
        cfg = replace(cfg, l1_strength=best)
    weights = learn_weights(dataset, cfg)
    suffix = "" if leave_out is None else f"_loo{leave_out}"
    out_path = Path(out_path) if out_path else spec.outputs / f"weights{suffix}.json"
    save_weights(out_path, weights, feature_config, model.m, dataset.ranges)
    return out_path


SINGLE_SHOT = "single_shot"
REPLAN = "replan"


def cmd_predict(
    spec: ExperimentSpec,
    weights_path,
    mode: str = SINGLE_SHOT,
    leave_out: int | None = None,
    repeats: int = 1,
    feature_config: FeatureSetConfig = FeatureSetConfig(),
):
    """Predict each (held-out) demo's motion from its start and goal point.

    ``single_shot`` freezes the passive agent at its initial configuration
    (one planning call); ``replan`` updates it every tick. Returns
    (paths, failures).
    """
    if mode not in (SINGLE_SHOT, REPLAN):
        raise ValueError(f"unknown prediction mode {mode!r}")
    model = load_model(spec.model_path)
    scene = load_scene(spec.scene_path)
    weights, ranges, fingerprint = load_weights(weights_path)
    check_fingerprint(fingerprint, feature_config, model.m)
    demo_paths = _demo_files(spec)
    cases = [leave_out] if leave_out is not None else list(range(len(demo_paths)))
    paths = []
    failures = []
    for case in cases:
        demo = load_trajectory(demo_paths[case])
        goal = _demo_case_goal(model, demo, "hand")
        horizon = demo.duration
        tick = horizon if mode == SINGLE_SHOT else spec.planner.tick
        for rep in range(repeats):
            cfg = replace(spec.planner, seed=spec.planner.seed + 1000 * case + rep, dt=demo.dt)
            try:
                result = replan_loop(
                    model,
                    scene,
                    demo.waypoints[0],
                    goal,
                    weights,
                    cfg,
                    tick=tick,
                    horizon=horizon,
                    boundary=demo.boundary_state(),
                    feature_config=feature_config,
                    ranges=ranges,
                )
            except PlanningError as exc:
                failures.append((case, rep, str(exc)))
                continue
            if not result.completed:
                failures.append((case, rep, "re-planning returned a partial trajectory"))
            stem = Path(demo_paths[case]).stem
            out = spec.predictions_dir / f"{stem}__{mode}_r{rep}.csv"
            save_trajectory(out, result.trajectory)
            paths.append(out)
    for case, rep, msg in failures:
        logger.error("prediction case %d repeat %d failed: %s", case, rep, msg)
    return paths, failures


def pair_predictions(pred_dir, obs_dir):
    """Match predictions to observations by stem prefix before '__'."""
    obs = {p.stem: p for p in sorted(Path(obs_dir).glob("*.csv"))}
    pairs = []
    unmatched = []
    for pred in sorted(Path(pred_dir).glob("*.csv")):
        stem = pred.stem.split("__")[0]
        if stem in obs:
            pairs.append((pred, obs[stem]))
        else:
            unmatched.append(pred)
    if not pairs:
        raise FileNotFoundError(f"no prediction/observation pairs between {pred_dir} and {obs_dir}")
    if unmatched:
        names = ", ".join(p.name for p in unmatched)
        raise FileNotFoundError(f"predictions without a matching observation: {names}")
    return pairs


def cmd_eval(pred_dir, obs_dir, model_path, out_csv):
    """Score every (prediction, observation) pair and write the report CSV."""
    model = load_model(model_path)
    records = []
    for pred_path, obs_path in pair_predictions(pred_dir, obs_dir):
        pred = load_trajectory(pred_path)
        obs = load_trajectory(obs_path)
        records.append(score_report(pred, obs, model, pair_id=pred_path.stem))
    save_report(out_csv, records, aggregate_scores(records))
    return Path(out_csv)
