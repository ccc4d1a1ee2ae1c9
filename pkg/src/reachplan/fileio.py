"""File formats: models, scenes, trajectories, weights, experiment specs.

All formats are plain text (JSON or CSV), use meters / radians / seconds,
and round-trip byte-identically: write -> read -> write produces the same
bytes. Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .features import (
    BoxObstacle,
    FeatureRanges,
    FeatureSetConfig,
    PassiveAgent,
    Scene,
    SphereObstacle,
)
from .ioc import WeightVector
from .kinematics import (
    HINGE,
    PRISMATIC,
    CollisionSphere,
    Frame,
    JointSpec,
    KinematicModel,
    _rotation_from_rpy,
)
from .trajectory import Trajectory


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# kinematic models


def load_model(path) -> KinematicModel:
    with open(path) as handle:
        doc = json.load(handle)
    joints = []
    index = {}
    for j, entry in enumerate(doc["joints"]):
        origin = entry.get("origin", {})
        rot = _rotation_from_rpy(origin.get("rpy", (0.0, 0.0, 0.0)))
        joints.append(
            JointSpec(
                name=entry["name"],
                kind=entry["kind"],
                axis=np.asarray(entry["axis"], dtype=np.float64),
                origin_trans=np.asarray(origin.get("xyz", (0.0, 0.0, 0.0)), dtype=np.float64),
                origin_rot=rot,
                lower=float(entry["limits"][0]),
                upper=float(entry["limits"][1]),
            )
        )
        index[entry["name"]] = j
    frames = {}
    for name, entry in doc.get("frames", {}).items():
        joint = entry["joint"]
        joint_index = index[joint] if isinstance(joint, str) else int(joint)
        frames[name] = Frame(joint_index, np.asarray(entry.get("offset", (0.0, 0.0, 0.0))))
    spheres = []
    for entry in doc.get("spheres", ()):
        joint = entry["joint"]
        joint_index = index[joint] if isinstance(joint, str) else int(joint)
        spheres.append(
            CollisionSphere(joint_index, np.asarray(entry["offset"]), float(entry["radius"]))
        )
    model = KinematicModel(joints, frames, spheres)
    model.name = doc.get("name", Path(path).stem)
    return model


def _rpy_from_rotation(rot) -> list:
    """Inverse of the z-y-x intrinsic composition used by the model format."""
    pitch = -np.arcsin(np.clip(rot[2, 0], -1.0, 1.0))
    if abs(abs(rot[2, 0]) - 1.0) < 1e-12:
        yaw = np.arctan2(-rot[0, 1], rot[1, 1])
        roll = 0.0
    else:
        yaw = np.arctan2(rot[1, 0], rot[0, 0])
        roll = np.arctan2(rot[2, 1], rot[2, 2])
    return [float(roll), float(pitch), float(yaw)]


def save_model(path, model: KinematicModel, name: str | None = None):
    joints = []
    for j in model.joints:
        entry = {
            "name": j.name,
            "kind": j.kind,
            "axis": [float(v) for v in j.axis],
            "limits": [float(j.lower), float(j.upper)],
        }
        origin = {}
        if np.any(j.origin_trans != 0.0):
            origin["xyz"] = [float(v) for v in j.origin_trans]
        if np.any(j.origin_rot != np.eye(3)):
            origin["rpy"] = _rpy_from_rotation(j.origin_rot)
        if origin:
            entry["origin"] = origin
        joints.append(entry)
    doc = {
        "name": name or getattr(model, "name", "model"),
        "joints": joints,
        "frames": {
            fname: {
                "joint": model.joints[fr.joint_index].name,
                "offset": [float(v) for v in fr.offset],
            }
            for fname, fr in model.frames.items()
        },
        "spheres": [
            {
                "joint": model.joints[s.joint_index].name,
                "offset": [float(v) for v in s.offset],
                "radius": float(s.radius),
            }
            for s in model.spheres
        ],
    }
    atomic_write_text(path, _dump_json(doc))


def save_scene(
    path,
    obstacles=(),
    passive_model_path=None,
    passive_trajectory_path=None,
    passive_config=None,
    rest_posture=None,
    goals=(),
    edt=None,
):
    """Write a scene document; paths are stored as given (resolve on load)."""
    doc = {}
    obs_entries = []
    for obs in obstacles:
        if isinstance(obs, SphereObstacle):
            obs_entries.append(
                {
                    "type": "sphere",
                    "center": [float(v) for v in obs.center],
                    "radius": float(obs.radius),
                }
            )
        elif isinstance(obs, BoxObstacle):
            obs_entries.append(
                {
                    "type": "box",
                    "center": [float(v) for v in obs.center],
                    "half_extents": [float(v) for v in obs.half_extents],
                }
            )
        else:
            raise ValueError(f"unsupported obstacle {obs!r}")
    doc["obstacles"] = obs_entries
    if passive_model_path is not None:
        passive = {"model": str(passive_model_path)}
        if passive_trajectory_path is not None:
            passive["trajectory"] = str(passive_trajectory_path)
        else:
            passive["config"] = [float(v) for v in passive_config]
        doc["passive"] = passive
    if rest_posture is not None:
        doc["rest_posture"] = [float(v) for v in rest_posture]
    doc["goals"] = [[float(v) for v in g] for g in goals]
    if edt:
        doc["edt"] = edt
    atomic_write_text(path, _dump_json(doc))


# ---------------------------------------------------------------------------
# trajectories


def save_trajectory(path, traj: Trajectory):
    """CSV with header t,q0,...,q{M-1}; buffer rows carry negative times."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t"] + [f"q{j}" for j in range(traj.m)])
    if traj.buffer is not None:
        b = traj.buffer.shape[0]
        for i, row in enumerate(traj.buffer):
            t = -(b - i) * traj.dt
            writer.writerow([_fmt(t)] + [_fmt(v) for v in row])
    for i, row in enumerate(traj.waypoints):
        writer.writerow([_fmt(i * traj.dt)] + [_fmt(v) for v in row])
    atomic_write_text(path, out.getvalue())


def load_trajectory(path) -> Trajectory:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if not header or header[0] != "t":
            raise ValueError(f"{path}: expected a trajectory CSV with a 't' column")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=np.float64)
    times = data[:, 0]
    configs = data[:, 1:]
    is_buffer = times < 0.0
    waypoints = configs[~is_buffer]
    if waypoints.shape[0] < 2:
        raise ValueError(f"{path}: needs at least two waypoints")
    wp_times = times[~is_buffer]
    dt = float(np.mean(np.diff(wp_times)))
    if not np.allclose(np.diff(wp_times), dt, atol=1e-9):
        raise ValueError(f"{path}: waypoint times are not uniformly spaced")
    buffer = configs[is_buffer] if is_buffer.any() else None
    return Trajectory(waypoints, dt, buffer=buffer)


# ---------------------------------------------------------------------------
# scenes


def load_scene(path, model_cache=None) -> Scene:
    """Scene JSON; passive model / trajectory paths resolve relative to it."""
    path = Path(path)
    with open(path) as handle:
        doc = json.load(handle)
    obstacles = []
    for entry in doc.get("obstacles", ()):
        if entry["type"] == "sphere":
            obstacles.append(SphereObstacle(np.asarray(entry["center"]), float(entry["radius"])))
        elif entry["type"] == "box":
            obstacles.append(
                BoxObstacle(np.asarray(entry["center"]), np.asarray(entry["half_extents"]))
            )
        else:
            raise ValueError(f"unknown obstacle type {entry['type']!r}")
    passive = None
    if "passive" in doc and doc["passive"] is not None:
        entry = doc["passive"]
        model_path = (path.parent / entry["model"]).resolve()
        if model_cache is not None and str(model_path) in model_cache:
            passive_model = model_cache[str(model_path)]
        else:
            passive_model = load_model(model_path)
            if model_cache is not None:
                model_cache[str(model_path)] = passive_model
        if entry.get("trajectory"):
            passive = PassiveAgent(
                passive_model, trajectory=load_trajectory(path.parent / entry["trajectory"])
            )
        else:
            passive = PassiveAgent(
                passive_model, static_config=np.asarray(entry["config"], dtype=np.float64)
            )
    edt = doc.get("edt", {})
    return Scene(
        obstacles=obstacles,
        passive=passive,
        rest_posture=(
            np.asarray(doc["rest_posture"], dtype=np.float64) if "rest_posture" in doc else None
        ),
        goals=[np.asarray(g, dtype=np.float64) for g in doc.get("goals", ())],
        edt_resolution=float(edt.get("resolution", 0.02)),
        edt_margin=float(edt.get("margin", 0.5)),
        clearance=float(edt.get("clearance", 0.03)),
    )


# ---------------------------------------------------------------------------
# weights


def feature_fingerprint(feature_config: FeatureSetConfig, m: int) -> str:
    payload = json.dumps(feature_config.fingerprint_payload(m), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_weights(
    path,
    weights: WeightVector,
    feature_config: FeatureSetConfig,
    m: int,
    ranges: FeatureRanges | None = None,
):
    doc = {
        "fingerprint": feature_fingerprint(feature_config, m),
        "converged": bool(weights.converged),
        "weights": {label: float(v) for label, v in zip(weights.labels, weights.w)},
    }
    if ranges is not None:
        doc["ranges"] = {
            "lo": [float(v) for v in ranges.lo],
            "hi": [float(v) for v in ranges.hi],
            "constant": [bool(v) for v in ranges.constant],
        }
    atomic_write_text(path, _dump_json(doc))


def load_weights(path):
    """Returns (WeightVector, FeatureRanges | None, fingerprint)."""
    with open(path) as handle:
        doc = json.load(handle)
    labels = tuple(doc["weights"].keys())
    values = np.array([doc["weights"][k] for k in labels], dtype=np.float64)
    ranges = None
    if "ranges" in doc:
        ranges = FeatureRanges(
            np.asarray(doc["ranges"]["lo"], dtype=np.float64),
            np.asarray(doc["ranges"]["hi"], dtype=np.float64),
            np.asarray(doc["ranges"]["constant"], dtype=bool),
        )
    weights = WeightVector(values, labels, converged=bool(doc.get("converged", True)))
    return weights, ranges, doc["fingerprint"]


def check_fingerprint(fingerprint: str, feature_config: FeatureSetConfig, m: int):
    expected = feature_fingerprint(feature_config, m)
    if fingerprint != expected:
        from .planner import FingerprintMismatchError

        raise FingerprintMismatchError(
            f"weight file fingerprint {fingerprint} does not match feature set {expected}"
        )


# ---------------------------------------------------------------------------
# evaluation reports

REPORT_COLUMNS = (
    "pair_id",
    "dtw_task",
    "dtw_joints",
    "sal_pred",
    "sal_obs",
    "sal_diff_pct",
    "dtw_task_path",
    "dtw_joints_path",
)


def save_report(path, records, aggregates: dict):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for rec in records:
        writer.writerow(
            [
                rec.pair_id,
                _fmt(rec.dtw_task),
                _fmt(rec.dtw_joints),
                _fmt(rec.sal_pred),
                _fmt(rec.sal_obs),
                _fmt(rec.sal_diff_pct),
                str(rec.dtw_task_path),
                str(rec.dtw_joints_path),
            ]
        )
    for stat in ("mean", "std", "min", "max"):
        writer.writerow(
            [stat]
            + [_fmt(aggregates[c][stat]) for c in ("dtw_task", "dtw_joints", "sal_pred", "sal_obs", "sal_diff_pct")]
            + ["", ""]
        )
    atomic_write_text(path, out.getvalue())
