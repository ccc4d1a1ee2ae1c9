"""Bundled kinematic models and small chains for experiments and tests."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .fileio import load_model
from .kinematics import CollisionSphere, Frame, JointSpec, KinematicModel


def reference_human_path() -> Path:
    """Path of the bundled 23-DoF upper-body model file."""
    return Path(resources.files("reachplan").joinpath("data/human23.json"))


def load_reference_human() -> KinematicModel:
    return load_model(reference_human_path())


def planar_arm(
    lengths=(0.4, 0.4, 0.3), limits=(-np.pi, np.pi), base=(0.0, 0.0, 0.0), sphere_radius=0.05
):
    """Planar arm of hinge joints about +z, links along +x at zero config.

    ``limits`` is one (lo, hi) pair for every joint or a per-joint sequence
    of pairs. Frames reuse the body naming (pelvis/torso at the base,
    shoulder, elbow, wrist along the chain, hand at the tip) so the
    evaluation metrics and distance features apply to it directly. Each link
    carries two collision spheres; pass ``sphere_radius=None`` to omit them.
    """
    joints = []
    spheres = []
    limits = np.asarray(limits, dtype=np.float64)
    if limits.ndim == 1:
        limits = np.tile(limits, (len(lengths), 1))
    for i, length in enumerate(lengths):
        offset = np.array(base, dtype=np.float64) if i == 0 else np.array([lengths[i - 1], 0.0, 0.0])
        joints.append(
            JointSpec(
                name=f"j{i}",
                kind="hinge",
                axis=np.array([0.0, 0.0, 1.0]),
                origin_trans=offset,
                lower=limits[i, 0],
                upper=limits[i, 1],
            )
        )
        if sphere_radius is not None:
            spheres.append(CollisionSphere(i, np.array([length / 3.0, 0.0, 0.0]), sphere_radius))
            spheres.append(CollisionSphere(i, np.array([2.0 * length / 3.0, 0.0, 0.0]), sphere_radius))
    tip = np.array([lengths[-1], 0.0, 0.0])
    last = len(lengths) - 1
    frames = {
        "pelvis": Frame(0),
        "torso": Frame(0),
        "shoulder": Frame(0),
        "elbow": Frame(min(1, last)),
        "wrist": Frame(last),
        "hand": Frame(last, tip),
        "tip": Frame(last, tip),
    }
    return KinematicModel(joints, frames, spheres)


def prismatic_gantry(limits=(-2.0, 2.0)):
    """Three orthogonal prismatic axes; hand position is linear in q."""
    axes = (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    joints = [
        JointSpec(name=f"t{i}", kind="prismatic", axis=a, lower=limits[0], upper=limits[1])
        for i, a in enumerate(axes)
    ]
    frames = {
        "pelvis": Frame(0),
        "torso": Frame(0),
        "shoulder": Frame(0),
        "elbow": Frame(1),
        "wrist": Frame(2),
        "hand": Frame(2),
        "tip": Frame(2),
    }
    return KinematicModel(joints, frames)
