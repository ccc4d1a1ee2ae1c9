"""Serial-chain kinematics: forward kinematics, Jacobians, joint limits, IK.

A model is an ordered chain of prismatic and hinge joints. Named frames
(pelvis, torso, shoulder, elbow, wrist, hand, ...) attach to joint frames
with an optional fixed offset, and collision geometry is a set of spheres
attached the same way. Models and configurations are immutable values; every
operation here is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend

PRISMATIC = "prismatic"
HINGE = "hinge"

_UNIT_TOL = 1e-9


def _rotation_from_rpy(rpy):
    """Rotation matrix from roll-pitch-yaw (x, y, z intrinsic) angles."""
    r, p, y = rpy
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def _quaternion_from_matrix(R):
    """Unit quaternion (w, x, y, z) from a rotation matrix."""
    tr = np.trace(R)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    return q / np.linalg.norm(q)


def _frozen(a, shape=None):
    out = np.array(a, dtype=np.float64)
    if shape is not None and out.shape != shape:
        raise ValueError(f"expected shape {shape}, got {out.shape}")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class JointSpec:
    """One joint of a serial chain.

    ``axis`` is a unit vector in the joint's local frame; ``origin_rot`` and
    ``origin_trans`` form the fixed transform from the parent joint frame.
    Limits are radians for hinges, meters for prismatic joints.
    """

    name: str
    kind: str
    axis: np.ndarray
    origin_trans: np.ndarray = field(default_factory=lambda: np.zeros(3))
    origin_rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self):
        if self.kind not in (PRISMATIC, HINGE):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        axis = _frozen(self.axis, (3,))
        if abs(np.linalg.norm(axis) - 1.0) > _UNIT_TOL:
            raise ValueError(f"joint {self.name!r}: axis must have unit norm")
        if not self.lower <= self.upper:
            raise ValueError(f"joint {self.name!r}: lower limit exceeds upper limit")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "origin_trans", _frozen(self.origin_trans, (3,)))
        object.__setattr__(self, "origin_rot", _frozen(self.origin_rot, (3, 3)))


@dataclass(frozen=True)
class Frame:
    """Named frame: a point offset in the frame of joint ``joint_index``."""

    joint_index: int
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "offset", _frozen(self.offset, (3,)))


@dataclass(frozen=True)
class CollisionSphere:
    joint_index: int
    offset: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "offset", _frozen(self.offset, (3,)))
        if self.radius <= 0.0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Pose:
    """Rigid pose: position (meters) and unit quaternion (w, x, y, z)."""

    position: np.ndarray
    quaternion: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position, (3,)))
        quat = _frozen(self.quaternion, (4,))
        if abs(np.linalg.norm(quat) - 1.0) > _UNIT_TOL:
            raise ValueError("quaternion must have unit norm")
        object.__setattr__(self, "quaternion", quat)


class KinematicModel:
    """Ordered serial chain plus named frames and collision spheres."""

    def __init__(self, joints, frames, spheres=()):
        self.joints = tuple(joints)
        self.m = len(self.joints)
        if self.m == 0:
            raise ValueError("model needs at least one joint")
        self.frames = dict(frames)
        self.spheres = tuple(spheres)
        for name, fr in self.frames.items():
            if not 0 <= fr.joint_index < self.m:
                raise ValueError(f"frame {name!r} references joint {fr.joint_index}")
        for sp in self.spheres:
            if not 0 <= sp.joint_index < self.m:
                raise ValueError(f"sphere references joint {sp.joint_index}")
        # packed arrays consumed by the numeric kernels
        self._kinds = np.array(
            [1 if j.kind == HINGE else 0 for j in self.joints], dtype=np.int8
        )
        self._axes = np.ascontiguousarray([j.axis for j in self.joints])
        self._orot = np.ascontiguousarray([j.origin_rot for j in self.joints])
        self._otrans = np.ascontiguousarray([j.origin_trans for j in self.joints])
        self.lower = _frozen([j.lower for j in self.joints])
        self.upper = _frozen([j.upper for j in self.joints])
        if self.spheres:
            self._sphere_joints = np.array([s.joint_index for s in self.spheres])
            self._sphere_offsets = np.ascontiguousarray([s.offset for s in self.spheres])
            self.sphere_radii = _frozen([s.radius for s in self.spheres])
        else:
            self._sphere_joints = np.zeros(0, dtype=int)
            self._sphere_offsets = np.zeros((0, 3))
            self.sphere_radii = _frozen(np.zeros(0))

    def frame(self, name) -> Frame:
        try:
            return self.frames[name]
        except KeyError:
            raise KeyError(f"unknown frame {name!r}; have {sorted(self.frames)}") from None

    def check_configuration(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.m,):
            raise ValueError(f"configuration has shape {q.shape}, expected ({self.m},)")
        return q


def joint_transforms(model: KinematicModel, waypoints) -> np.ndarray:
    """World (R, t) of every joint frame for configurations (n, M) -> (n, M, 12)."""
    waypoints = np.asarray(waypoints, dtype=np.float64)
    if waypoints.ndim == 1:
        waypoints = waypoints[None, :]
    if waypoints.shape[1] != model.m:
        raise ValueError(f"configurations have {waypoints.shape[1]} DoF, model has {model.m}")
    return _backend.chain_transforms(
        model._kinds, model._axes, model._orot, model._otrans, waypoints
    )


def forward_kinematics(model: KinematicModel, q, frame: str) -> Pose:
    """Pose of a named frame; deterministic rigid-transform composition."""
    q = model.check_configuration(q)
    fr = model.frame(frame)
    tf = joint_transforms(model, q[None, :])[0, fr.joint_index]
    R = tf[:9].reshape(3, 3)
    return Pose(R @ fr.offset + tf[9:], _quaternion_from_matrix(R))


def frame_position(model: KinematicModel, q, frame: str) -> np.ndarray:
    q = model.check_configuration(q)
    fr = model.frame(frame)
    p, _ = _backend.frame_state(
        model._kinds, model._axes, model._orot, model._otrans, q, fr.joint_index, fr.offset
    )
    return p


def frame_positions(model: KinematicModel, waypoints, frame: str) -> np.ndarray:
    """Positions (n, 3) of one named frame along a batch of configurations."""
    fr = model.frame(frame)
    tf = joint_transforms(model, waypoints)[:, fr.joint_index]
    R = tf[:, :9].reshape(-1, 3, 3)
    return R @ fr.offset + tf[:, 9:]


def multi_frame_positions(model: KinematicModel, waypoints, frames) -> np.ndarray:
    """Positions (n, F, 3) of several named frames from one chain sweep."""
    tf = joint_transforms(model, waypoints)
    out = np.empty((tf.shape[0], len(frames), 3))
    for k, name in enumerate(frames):
        fr = model.frame(name)
        R = tf[:, fr.joint_index, :9].reshape(-1, 3, 3)
        out[:, k] = R @ fr.offset + tf[:, fr.joint_index, 9:]
    return out


def sphere_centers(model: KinematicModel, waypoints) -> np.ndarray:
    """World centers (n, S, 3) of the model's collision spheres."""
    tf = joint_transforms(model, waypoints)
    jt = model._sphere_joints
    R = tf[:, jt, :9].reshape(tf.shape[0], len(jt), 3, 3)
    t = tf[:, jt, 9:]
    return np.einsum("nsij,sj->nsi", R, model._sphere_offsets) + t


def batch_fk_jacobian(model: KinematicModel, configs, frame: str):
    """Frame positions (n, 3) and Jacobians (n, 3, M) for a config batch.

    One chain sweep per batch; used by the projection loops where the same
    frame is queried for many configurations per iteration.
    """
    configs = np.asarray(configs, dtype=np.float64)
    fr = model.frame(frame)
    k = fr.joint_index
    tf = joint_transforms(model, configs)
    n = tf.shape[0]
    rot = tf[:, : k + 1, :9].reshape(n, k + 1, 3, 3)
    trans = tf[:, : k + 1, 9:]
    p = rot[:, k] @ fr.offset + trans[:, k]
    axes_w = np.einsum("nkij,kj->nki", rot, model._axes[: k + 1])
    rel = p[:, None, :] - trans
    cols = np.where(
        (model._kinds[: k + 1] == 1)[None, :, None],
        np.cross(axes_w, rel),
        axes_w,
    )
    jac = np.zeros((n, 3, model.m))
    jac[:, :, : k + 1] = cols.transpose(0, 2, 1)
    return p, jac


def jacobian(model: KinematicModel, q, frame: str) -> np.ndarray:
    """Positional Jacobian (3, M) of the frame origin at configuration q."""
    q = model.check_configuration(q)
    fr = model.frame(frame)
    _, jac = _backend.frame_state(
        model._kinds, model._axes, model._orot, model._otrans, q, fr.joint_index, fr.offset
    )
    return jac


def fk_and_jacobian(model: KinematicModel, q, frame: str):
    """Frame position and Jacobian in one chain sweep."""
    q = model.check_configuration(q)
    fr = model.frame(frame)
    return _backend.frame_state(
        model._kinds, model._axes, model._orot, model._otrans, q, fr.joint_index, fr.offset
    )


def clamp_to_limits(model: KinematicModel, q) -> np.ndarray:
    """Componentwise clamp into the joint limits; idempotent."""
    q = model.check_configuration(q)
    return np.clip(q, model.lower, model.upper)


def ik_seed(
    model: KinematicModel,
    q0,
    x0,
    frame: str = "hand",
    tol: float = 1e-3,
    max_iter: int = 500,
    damping: float = 1e-6,
    step_cap: float = 0.1,
):
    """Damped-least-squares IK staying close to the start configuration.

    Iterates minimal-norm updates toward placing ``frame`` at the task-space
    point ``x0``, with a nullspace pull back toward ``q0`` so the result is a
    local minimizer of the configuration-space distance to ``q0``. Joints
    sitting at a limit with the update pushing outward have their Jacobian
    columns zeroed so the remaining joints absorb the motion; iterates are
    clamped to the limits. Returns the configuration, or None when the error
    is still above ``tol`` after ``max_iter`` iterations (e.g. unreachable
    targets).
    """
    q = clamp_to_limits(model, np.asarray(q0, dtype=np.float64))
    q0 = q.copy()
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (3,):
        raise ValueError("target must be a 3-vector")
    tol_limits = 1e-12
    for _ in range(max_iter):
        p, J = fk_and_jacobian(model, q, frame)
        err = x0 - p
        if np.linalg.norm(err) < tol:
            return q
        step = err if np.linalg.norm(err) <= step_cap else err * (step_cap / np.linalg.norm(err))
        Jm = J
        for _attempt in range(2):
            JJt = Jm @ Jm.T + damping * np.eye(3)
            dq = Jm.T @ np.linalg.solve(JJt, step)
            pinned = ((q >= model.upper - tol_limits) & (dq > 0.0)) | (
                (q <= model.lower + tol_limits) & (dq < 0.0)
            )
            if not pinned.any() or Jm is not J:
                break
            Jm = J.copy()
            Jm[:, pinned] = 0.0
        # nullspace pull toward q0 keeps the solution nearby among redundant
        # ones; fading it with the residual avoids limit cycles near the goal
        null = (q0 - q) - Jm.T @ np.linalg.solve(JJt, Jm @ (q0 - q))
        q = clamp_to_limits(model, q + dq + min(0.5, float(np.linalg.norm(err))) * null)
    p, _ = fk_and_jacobian(model, q, frame)
    if np.linalg.norm(x0 - p) < tol:
        return q
    return None
