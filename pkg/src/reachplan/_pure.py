"""NumPy implementations of the hot kernels.

Signature-compatible with the compiled extension ``reachplan._native``; the
active implementation is chosen at import time by :mod:`reachplan._backend`.
Chains are described by packed arrays: ``kinds`` (int8, 0 = prismatic,
1 = hinge), per-joint local ``axes`` (M, 3), and fixed parent-to-joint
``origin_rot`` (M, 3, 3) / ``origin_trans`` (M, 3) transforms.
"""

import numpy as np


def _rodrigues_batch(axis, theta):
    """Rotation matrices (n, 3, 3) about a fixed unit axis for angles (n,)."""
    kx, ky, kz = axis
    K = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    K2 = K @ K
    s = np.sin(theta)[:, None, None]
    c = (1.0 - np.cos(theta))[:, None, None]
    return np.eye(3) + s * K + c * K2


def chain_transforms(kinds, axes, origin_rot, origin_trans, q):
    """World transform of every joint frame for a batch of configurations.

    q is (n, M); returns (n, M, 12) with each row [r00..r22, t0, t1, t2],
    the frame pose after applying that joint's motion.
    """
    q = np.asarray(q, dtype=np.float64)
    n, m = q.shape
    out = np.empty((n, m, 12))
    R = np.broadcast_to(np.eye(3), (n, 3, 3))
    t = np.zeros((n, 3))
    for i in range(m):
        t = t + R @ origin_trans[i]
        R = R @ origin_rot[i]
        if kinds[i] == 1:
            R = R @ _rodrigues_batch(axes[i], q[:, i])
        else:
            t = t + (R @ axes[i]) * q[:, i, None]
        out[:, i, :9] = R.reshape(n, 9)
        out[:, i, 9:] = t
    return out


def frame_state(kinds, axes, origin_rot, origin_trans, q, joint_index, offset):
    """Position and positional Jacobian of one frame point, single config.

    Returns (position (3,), jacobian (3, M)). Columns for joints after
    ``joint_index`` are zero. The frame point is ``offset`` expressed in the
    frame of joint ``joint_index``.
    """
    q = np.asarray(q, dtype=np.float64)
    m = q.shape[0]
    jac = np.zeros((3, m))
    world_axes = np.empty((joint_index + 1, 3))
    world_origins = np.empty((joint_index + 1, 3))
    R = np.eye(3)
    t = np.zeros(3)
    for i in range(joint_index + 1):
        t = t + R @ origin_trans[i]
        R = R @ origin_rot[i]
        a = R @ axes[i]
        world_axes[i] = a
        world_origins[i] = t
        if kinds[i] == 1:
            R = R @ _rodrigues_batch(axes[i], q[i : i + 1])[0]
        else:
            t = t + a * q[i]
    p = R @ offset + t
    for i in range(joint_index + 1):
        if kinds[i] == 1:
            jac[:, i] = np.cross(world_axes[i], p - world_origins[i])
        else:
            jac[:, i] = world_axes[i]
    return p, jac


def dtw_accumulate(cost):
    """Accumulated DTW cost of a pairwise distance matrix (unit steps)."""
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row = acc[i]
        prev = acc[i - 1]
        ci = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = ci[j - 1] + min(prev[j - 1], prev[j], row[j - 1])
    return acc[n, m]


def _batch_fk_jacobian(kinds, axes, orot, otrans, q, frame_joint, frame_offset):
    """Frame positions (n, 3) and Jacobians (n, 3, M) from packed chain arrays."""
    k = frame_joint
    tf = chain_transforms(kinds, axes, orot, otrans, q)
    n, m = q.shape
    rot = tf[:, : k + 1, :9].reshape(n, k + 1, 3, 3)
    trans = tf[:, : k + 1, 9:]
    p = rot[:, k] @ frame_offset + trans[:, k]
    axes_w = np.einsum("nkij,kj->nki", rot, axes[: k + 1])
    rel = p[:, None, :] - trans
    cols = np.where((kinds[: k + 1] == 1)[None, :, None], np.cross(axes_w, rel), axes_w)
    jac = np.zeros((n, 3, m))
    jac[:, :, : k + 1] = cols.transpose(0, 2, 1)
    return p, jac


def _goal_update(jac, err, r_nn, reg_eye):
    a = r_nn * np.einsum("sij,skj->sik", jac, jac) + reg_eye
    y = np.linalg.solve(a, err[:, :, None])[:, :, 0]
    return np.einsum("sij,si->sj", jac, y)


def project_goal(
    kinds,
    axes,
    orot,
    otrans,
    lower,
    upper,
    frame_joint,
    frame_offset,
    wps,
    col,
    goal,
    eta,
    epsilon,
    max_iter,
    regularization,
    limit_aware,
):
    """Batched iterative goal-set projection; modifies ``wps`` in place.

    ``wps`` is (S, N, M) with waypoint 0 pinned and all later waypoints free;
    ``col`` is the last column of R_free^-1. Returns the per-trajectory
    success mask. Every iteration takes an eta-scaled minimal-R-norm step for
    the linearized end-point constraint; with ``limit_aware`` the Jacobian
    columns of end-configuration joints leaving their limits are zeroed and
    the end configuration is clamped.
    """
    count, n, m = wps.shape
    limit_tol = 1e-9
    reg_eye = regularization * np.eye(3)
    r_nn = float(col[-1])
    done = np.zeros(count, dtype=bool)
    active = np.arange(count)
    for it in range(max_iter + 1):
        q_end = wps[active, -1, :]
        p, jac = _batch_fk_jacobian(kinds, axes, orot, otrans, q_end, frame_joint, frame_offset)
        err = p - goal
        satisfied = np.linalg.norm(err, axis=1) < epsilon
        if satisfied.any():
            done[active[satisfied]] = True
            keep = ~satisfied
            active, q_end, jac, err = active[keep], q_end[keep], jac[keep], err[keep]
        if active.size == 0 or it == max_iter:
            break
        jty = _goal_update(jac, err, r_nn, reg_eye)
        if limit_aware:
            dq_end = -eta * r_nn * jty
            pinned = ((q_end >= upper - limit_tol) & (dq_end > 0.0)) | (
                (q_end <= lower + limit_tol) & (dq_end < 0.0)
            )
            if pinned.any():
                jac = np.where(pinned[:, None, :], 0.0, jac)
                jty = _goal_update(jac, err, r_nn, reg_eye)
        delta = -eta * np.einsum("f,sj->sfj", col, jty)
        wps[np.ix_(active, np.arange(1, n), np.arange(m))] += delta
        if limit_aware:
            wps[active, -1, :] = np.clip(wps[active, -1, :], lower, upper)
    return done
