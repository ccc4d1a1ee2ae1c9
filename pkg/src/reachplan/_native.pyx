# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for serial-chain kinematics and DTW accumulation.

Mirrors the signatures in ``reachplan._pure``; selected by
``reachplan._backend`` when importable.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef inline void _rodrigues(const double* axis, double theta, double* r) nogil:
    cdef double kx = axis[0], ky = axis[1], kz = axis[2]
    cdef double c = cos(theta), s = sin(theta), v = 1.0 - c
    r[0] = c + kx * kx * v
    r[1] = kx * ky * v - kz * s
    r[2] = kx * kz * v + ky * s
    r[3] = ky * kx * v + kz * s
    r[4] = c + ky * ky * v
    r[5] = ky * kz * v - kx * s
    r[6] = kz * kx * v - ky * s
    r[7] = kz * ky * v + kx * s
    r[8] = c + kz * kz * v


cdef inline void _mat_mul(const double* a, const double* b, double* out) nogil:
    cdef int i, j, k
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = 0.0
            for k in range(3):
                out[3 * i + j] += a[3 * i + k] * b[3 * k + j]


cdef inline void _mat_vec(const double* a, const double* v, double* out) nogil:
    cdef int i, k
    for i in range(3):
        out[i] = 0.0
        for k in range(3):
            out[i] += a[3 * i + k] * v[k]


cdef void _chain_one(
    const signed char* kinds,
    const double* axes,
    const double* orot,
    const double* otrans,
    const double* q,
    int m,
    int last,
    double* out,
) nogil:
    """Walk the chain for one configuration, writing (R|t) rows up to ``last``."""
    cdef double R[9]
    cdef double t[3]
    cdef double tmp[9]
    cdef double rot[9]
    cdef double vec[3]
    cdef int i, k
    R[0] = 1.0; R[1] = 0.0; R[2] = 0.0
    R[3] = 0.0; R[4] = 1.0; R[5] = 0.0
    R[6] = 0.0; R[7] = 0.0; R[8] = 1.0
    t[0] = 0.0; t[1] = 0.0; t[2] = 0.0
    for i in range(last + 1):
        _mat_vec(R, otrans + 3 * i, vec)
        t[0] += vec[0]; t[1] += vec[1]; t[2] += vec[2]
        _mat_mul(R, orot + 9 * i, tmp)
        for k in range(9):
            R[k] = tmp[k]
        if kinds[i] == 1:
            _rodrigues(axes + 3 * i, q[i], rot)
            _mat_mul(R, rot, tmp)
            for k in range(9):
                R[k] = tmp[k]
        else:
            _mat_vec(R, axes + 3 * i, vec)
            t[0] += vec[0] * q[i]; t[1] += vec[1] * q[i]; t[2] += vec[2] * q[i]
        for k in range(9):
            out[12 * i + k] = R[k]
        out[12 * i + 9] = t[0]
        out[12 * i + 10] = t[1]
        out[12 * i + 11] = t[2]


def chain_transforms(kinds, axes, origin_rot, origin_trans, q):
    """World transform of every joint frame for configurations (n, M) -> (n, M, 12)."""
    cdef cnp.ndarray[signed char, ndim=1, mode="c"] kinds_c = np.ascontiguousarray(kinds, dtype=np.int8)
    cdef cnp.ndarray[double, ndim=2, mode="c"] axes_c = np.ascontiguousarray(axes, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3, mode="c"] orot_c = np.ascontiguousarray(origin_rot, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] otrans_c = np.ascontiguousarray(origin_trans, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] q_c = np.ascontiguousarray(q, dtype=np.float64)
    cdef int n = q_c.shape[0]
    cdef int m = q_c.shape[1]
    cdef cnp.ndarray[double, ndim=3, mode="c"] out = np.empty((n, m, 12), dtype=np.float64)
    cdef int s
    with nogil:
        for s in range(n):
            _chain_one(
                &kinds_c[0], &axes_c[0, 0], &orot_c[0, 0, 0], &otrans_c[0, 0],
                &q_c[s, 0], m, m - 1, &out[s, 0, 0],
            )
    return out


def frame_state(kinds, axes, origin_rot, origin_trans, q, joint_index, offset):
    """Position and positional Jacobian of one frame point, single config."""
    cdef cnp.ndarray[signed char, ndim=1, mode="c"] kinds_c = np.ascontiguousarray(kinds, dtype=np.int8)
    cdef cnp.ndarray[double, ndim=2, mode="c"] axes_c = np.ascontiguousarray(axes, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3, mode="c"] orot_c = np.ascontiguousarray(origin_rot, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] otrans_c = np.ascontiguousarray(origin_trans, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] q_c = np.ascontiguousarray(q, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] off_c = np.ascontiguousarray(offset, dtype=np.float64)
    cdef int m = q_c.shape[0]
    cdef int last = joint_index
    cdef cnp.ndarray[double, ndim=2, mode="c"] tf = np.empty((m, 12), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] pos = np.empty(3, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] jac = np.zeros((3, m), dtype=np.float64)
    cdef double vec[3]
    cdef double rel[3]
    cdef double ax[3]
    cdef int i, k
    with nogil:
        _chain_one(
            &kinds_c[0], &axes_c[0, 0], &orot_c[0, 0, 0], &otrans_c[0, 0],
            &q_c[0], m, last, &tf[0, 0],
        )
        _mat_vec(&tf[last, 0], &off_c[0], vec)
        pos[0] = vec[0] + tf[last, 9]
        pos[1] = vec[1] + tf[last, 10]
        pos[2] = vec[2] + tf[last, 11]
        for i in range(last + 1):
            # world axis: joint rotation about its own axis leaves it fixed, so
            # the post-motion frame orientation works for hinges and prismatics
            _mat_vec(&tf[i, 0], &axes_c[i, 0], ax)
            if kinds_c[i] == 1:
                # hinge origin: translation of frame i (motion adds no offset)
                rel[0] = pos[0] - tf[i, 9]
                rel[1] = pos[1] - tf[i, 10]
                rel[2] = pos[2] - tf[i, 11]
                jac[0, i] = ax[1] * rel[2] - ax[2] * rel[1]
                jac[1, i] = ax[2] * rel[0] - ax[0] * rel[2]
                jac[2, i] = ax[0] * rel[1] - ax[1] * rel[0]
            else:
                jac[0, i] = ax[0]
                jac[1, i] = ax[1]
                jac[2, i] = ax[2]
    return pos, jac


cdef int _solve3_spd(const double* a, const double* b, double* x) nogil:
    """Solve a 3x3 symmetric positive-definite system via Cholesky."""
    cdef double l00, l10, l11, l20, l21, l22
    cdef double z0, z1, z2
    if a[0] <= 0.0:
        return 1
    l00 = a[0] ** 0.5
    l10 = a[3] / l00
    l20 = a[6] / l00
    if a[4] - l10 * l10 <= 0.0:
        return 1
    l11 = (a[4] - l10 * l10) ** 0.5
    l21 = (a[7] - l20 * l10) / l11
    if a[8] - l20 * l20 - l21 * l21 <= 0.0:
        return 1
    l22 = (a[8] - l20 * l20 - l21 * l21) ** 0.5
    z0 = b[0] / l00
    z1 = (b[1] - l10 * z0) / l11
    z2 = (b[2] - l20 * z0 - l21 * z1) / l22
    x[2] = z2 / l22
    x[1] = (z1 - l21 * x[2]) / l11
    x[0] = (z0 - l10 * x[1] - l20 * x[2]) / l00
    return 0


cdef void _frame_state_c(
    const signed char* kinds,
    const double* axes,
    const double* orot,
    const double* otrans,
    const double* q,
    int m,
    int last,
    const double* offset,
    double* tf,      # scratch (m, 12)
    double* pos,     # out (3,)
    double* jac,     # out (3, m), zero-filled by caller for cols > last
) nogil:
    cdef double vec[3]
    cdef double ax[3]
    cdef double rel[3]
    cdef int i
    _chain_one(kinds, axes, orot, otrans, q, m, last, tf)
    _mat_vec(tf + 12 * last, offset, vec)
    pos[0] = vec[0] + tf[12 * last + 9]
    pos[1] = vec[1] + tf[12 * last + 10]
    pos[2] = vec[2] + tf[12 * last + 11]
    for i in range(last + 1):
        _mat_vec(tf + 12 * i, axes + 3 * i, ax)
        if kinds[i] == 1:
            rel[0] = pos[0] - tf[12 * i + 9]
            rel[1] = pos[1] - tf[12 * i + 10]
            rel[2] = pos[2] - tf[12 * i + 11]
            jac[0 * m + i] = ax[1] * rel[2] - ax[2] * rel[1]
            jac[1 * m + i] = ax[2] * rel[0] - ax[0] * rel[2]
            jac[2 * m + i] = ax[0] * rel[1] - ax[1] * rel[0]
        else:
            jac[0 * m + i] = ax[0]
            jac[1 * m + i] = ax[1]
            jac[2 * m + i] = ax[2]


cdef void _goal_update_c(
    const double* jac, const double* err, int m, double r_nn, double reg,
    double* amat, double* y, double* jty,
) nogil:
    """jty = J^T (r_nn J J^T + reg I)^-1 err for one 3 x m Jacobian."""
    cdef int i, k, j
    for i in range(3):
        for k in range(3):
            amat[3 * i + k] = 0.0
            for j in range(m):
                amat[3 * i + k] += jac[i * m + j] * jac[k * m + j]
            amat[3 * i + k] *= r_nn
        amat[3 * i + i] += reg
    if _solve3_spd(amat, err, y):
        y[0] = 0.0
        y[1] = 0.0
        y[2] = 0.0
    for j in range(m):
        jty[j] = jac[0 * m + j] * y[0] + jac[1 * m + j] * y[1] + jac[2 * m + j] * y[2]


def project_goal(
    kinds,
    axes,
    origin_rot,
    origin_trans,
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

    Same contract as the fallback: waypoint 0 pinned, all later waypoints
    free, ``col`` the last column of R_free^-1; returns the success mask.
    """
    cdef cnp.ndarray[signed char, ndim=1, mode="c"] kinds_c = np.ascontiguousarray(kinds, dtype=np.int8)
    cdef cnp.ndarray[double, ndim=2, mode="c"] axes_c = np.ascontiguousarray(axes, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3, mode="c"] orot_c = np.ascontiguousarray(origin_rot, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] otrans_c = np.ascontiguousarray(origin_trans, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] lower_c = np.ascontiguousarray(lower, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] upper_c = np.ascontiguousarray(upper, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] off_c = np.ascontiguousarray(frame_offset, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3, mode="c"] wps_c = wps
    cdef cnp.ndarray[double, ndim=1, mode="c"] col_c = np.ascontiguousarray(col, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] goal_c = np.ascontiguousarray(goal, dtype=np.float64)
    cdef int count = wps_c.shape[0]
    cdef int n = wps_c.shape[1]
    cdef int m = wps_c.shape[2]
    cdef int last = frame_joint
    cdef int aware = 1 if limit_aware else 0
    cdef int iters = max_iter
    cdef double eta_c = eta
    cdef double eps2 = epsilon * epsilon
    cdef double reg = regularization
    cdef double r_nn = col_c[col_c.shape[0] - 1]
    cdef double limit_tol = 1e-9
    cdef cnp.ndarray[cnp.uint8_t, ndim=1, mode="c"] done = np.zeros(count, dtype=np.uint8)
    cdef cnp.ndarray[double, ndim=2, mode="c"] tf = np.empty((m, 12), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] jac = np.empty((3, m), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] jty = np.empty(m, dtype=np.float64)
    cdef double pos[3]
    cdef double err[3]
    cdef double amat[9]
    cdef double y[3]
    cdef double e2, dq, scale
    cdef int s, it, i, j, f, pinned_any
    with nogil:
        for s in range(count):
            for it in range(iters + 1):
                for i in range(3):
                    for j in range(m):
                        jac[i, j] = 0.0
                _frame_state_c(
                    &kinds_c[0], &axes_c[0, 0], &orot_c[0, 0, 0], &otrans_c[0, 0],
                    &wps_c[s, n - 1, 0], m, last, &off_c[0], &tf[0, 0], pos, &jac[0, 0],
                )
                err[0] = pos[0] - goal_c[0]
                err[1] = pos[1] - goal_c[1]
                err[2] = pos[2] - goal_c[2]
                e2 = err[0] * err[0] + err[1] * err[1] + err[2] * err[2]
                if e2 < eps2:
                    done[s] = 1
                    break
                if it == iters:
                    break
                _goal_update_c(&jac[0, 0], err, m, r_nn, reg, amat, y, &jty[0])
                if aware:
                    pinned_any = 0
                    for j in range(m):
                        dq = -eta_c * r_nn * jty[j]
                        if (wps_c[s, n - 1, j] >= upper_c[j] - limit_tol and dq > 0.0) or (
                            wps_c[s, n - 1, j] <= lower_c[j] + limit_tol and dq < 0.0
                        ):
                            jac[0, j] = 0.0
                            jac[1, j] = 0.0
                            jac[2, j] = 0.0
                            pinned_any = 1
                    if pinned_any:
                        _goal_update_c(&jac[0, 0], err, m, r_nn, reg, amat, y, &jty[0])
                for f in range(n - 1):
                    scale = -eta_c * col_c[f]
                    for j in range(m):
                        wps_c[s, 1 + f, j] += scale * jty[j]
                if aware:
                    for j in range(m):
                        if wps_c[s, n - 1, j] < lower_c[j]:
                            wps_c[s, n - 1, j] = lower_c[j]
                        elif wps_c[s, n - 1, j] > upper_c[j]:
                            wps_c[s, n - 1, j] = upper_c[j]
    return done.astype(bool)


def dtw_accumulate(cost):
    """Accumulated DTW cost of a pairwise distance matrix (unit steps)."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] cost_c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef int n = cost_c.shape[0]
    cdef int m = cost_c.shape[1]
    cdef cnp.ndarray[double, ndim=2, mode="c"] acc = np.full((n + 1, m + 1), np.inf)
    cdef int i, j
    cdef double best
    acc[0, 0] = 0.0
    with nogil:
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                best = acc[i - 1, j - 1]
                if acc[i - 1, j] < best:
                    best = acc[i - 1, j]
                if acc[i, j - 1] < best:
                    best = acc[i, j - 1]
                acc[i, j] = cost_c[i - 1, j - 1] + best
    return acc[n, m]
