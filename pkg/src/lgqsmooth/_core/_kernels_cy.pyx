# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels.

Loop-for-loop port of ``_kernels_py``; see that module for the conventions.
Matrix dimensions here are tiny (M <= ~8), so the matmuls are hand-rolled
index loops rather than BLAS calls.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef enum:
    _CONVERGED = 0
    _MAX_STEPS = 1
    _NON_FINITE = 2

CONVERGED = _CONVERGED
MAX_STEPS = _MAX_STEPS
NON_FINITE = _NON_FINITE

ctypedef double f8


cdef void _rhs(const f8[:, ::1] A, const f8[:, ::1] D, const f8[:, ::1] C,
               const f8[:, ::1] Gt, const f8[:, ::1] V,
               f8[:, ::1] K, f8[:, ::1] out, int M, int L) noexcept nogil:
    # out = A V + V A^T + D - K K^T with K = V C^T + Gt
    cdef int i, j, k
    cdef f8 s
    for i in range(M):
        for j in range(L):
            s = Gt[i, j]
            for k in range(M):
                s += V[i, k] * C[j, k]
            K[i, j] = s
    for i in range(M):
        for j in range(M):
            s = D[i, j]
            for k in range(M):
                s += A[i, k] * V[k, j] + V[i, k] * A[j, k]
            for k in range(L):
                s -= K[i, k] * K[j, k]
            out[i, j] = s


cdef void _axpy_into(const f8[:, ::1] V, f8 a, const f8[:, ::1] X,
                     f8[:, ::1] out, int M) noexcept nogil:
    cdef int i, j
    for i in range(M):
        for j in range(M):
            out[i, j] = V[i, j] + a * X[i, j]


cdef void _combine_sym(f8[:, ::1] V, f8 dt6, const f8[:, ::1] k1,
                       const f8[:, ::1] k2, const f8[:, ::1] k3,
                       const f8[:, ::1] k4, int M) noexcept nogil:
    cdef int i, j
    cdef f8 s
    for i in range(M):
        for j in range(M):
            V[i, j] = V[i, j] + dt6 * (k1[i, j] + 2.0 * (k2[i, j] + k3[i, j]) + k4[i, j])
    for i in range(M):
        for j in range(i + 1, M):
            s = 0.5 * (V[i, j] + V[j, i])
            V[i, j] = s
            V[j, i] = s


cdef void _rk4_step(const f8[:, ::1] A, const f8[:, ::1] D, const f8[:, ::1] C,
                    const f8[:, ::1] Gt, f8[:, ::1] V, f8 dt,
                    f8[:, ::1] K, f8[:, ::1] tmp, f8[:, ::1] k1, f8[:, ::1] k2,
                    f8[:, ::1] k3, f8[:, ::1] k4, int M, int L,
                    bint have_k1) noexcept nogil:
    if not have_k1:
        _rhs(A, D, C, Gt, V, K, k1, M, L)
    _axpy_into(V, 0.5 * dt, k1, tmp, M)
    _rhs(A, D, C, Gt, tmp, K, k2, M, L)
    _axpy_into(V, 0.5 * dt, k2, tmp, M)
    _rhs(A, D, C, Gt, tmp, K, k3, M, L)
    _axpy_into(V, dt, k3, tmp, M)
    _rhs(A, D, C, Gt, tmp, K, k4, M, L)
    _combine_sym(V, dt / 6.0, k1, k2, k3, k4, M)


def rk4_cov_grid(const f8[:, ::1] A, const f8[:, ::1] D, const f8[:, ::1] C,
                 const f8[:, ::1] Gt, const f8[:, ::1] V0, f8 dt, Py_ssize_t n_steps):
    cdef int M = A.shape[0]
    cdef int L = C.shape[0]
    out_arr = np.empty((n_steps + 1, M, M))
    cdef f8[:, :, ::1] out = out_arr
    cdef f8[:, ::1] V = np.array(V0)
    cdef f8[:, ::1] K = np.empty((M, L))
    cdef f8[:, ::1] tmp = np.empty((M, M))
    cdef f8[:, ::1] k1 = np.empty((M, M))
    cdef f8[:, ::1] k2 = np.empty((M, M))
    cdef f8[:, ::1] k3 = np.empty((M, M))
    cdef f8[:, ::1] k4 = np.empty((M, M))
    cdef Py_ssize_t k
    cdef int i, j
    with nogil:
        for i in range(M):
            for j in range(M):
                out[0, i, j] = V[i, j]
        for k in range(n_steps):
            _rk4_step(A, D, C, Gt, V, dt, K, tmp, k1, k2, k3, k4, M, L, False)
            for i in range(M):
                for j in range(M):
                    out[k + 1, i, j] = V[i, j]
    return out_arr


def rk4_cov_converge(const f8[:, ::1] A, const f8[:, ::1] D, const f8[:, ::1] C,
                     const f8[:, ::1] Gt, const f8[:, ::1] V0, f8 dt,
                     Py_ssize_t max_steps, f8 tol, int consec):
    cdef int M = A.shape[0]
    cdef int L = C.shape[0]
    V_arr = np.array(V0)
    mid_arr = np.array(V0)
    cdef f8[:, ::1] V = V_arr
    cdef f8[:, ::1] V_mid = mid_arr
    cdef f8[:, ::1] K = np.empty((M, L))
    cdef f8[:, ::1] tmp = np.empty((M, M))
    cdef f8[:, ::1] k1 = np.empty((M, M))
    cdef f8[:, ::1] k2 = np.empty((M, M))
    cdef f8[:, ::1] k3 = np.empty((M, M))
    cdef f8[:, ::1] k4 = np.empty((M, M))
    cdef Py_ssize_t k, mid = max_steps // 2
    cdef Py_ssize_t done = max_steps
    cdef int i, j, streak = 0, status = _MAX_STEPS
    cdef f8 resid = 0.0, s, vnorm
    with nogil:
        for k in range(max_steps):
            _rhs(A, D, C, Gt, V, K, k1, M, L)
            s = 0.0
            vnorm = 0.0
            for i in range(M):
                for j in range(M):
                    s += k1[i, j] * k1[i, j]
                    vnorm += V[i, j] * V[i, j]
            resid = sqrt(s)
            if resid != resid or resid > 1e300:
                status = _NON_FINITE
                done = k
                break
            # tolerance relative to the solution scale, as in the reference
            if resid <= tol * (1.0 + sqrt(vnorm)):
                streak += 1
            else:
                streak = 0
            if streak >= consec:
                status = _CONVERGED
                done = k
                break
            _rk4_step(A, D, C, Gt, V, dt, K, tmp, k1, k2, k3, k4, M, L, True)
            if k == mid:
                for i in range(M):
                    for j in range(M):
                        V_mid[i, j] = V[i, j]
    return V_arr, status, int(done), resid, mid_arr


def rk4_cov_grid_tpath(const f8[:, :, ::1] A_half, const f8[:, :, ::1] D_half,
                       const f8[:, :, ::1] C_half, const f8[:, :, ::1] Gt_half,
                       const f8[:, ::1] V0, f8 dt, Py_ssize_t n_steps, bint backward):
    cdef int M = V0.shape[0]
    cdef int L = C_half.shape[1]
    out_arr = np.empty((n_steps + 1, M, M))
    cdef f8[:, :, ::1] out = out_arr
    cdef f8[:, ::1] V = np.array(V0)
    cdef f8[:, ::1] K = np.empty((M, L))
    cdef f8[:, ::1] tmp = np.empty((M, M))
    cdef f8[:, ::1] k1 = np.empty((M, M))
    cdef f8[:, ::1] k2 = np.empty((M, M))
    cdef f8[:, ::1] k3 = np.empty((M, M))
    cdef f8[:, ::1] k4 = np.empty((M, M))
    cdef Py_ssize_t k, i0, i1, i2
    cdef int i, j
    with nogil:
        if not backward:
            for i in range(M):
                for j in range(M):
                    out[0, i, j] = V[i, j]
            for k in range(n_steps):
                i0 = 2 * k
                i1 = 2 * k + 1
                i2 = 2 * k + 2
                _rhs(A_half[i0], D_half[i0], C_half[i0], Gt_half[i0], V, K, k1, M, L)
                _axpy_into(V, 0.5 * dt, k1, tmp, M)
                _rhs(A_half[i1], D_half[i1], C_half[i1], Gt_half[i1], tmp, K, k2, M, L)
                _axpy_into(V, 0.5 * dt, k2, tmp, M)
                _rhs(A_half[i1], D_half[i1], C_half[i1], Gt_half[i1], tmp, K, k3, M, L)
                _axpy_into(V, dt, k3, tmp, M)
                _rhs(A_half[i2], D_half[i2], C_half[i2], Gt_half[i2], tmp, K, k4, M, L)
                _combine_sym(V, dt / 6.0, k1, k2, k3, k4, M)
                for i in range(M):
                    for j in range(M):
                        out[k + 1, i, j] = V[i, j]
        else:
            for i in range(M):
                for j in range(M):
                    out[n_steps, i, j] = V[i, j]
            for k in range(n_steps - 1, -1, -1):
                i0 = 2 * k + 2
                i1 = 2 * k + 1
                i2 = 2 * k
                _rhs(A_half[i0], D_half[i0], C_half[i0], Gt_half[i0], V, K, k1, M, L)
                _axpy_into(V, 0.5 * dt, k1, tmp, M)
                _rhs(A_half[i1], D_half[i1], C_half[i1], Gt_half[i1], tmp, K, k2, M, L)
                _axpy_into(V, 0.5 * dt, k2, tmp, M)
                _rhs(A_half[i1], D_half[i1], C_half[i1], Gt_half[i1], tmp, K, k3, M, L)
                _axpy_into(V, dt, k3, tmp, M)
                _rhs(A_half[i2], D_half[i2], C_half[i2], Gt_half[i2], tmp, K, k4, M, L)
                _combine_sym(V, dt / 6.0, k1, k2, k3, k4, M)
                for i in range(M):
                    for j in range(M):
                        out[k, i, j] = V[i, j]
    return out_arr


def affine_forward(const f8[:, :, ::1] P, const f8[:, :, ::1] Q,
                   const f8[:, :, ::1] u, const f8[:, ::1] x0):
    cdef Py_ssize_t n = P.shape[0]
    cdef int M = P.shape[1]
    cdef int L = Q.shape[2]
    cdef Py_ssize_t R = x0.shape[0]
    out_arr = np.empty((n + 1, R, M))
    cdef f8[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, r
    cdef int i, j
    cdef f8 s
    with nogil:
        for r in range(R):
            for i in range(M):
                out[0, r, i] = x0[r, i]
        for k in range(n):
            for r in range(R):
                for i in range(M):
                    s = 0.0
                    for j in range(M):
                        s += P[k, i, j] * out[k, r, j]
                    for j in range(L):
                        s += Q[k, i, j] * u[k, r, j]
                    out[k + 1, r, i] = s
    return out_arr


def affine_backward(const f8[:, :, ::1] P, const f8[:, :, ::1] Q,
                    const f8[:, :, ::1] u, const f8[:, ::1] zT):
    cdef Py_ssize_t n = P.shape[0]
    cdef int M = P.shape[1]
    cdef int L = Q.shape[2]
    cdef Py_ssize_t R = zT.shape[0]
    out_arr = np.empty((n + 1, R, M))
    cdef f8[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, r
    cdef int i, j
    cdef f8 s
    with nogil:
        for r in range(R):
            for i in range(M):
                out[n, r, i] = zT[r, i]
        for k in range(n - 1, -1, -1):
            for r in range(R):
                for i in range(M):
                    s = 0.0
                    for j in range(M):
                        s += P[k, i, j] * out[k + 1, r, j]
                    for j in range(L):
                        s += Q[k, i, j] * u[k, r, j]
                    out[k, r, i] = s
    return out_arr
