# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel core.

Mirrors ``_pure`` function-for-function.  Integer hashing is bit-identical
to the numpy fallback; transcendental-based outputs agree to the last ulp
or so (libm vs numpy SIMD rounding).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, ceil, cos, fabs, floor, log, sin, sqrt, tanh

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t sm_mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    """
    cnp.uint64_t sm_mix(cnp.uint64_t z) nogil

cdef cnp.uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef double TWO_NEG53 = 1.1102230246251565e-16  # 2**-53
cdef double TWO_PI = 6.283185307179586


def cell_keys(seed, tag, image_id, cells):
    cdef cnp.int64_t[:, ::1] c = np.ascontiguousarray(cells, dtype=np.int64)
    cdef Py_ssize_t n = c.shape[0], i
    cdef cnp.uint64_t k0 = sm_mix(<cnp.uint64_t> seed + GAMMA + <cnp.uint64_t> tag)
    cdef cnp.uint64_t k1 = sm_mix(k0 + GAMMA + <cnp.uint64_t> image_id)
    out_arr = np.empty(n, dtype=np.uint64)
    cdef cnp.uint64_t[::1] out = out_arr
    cdef cnp.uint64_t kx
    with nogil:
        for i in range(n):
            kx = sm_mix(k1 + GAMMA + <cnp.uint64_t> c[i, 0])
            out[i] = sm_mix(kx + GAMMA + <cnp.uint64_t> c[i, 1])
    return out_arr


def stream_keys(seed, tag, ids):
    cdef cnp.int64_t[::1] v = np.ascontiguousarray(ids, dtype=np.int64)
    cdef Py_ssize_t n = v.shape[0], i
    cdef cnp.uint64_t k0 = sm_mix(<cnp.uint64_t> seed + GAMMA + <cnp.uint64_t> tag)
    out_arr = np.empty(n, dtype=np.uint64)
    cdef cnp.uint64_t[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = sm_mix(k0 + GAMMA + <cnp.uint64_t> v[i])
    return out_arr


def keyed_normals(keys, dim):
    cdef cnp.uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t n = k.shape[0], i, j
    cdef Py_ssize_t pairs = (dim + 1) // 2, d = dim
    out_arr = np.empty((n, dim), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef cnp.uint64_t a, b
    cdef double u1, u2, radius, angle
    with nogil:
        for i in range(n):
            for j in range(pairs):
                a = sm_mix(k[i] + (<cnp.uint64_t> (2 * j + 1)) * GAMMA)
                b = sm_mix(k[i] + (<cnp.uint64_t> (2 * j + 2)) * GAMMA)
                u1 = (<double> (a >> 11) + 1.0) * TWO_NEG53
                u2 = (<double> (b >> 11)) * TWO_NEG53
                radius = sqrt(-2.0 * log(u1))
                angle = TWO_PI * u2
                out[i, 2 * j] = radius * cos(angle)
                if 2 * j + 1 < d:
                    out[i, 2 * j + 1] = radius * sin(angle)
    return out_arr


def disk_mask(seeds, rho, grid_w, grid_h, stride):
    cdef double[:, ::1] s = np.ascontiguousarray(seeds, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], k, ix, iy
    cdef Py_ssize_t gw = grid_w, gh = grid_h
    cdef double rf = rho, st = stride
    cdef double r2 = rf * rf, su, sv, dx, dy
    cdef Py_ssize_t ix0, ix1, iy0, iy1
    mask_arr = np.zeros((gh, gw), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] mask = mask_arr
    with nogil:
        for k in range(n):
            su = s[k, 0]
            sv = s[k, 1]
            ix0 = <Py_ssize_t> ceil((su - rf) / st - 0.5)
            ix1 = <Py_ssize_t> floor((su + rf) / st - 0.5)
            iy0 = <Py_ssize_t> ceil((sv - rf) / st - 0.5)
            iy1 = <Py_ssize_t> floor((sv + rf) / st - 0.5)
            if ix0 < 0:
                ix0 = 0
            if iy0 < 0:
                iy0 = 0
            if ix1 > gw - 1:
                ix1 = gw - 1
            if iy1 > gh - 1:
                iy1 = gh - 1
            for iy in range(iy0, iy1 + 1):
                dy = (<double> iy + 0.5) * st - sv
                for ix in range(ix0, ix1 + 1):
                    dx = (<double> ix + 0.5) * st - su
                    if dx * dx + dy * dy <= r2:
                        mask[iy, ix] = 1
    return mask_arr


def nearest_points(queries, points):
    cdef double[:, ::1] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = q.shape[0], m = p.shape[0], i, j
    idx_arr = np.full(n, -1, dtype=np.int64)
    d2_arr = np.full(n, np.inf, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[::1] d2 = d2_arr
    cdef double best, dist, dx, dy
    cdef Py_ssize_t best_j
    if m == 0 or n == 0:
        return idx_arr, d2_arr
    with nogil:
        for i in range(n):
            best = INFINITY
            best_j = -1
            for j in range(m):
                dx = q[i, 0] - p[j, 0]
                dy = q[i, 1] - p[j, 1]
                dist = dx * dx + dy * dy
                if dist < best:
                    best = dist
                    best_j = j
            idx[i] = best_j
            d2[i] = best
    return idx_arr, d2_arr


def reproj_loss_grad(pred, rot, trans, intr, target, fallback, z_min, tau, soft):
    cdef double[:, ::1] x = np.ascontiguousarray(pred, dtype=np.float64)
    cdef double[:, :, ::1] R = np.ascontiguousarray(rot, dtype=np.float64)
    cdef double[:, ::1] t = np.ascontiguousarray(trans, dtype=np.float64)
    cdef double[:, ::1] K = np.ascontiguousarray(intr, dtype=np.float64)
    cdef double[:, ::1] y = np.ascontiguousarray(target, dtype=np.float64)
    cdef double[:, ::1] fb = np.ascontiguousarray(fallback, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i, j
    cdef double zmin = z_min, tau_c = tau
    cdef bint soft_c = soft
    loss_arr = np.empty(n, dtype=np.float64)
    grad_arr = np.empty((n, 3), dtype=np.float64)
    cdef double[::1] loss = loss_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double xc0, xc1, xc2, fx, fy, du, dv, r, th, dldr, a, b
    cdef double g0, g1, g2, d0, d1, d2v
    with nogil:
        for i in range(n):
            xc0 = R[i, 0, 0] * x[i, 0] + R[i, 0, 1] * x[i, 1] + R[i, 0, 2] * x[i, 2] + t[i, 0]
            xc1 = R[i, 1, 0] * x[i, 0] + R[i, 1, 1] * x[i, 1] + R[i, 1, 2] * x[i, 2] + t[i, 1]
            xc2 = R[i, 2, 0] * x[i, 0] + R[i, 2, 1] * x[i, 1] + R[i, 2, 2] * x[i, 2] + t[i, 2]
            if xc2 > zmin:
                fx = K[i, 0]
                fy = K[i, 1]
                du = fx * xc0 / xc2 + K[i, 2] - y[i, 0]
                dv = fy * xc1 / xc2 + K[i, 3] - y[i, 1]
                r = fabs(du) + fabs(dv)
                if soft_c:
                    th = tanh(r / tau_c)
                    loss[i] = tau_c * th
                    dldr = 1.0 - th * th
                else:
                    loss[i] = r if r < tau_c else tau_c
                    dldr = 1.0 if r < tau_c else 0.0
                a = dldr * (0.0 if du == 0.0 else (1.0 if du > 0.0 else -1.0))
                b = dldr * (0.0 if dv == 0.0 else (1.0 if dv > 0.0 else -1.0))
                g0 = a * fx / xc2
                g1 = b * fy / xc2
                g2 = -(a * fx * xc0 + b * fy * xc1) / (xc2 * xc2)
                for j in range(3):
                    grad[i, j] = R[i, 0, j] * g0 + R[i, 1, j] * g1 + R[i, 2, j] * g2
            else:
                d0 = x[i, 0] - fb[i, 0]
                d1 = x[i, 1] - fb[i, 1]
                d2v = x[i, 2] - fb[i, 2]
                loss[i] = fabs(d0) + fabs(d1) + fabs(d2v)
                grad[i, 0] = 0.0 if d0 == 0.0 else (1.0 if d0 > 0.0 else -1.0)
                grad[i, 1] = 0.0 if d1 == 0.0 else (1.0 if d1 > 0.0 else -1.0)
                grad[i, 2] = 0.0 if d2v == 0.0 else (1.0 if d2v > 0.0 else -1.0)
    return loss_arr, grad_arr


def reproj_residual_l1(pred, rot, trans, intr, target, z_min):
    cdef double[:, ::1] x = np.ascontiguousarray(pred, dtype=np.float64)
    cdef double[:, :, ::1] R = np.ascontiguousarray(rot, dtype=np.float64)
    cdef double[:, ::1] t = np.ascontiguousarray(trans, dtype=np.float64)
    cdef double[:, ::1] K = np.ascontiguousarray(intr, dtype=np.float64)
    cdef double[:, ::1] y = np.ascontiguousarray(target, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i
    cdef double zmin = z_min
    res_arr = np.zeros(n, dtype=np.float64)
    valid_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] res = res_arr
    cdef cnp.uint8_t[::1] valid = valid_arr
    cdef double xc0, xc1, xc2, du, dv
    with nogil:
        for i in range(n):
            xc0 = R[i, 0, 0] * x[i, 0] + R[i, 0, 1] * x[i, 1] + R[i, 0, 2] * x[i, 2] + t[i, 0]
            xc1 = R[i, 1, 0] * x[i, 0] + R[i, 1, 1] * x[i, 1] + R[i, 1, 2] * x[i, 2] + t[i, 1]
            xc2 = R[i, 2, 0] * x[i, 0] + R[i, 2, 1] * x[i, 1] + R[i, 2, 2] * x[i, 2] + t[i, 2]
            if xc2 > zmin:
                du = K[i, 0] * xc0 / xc2 + K[i, 2] - y[i, 0]
                dv = K[i, 1] * xc1 / xc2 + K[i, 3] - y[i, 1]
                res[i] = fabs(du) + fabs(dv)
                valid[i] = 1
    return res_arr, valid_arr
