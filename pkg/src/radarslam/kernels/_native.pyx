# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan-matching and map-update kernels.

Mirrors ``radarslam.kernels.reference`` exactly: half-up rounding,
uniform Chebyshev stepping with consecutive-duplicate removal, and
sequential per-ray application.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, fabs, floor

cnp.import_array()


cdef inline long _round_half_up(double v) nogil:
    return <long>floor(v + 0.5)


def score_offsets(cnp.float32_t[:, ::1] prob,
                  cnp.float64_t[::1] fx, cnp.float64_t[::1] fy,
                  cnp.int64_t[::1] offsets_x, cnp.int64_t[::1] offsets_y,
                  double unknown=0.5):
    """Mean occupancy probability of translated scan points.

    See :func:`radarslam.kernels.reference.score_offsets`.
    """
    cdef Py_ssize_t n_off = offsets_x.shape[0]
    cdef Py_ssize_t n_pts = fx.shape[0]
    cdef Py_ssize_t h = prob.shape[0]
    cdef Py_ssize_t w = prob.shape[1]
    scores = np.empty(n_off, dtype=np.float64)
    cdef cnp.float64_t[::1] out = scores
    cdef Py_ssize_t i, j
    cdef long bx, by, ix, iy, ox, oy
    cdef double acc
    if n_pts == 0:
        scores[:] = unknown
        return scores
    cdef long[::1] base_x = np.empty(n_pts, dtype=np.int64)
    cdef long[::1] base_y = np.empty(n_pts, dtype=np.int64)
    for i in range(n_pts):
        base_x[i] = _round_half_up(fx[i])
        base_y[i] = _round_half_up(fy[i])
    with nogil:
        for j in range(n_off):
            ox = offsets_x[j]
            oy = offsets_y[j]
            acc = 0.0
            for i in range(n_pts):
                ix = base_x[i] + ox
                iy = base_y[i] + oy
                if 0 <= ix < w and 0 <= iy < h:
                    acc += prob[iy, ix]
                else:
                    acc += unknown
            out[j] = acc / n_pts
    return scores


def raytrace_update(cnp.float32_t[:, ::1] logodds, double x0, double y0,
                    cnp.float64_t[::1] end_x, cnp.float64_t[::1] end_y,
                    double l_miss, double l_hit, double l_min, double l_max):
    """Apply one scan's rays to a log-odds grid, in place.

    See :func:`radarslam.kernels.reference.raytrace_update`.
    """
    cdef Py_ssize_t h = logodds.shape[0]
    cdef Py_ssize_t w = logodds.shape[1]
    cdef Py_ssize_t r, n, k
    cdef long cx, cy, ex, ey, px, py
    cdef double x1, y1, dx, dy, t, v
    with nogil:
        for r in range(end_x.shape[0]):
            x1 = end_x[r]
            y1 = end_y[r]
            ex = _round_half_up(x1)
            ey = _round_half_up(y1)
            dx = x1 - x0
            dy = y1 - y0
            n = <Py_ssize_t>ceil(max(fabs(dx), fabs(dy)))
            px = py = -(1 << 30)
            for k in range(n):
                t = (<double>k) / n
                cx = _round_half_up(x0 + dx * t)
                cy = _round_half_up(y0 + dy * t)
                if cx == px and cy == py:
                    continue
                px = cx
                py = cy
                if cx == ex and cy == ey:
                    continue
                if 0 <= cx < w and 0 <= cy < h:
                    v = logodds[cy, cx] + l_miss
                    if v < l_min:
                        v = l_min
                    elif v > l_max:
                        v = l_max
                    logodds[cy, cx] = <float>v
            if 0 <= ex < w and 0 <= ey < h:
                v = logodds[ey, ex] + l_hit
                if v < l_min:
                    v = l_min
                elif v > l_max:
                    v = l_max
                logodds[ey, ex] = <float>v
