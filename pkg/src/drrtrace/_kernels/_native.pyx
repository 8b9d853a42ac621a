# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ray-summation kernels.

Per-ray scalar loops with the same contracts as ``python_ref``: slab
entry/exit clipped to [0, 1], sub-1e-12 segments skipped, voxel lookups
from floored-and-clamped segment midpoints (the iterative variant tracks
voxel indices incrementally instead).
"""

import numpy as np

from libc.math cimport ceil, floor, sqrt, INFINITY

BACKEND_NAME = "native"

cdef double SEGMENT_EPS = 1e-12
cdef int CONST_LABEL = 3


cdef inline bint _entry_exit(const double* s, const double* d, const double* o,
                             const double* sp, const Py_ssize_t* n,
                             double* amin, double* amax,
                             int* lab_min, int* lab_max) noexcept nogil:
    """Slab entry/exit with [0, 1] clip; False signals a miss.

    Selector labels follow first-max/first-min over (x, y, z, clip), the
    same tie order as the numpy reference.
    """
    cdef double cmin[4]
    cdef double cmax[4]
    cdef double a0, a1, hi_plane, t
    cdef int ax, best
    for ax in range(3):
        hi_plane = o[ax] + n[ax] * sp[ax]
        if d[ax] == 0.0:
            if o[ax] <= s[ax] <= hi_plane:
                cmin[ax] = -INFINITY
                cmax[ax] = INFINITY
            else:
                cmin[ax] = INFINITY
                cmax[ax] = -INFINITY
            continue
        a0 = (o[ax] - s[ax]) / d[ax]
        a1 = (hi_plane - s[ax]) / d[ax]
        if a0 > a1:
            t = a0
            a0 = a1
            a1 = t
        cmin[ax] = a0
        cmax[ax] = a1
    cmin[3] = 0.0
    cmax[3] = 1.0
    best = 0
    for ax in range(1, 4):
        if cmin[ax] > cmin[best]:
            best = ax
    lab_min[0] = best
    amin[0] = cmin[best]
    best = 0
    for ax in range(1, 4):
        if cmax[ax] < cmax[best]:
            best = ax
    lab_max[0] = best
    amax[0] = cmax[best]
    return amin[0] < amax[0]


cdef inline Py_ssize_t _voxel_at(const double* s, const double* d, double mid,
                                 const double* o, const double* sp,
                                 const Py_ssize_t* n) noexcept nogil:
    """Flat x-fastest index of the voxel containing the midpoint position."""
    cdef Py_ssize_t idx[3]
    cdef Py_ssize_t i
    cdef int ax
    for ax in range(3):
        i = <Py_ssize_t>floor((s[ax] + mid * d[ax] - o[ax]) / sp[ax])
        if i < 0:
            i = 0
        elif i >= n[ax]:
            i = n[ax] - 1
        idx[ax] = i
    return idx[0] + n[0] * (idx[1] + n[1] * idx[2])


cdef inline int _fill_axis(const double* s, const double* d, const double* o,
                           const double* sp, const Py_ssize_t* n, int ax,
                           double amin, double amax, double* buf) noexcept nogil:
    """Crossing parameters for one axis, ascending, filtered to [amin, amax]."""
    cdef Py_ssize_t i, i0, i1
    cdef long istep
    cdef double a
    cdef int cnt = 0
    if d[ax] == 0.0:
        return 0
    if d[ax] > 0.0:
        i0 = 0
        i1 = n[ax] + 1
        istep = 1
    else:
        i0 = n[ax]
        i1 = -1
        istep = -1
    i = i0
    while i != i1:
        a = (o[ax] + i * sp[ax] - s[ax]) / d[ax]
        if a > amax:
            break
        if a >= amin:
            buf[cnt] = a
            cnt += 1
        i += istep
    return cnt


cdef inline void _alpha_tangent(int label, double alpha, const double* d,
                                const double[:, ::1] d_source,
                                const double[:, :, ::1] d_pixels, Py_ssize_t r,
                                double* out) noexcept nogil:
    """Tangent of a crossing parameter given its selecting axis label."""
    cdef int t
    cdef double inv
    if label >= CONST_LABEL:
        for t in range(7):
            out[t] = 0.0
        return
    inv = 1.0 / d[label]
    for t in range(7):
        out[t] = (-d_source[label, t]
                  - alpha * (d_pixels[r, label, t] - d_source[label, t])) * inv


cdef void _unpack_grid(dims, spacing, origin, Py_ssize_t* n, double* sp, double* o):
    cdef int ax
    for ax in range(3):
        n[ax] = <Py_ssize_t>dims[ax]
        sp[ax] = <double>spacing[ax]
        o[ax] = <double>origin[ax]


def siddon_raysum(flat_data, dims, spacing, origin, source, pixels):
    """Vectorized-Siddon semantics: all crossings, sorted, then accumulated."""
    cdef const double[::1] data = np.ascontiguousarray(flat_data, dtype=np.float64)
    cdef const double[:, ::1] pix = np.ascontiguousarray(
        np.atleast_2d(pixels), dtype=np.float64)
    cdef const double[::1] src = np.ascontiguousarray(source, dtype=np.float64)
    cdef Py_ssize_t n[3]
    cdef double sp[3]
    cdef double o[3]
    _unpack_grid(dims, spacing, origin, n, sp, o)

    cdef Py_ssize_t nrays = pix.shape[0]
    out_arr = np.zeros(nrays)
    cdef double[::1] out = out_arr
    scratch = np.empty((3, max(n[0], max(n[1], n[2])) + 1))
    cdef double[:, ::1] axbuf = scratch

    cdef double s[3]
    cdef double d[3]
    cdef double amin, amax, prev, cur, seg, acc, best
    cdef int lab_min, lab_max, ax, sel
    cdef int cnt[3]
    cdef int p[3]
    cdef Py_ssize_t r
    for ax in range(3):
        s[ax] = src[ax]

    for r in range(nrays):
        for ax in range(3):
            d[ax] = pix[r, ax] - s[ax]
        if not _entry_exit(s, d, o, sp, n, &amin, &amax, &lab_min, &lab_max):
            continue
        for ax in range(3):
            cnt[ax] = _fill_axis(s, d, o, sp, n, ax, amin, amax, &axbuf[ax, 0])
            p[ax] = 0
        acc = 0.0
        prev = amin
        while True:
            sel = -1
            best = INFINITY
            for ax in range(3):
                if p[ax] < cnt[ax] and axbuf[ax, p[ax]] < best:
                    best = axbuf[ax, p[ax]]
                    sel = ax
            cur = amax if sel < 0 else best
            seg = cur - prev
            if seg > SEGMENT_EPS:
                acc += seg * data[_voxel_at(s, d, 0.5 * (prev + cur), o, sp, n)]
            prev = cur
            if sel < 0:
                break
            p[sel] += 1
        out[r] = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) * acc
    return out_arr


def siddon_raysum_grad(flat_data, dims, spacing, origin, source, d_source,
                       pixels, d_pixels):
    """Vectorized-Siddon energies plus 7-component pose tangents.

    Same primal arithmetic (and therefore bitwise-equal energies) as
    :func:`siddon_raysum`; tangents treat the crossing order, kept set,
    and voxel indices as locally constant.
    """
    cdef const double[::1] data = np.ascontiguousarray(flat_data, dtype=np.float64)
    cdef const double[:, ::1] pix = np.ascontiguousarray(
        np.atleast_2d(pixels), dtype=np.float64)
    cdef const double[::1] src = np.ascontiguousarray(source, dtype=np.float64)
    cdef const double[:, ::1] dsrc = np.ascontiguousarray(d_source, dtype=np.float64)
    cdef const double[:, :, ::1] dpix = np.ascontiguousarray(d_pixels, dtype=np.float64)
    cdef Py_ssize_t n[3]
    cdef double sp[3]
    cdef double o[3]
    _unpack_grid(dims, spacing, origin, n, sp, o)

    cdef Py_ssize_t nrays = pix.shape[0]
    out_arr = np.zeros(nrays)
    dout_arr = np.zeros((nrays, 7))
    cdef double[::1] out = out_arr
    cdef double[:, ::1] dout = dout_arr
    scratch = np.empty((3, max(n[0], max(n[1], n[2])) + 1))
    cdef double[:, ::1] axbuf = scratch

    cdef double s[3]
    cdef double d[3]
    cdef double prev_t[7]
    cdef double cur_t[7]
    cdef double dacc[7]
    cdef double amin, amax, prev, cur, seg, acc, best, v, length, dlen
    cdef int lab_min, lab_max, ax, sel, t, lab
    cdef int cnt[3]
    cdef int p[3]
    cdef Py_ssize_t r
    for ax in range(3):
        s[ax] = src[ax]

    for r in range(nrays):
        for ax in range(3):
            d[ax] = pix[r, ax] - s[ax]
        if not _entry_exit(s, d, o, sp, n, &amin, &amax, &lab_min, &lab_max):
            continue
        for ax in range(3):
            cnt[ax] = _fill_axis(s, d, o, sp, n, ax, amin, amax, &axbuf[ax, 0])
            p[ax] = 0
        acc = 0.0
        for t in range(7):
            dacc[t] = 0.0
        prev = amin
        _alpha_tangent(lab_min, amin, d, dsrc, dpix, r, prev_t)
        while True:
            sel = -1
            best = INFINITY
            for ax in range(3):
                if p[ax] < cnt[ax] and axbuf[ax, p[ax]] < best:
                    best = axbuf[ax, p[ax]]
                    sel = ax
            if sel < 0:
                cur = amax
                lab = lab_max
            else:
                cur = best
                lab = sel
            _alpha_tangent(lab, cur, d, dsrc, dpix, r, cur_t)
            seg = cur - prev
            if seg > SEGMENT_EPS:
                v = data[_voxel_at(s, d, 0.5 * (prev + cur), o, sp, n)]
                acc += seg * v
                for t in range(7):
                    dacc[t] += v * (cur_t[t] - prev_t[t])
            prev = cur
            for t in range(7):
                prev_t[t] = cur_t[t]
            if sel < 0:
                break
            p[sel] += 1
        length = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        out[r] = length * acc
        for t in range(7):
            dlen = (d[0] * (dpix[r, 0, t] - dsrc[0, t])
                    + d[1] * (dpix[r, 1, t] - dsrc[1, t])
                    + d[2] * (dpix[r, 2, t] - dsrc[2, t])) / length
            dout[r, t] = dlen * acc + length * dacc[t]
    return out_arr, dout_arr


def jacobs_raysum(flat_data, dims, spacing, origin, source, pixels):
    """Iterative variant: advance one plane crossing at a time per ray.

    Voxel indices are tracked incrementally from the first segment's
    midpoint, the classic formulation; this keeps the implementation
    independent of the sorted-crossing path it serves as an oracle for.
    """
    cdef const double[::1] data = np.ascontiguousarray(flat_data, dtype=np.float64)
    cdef const double[:, ::1] pix = np.ascontiguousarray(
        np.atleast_2d(pixels), dtype=np.float64)
    cdef const double[::1] src = np.ascontiguousarray(source, dtype=np.float64)
    cdef Py_ssize_t n[3]
    cdef double sp[3]
    cdef double o[3]
    _unpack_grid(dims, spacing, origin, n, sp, o)

    cdef Py_ssize_t nrays = pix.shape[0]
    out_arr = np.zeros(nrays)
    cdef double[::1] out = out_arr

    cdef double s[3]
    cdef double d[3]
    cdef double a_next[3]
    cdef double rel
    cdef long ivox[3]
    cdef long inext[3]
    cdef long istep[3]
    cdef long ii, jj, kk
    cdef double amin, amax, prev, cur, seg, acc, mid
    cdef int lab_min, lab_max, ax, sel, guard
    cdef Py_ssize_t r, max_steps, step_count
    for ax in range(3):
        s[ax] = src[ax]
    max_steps = n[0] + n[1] + n[2] + 6

    for r in range(nrays):
        for ax in range(3):
            d[ax] = pix[r, ax] - s[ax]
        if not _entry_exit(s, d, o, sp, n, &amin, &amax, &lab_min, &lab_max):
            continue
        # First crossing strictly after entry, per axis.
        for ax in range(3):
            if d[ax] == 0.0:
                a_next[ax] = INFINITY
                istep[ax] = 0
                inext[ax] = 0
                continue
            rel = (s[ax] + amin * d[ax] - o[ax]) / sp[ax]
            if d[ax] > 0.0:
                istep[ax] = 1
                inext[ax] = <long>floor(rel) + 1
            else:
                istep[ax] = -1
                inext[ax] = <long>ceil(rel) - 1
            a_next[ax] = (o[ax] + inext[ax] * sp[ax] - s[ax]) / d[ax]
            guard = 0
            while a_next[ax] <= amin and guard < 4:
                inext[ax] += istep[ax]
                a_next[ax] = (o[ax] + inext[ax] * sp[ax] - s[ax]) / d[ax]
                guard += 1
        # Initial voxel from the first segment's midpoint.
        cur = amax
        for ax in range(3):
            if a_next[ax] < cur:
                cur = a_next[ax]
        mid = 0.5 * (amin + cur)
        for ax in range(3):
            ivox[ax] = <long>floor((s[ax] + mid * d[ax] - o[ax]) / sp[ax])
        acc = 0.0
        prev = amin
        step_count = 0
        while prev < amax and step_count < max_steps:
            sel = -1
            cur = amax
            for ax in range(3):
                if a_next[ax] < cur:
                    cur = a_next[ax]
                    sel = ax
            seg = cur - prev
            if seg > SEGMENT_EPS:
                ii = ivox[0]
                jj = ivox[1]
                kk = ivox[2]
                if ii < 0: ii = 0
                elif ii >= n[0]: ii = n[0] - 1
                if jj < 0: jj = 0
                elif jj >= n[1]: jj = n[1] - 1
                if kk < 0: kk = 0
                elif kk >= n[2]: kk = n[2] - 1
                acc += seg * data[ii + n[0] * (jj + n[1] * kk)]
            prev = cur
            if sel >= 0 and cur < amax:
                ivox[sel] += istep[sel]
                inext[sel] += istep[sel]
                a_next[sel] = (o[sel] + inext[sel] * sp[sel] - s[sel]) / d[sel]
            step_count += 1
        out[r] = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) * acc
    return out_arr
