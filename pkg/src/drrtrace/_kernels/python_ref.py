"""Pure-numpy ray-summation kernels.

Reference implementations of the three hot kernels; the compiled module in
``_native.pyx`` mirrors their contracts.  All functions take the volume as
a flat x-fastest float64 array plus grid metadata, the ray sources/pixels
in mm, and return per-ray energies (mm-weighted density sums).

Conventions shared by every kernel:
  * a ray is R(t) = source + t * (pixel - source) with t in [0, 1];
  * entry/exit parameters come from the slab method, clipped to [0, 1];
    a miss (entry >= exit) contributes exactly 0;
  * segments shorter than ``SEGMENT_EPS`` are skipped before the voxel
    lookup so duplicated crossing parameters contribute nothing;
  * voxel indices come from the segment midpoint, floored and clamped.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

SEGMENT_EPS = 1e-12

# Tangent label for crossing parameters that are clipped constants (0 or 1)
# rather than plane intersections; their derivative is zero.
_CONST_LABEL = 3


def _axis_intervals(source, dvec, origin, spacing, dims):
    """Per-axis slab intervals (lo, hi) for every ray; (N, 3) each."""
    lo_planes = np.asarray(origin)
    hi_planes = lo_planes + np.asarray(dims) * np.asarray(spacing)
    with np.errstate(divide="ignore", invalid="ignore"):
        a0 = (lo_planes - source) / dvec
        a1 = (hi_planes - source) / dvec
    lo = np.minimum(a0, a1)
    hi = np.maximum(a0, a1)
    parallel = dvec == 0.0
    if np.any(parallel):
        inside = (source >= lo_planes) & (source <= hi_planes)
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
    return lo, hi


def entry_exit_params(source, pixels, origin, spacing, dims):
    """Clipped entry/exit parameters and the selecting axis labels.

    Returns ``(amin, amax, label_min, label_max)``; labels are 0/1/2 for
    the axis whose face plane was selected and 3 when the [0, 1] clip is
    active.  ``amin >= amax`` signals a miss.
    """
    pixels = np.atleast_2d(pixels)
    src = np.broadcast_to(source, pixels.shape)
    dvec = pixels - src
    lo, hi = _axis_intervals(src, dvec, origin, spacing, dims)
    n = pixels.shape[0]
    zeros = np.zeros((n, 1))
    lo_cand = np.concatenate([lo, zeros], axis=1)
    hi_cand = np.concatenate([hi, zeros + 1.0], axis=1)
    lo_cand = np.nan_to_num(lo_cand, nan=-np.inf)
    hi_cand = np.nan_to_num(hi_cand, nan=np.inf)
    label_min = np.argmax(lo_cand, axis=1)
    label_max = np.argmin(hi_cand, axis=1)
    amin = np.take_along_axis(lo_cand, label_min[:, None], axis=1)[:, 0]
    amax = np.take_along_axis(hi_cand, label_max[:, None], axis=1)[:, 0]
    return amin, amax, label_min, label_max


def _candidate_table(dims, spacing, origin):
    """All plane coordinates concatenated per axis, plus their axis labels."""
    planes = [origin[a] + np.arange(dims[a] + 1) * spacing[a] for a in range(3)]
    labels = np.concatenate([np.full(dims[a] + 1, a, dtype=np.int64) for a in range(3)])
    return np.concatenate(planes), labels


def _sorted_crossings(source, pixels, dims, spacing, origin):
    """The per-ray sorted crossing parameters with sentinels and labels.

    Returns ``(full, labels, miss, dvec)`` where ``full`` is (N, K+2) with
    amin/amax sentinels at both ends, values in non-decreasing order, and
    misses sanitized to all-zero rows.
    """
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    source = np.asarray(source, dtype=np.float64)
    dvec = pixels - source[None, :]

    amin, amax, label_min, label_max = entry_exit_params(
        source[None, :], pixels, origin, spacing, dims)
    miss = ~(amin < amax)
    amin = np.where(miss, 0.0, amin)
    amax = np.where(miss, 0.0, amax)

    planes, plane_labels = _candidate_table(dims, spacing, origin)
    axis_of = plane_labels  # (K,)
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = (planes[None, :] - source[axis_of][None, :]) / dvec[:, axis_of]
    kept = (cand >= amin[:, None]) & (cand <= amax[:, None])
    # Non-kept entries collapse onto the exit sentinel so they sort to the
    # tail and produce zero-length segments.
    cand = np.where(kept, cand, amax[:, None])
    labels = np.where(kept, plane_labels[None, :], label_max[:, None])

    order = np.argsort(cand, axis=1, kind="stable")
    cand = np.take_along_axis(cand, order, axis=1)
    labels = np.take_along_axis(labels, order, axis=1)

    full = np.concatenate([amin[:, None], cand, amax[:, None]], axis=1)
    labels = np.concatenate([label_min[:, None], labels, label_max[:, None]], axis=1)
    return full, labels, miss, dvec


def _segment_voxels(full, source, dvec, dims, spacing, origin):
    """Segment lengths, usable-segment mask, and flat voxel indices."""
    seg = np.diff(full, axis=1)
    mid = 0.5 * (full[:, :-1] + full[:, 1:])
    use = seg > SEGMENT_EPS
    flat = np.zeros(seg.shape, dtype=np.int64)
    stride = 1
    for a in range(3):
        pos = source[a] + mid * dvec[:, a:a + 1]
        idx = np.floor((pos - origin[a]) / spacing[a])
        np.clip(idx, 0, dims[a] - 1, out=idx)
        flat += stride * idx.astype(np.int64)
        stride *= dims[a]
    return seg, use, flat


def siddon_raysum(flat_data, dims, spacing, origin, source, pixels):
    """Vectorized Siddon ray sums: materialize, filter, sort, accumulate."""
    full, _, miss, dvec = _sorted_crossings(source, pixels, dims, spacing, origin)
    seg, use, flat = _segment_voxels(full, np.asarray(source, float), dvec,
                                     dims, spacing, origin)
    vals = flat_data[flat]
    sums = np.sum(np.where(use, seg * vals, 0.0), axis=1)
    energy = np.linalg.norm(dvec, axis=1) * sums
    return np.where(miss, 0.0, energy)


def siddon_raysum_grad(flat_data, dims, spacing, origin, source, d_source,
                       pixels, d_pixels):
    """Ray sums plus their tangents against the pose parameters.

    ``d_source`` is (3, n_tan) and ``d_pixels`` is (N, 3, n_tan): the
    derivatives of the ray endpoints w.r.t. each pose parameter.  The sort
    permutation, the kept-crossing set, and the voxel indices are treated
    as locally constant, so the result is the exact derivative of
    :func:`siddon_raysum` almost everywhere.

    Returns ``(energy, d_energy)`` with ``d_energy`` of shape (N, n_tan);
    the energies are bitwise identical to :func:`siddon_raysum`.
    """
    source = np.asarray(source, dtype=np.float64)
    d_source = np.asarray(d_source, dtype=np.float64)
    d_pixels = np.asarray(d_pixels, dtype=np.float64)

    full, labels, miss, dvec = _sorted_crossings(source, pixels, dims, spacing, origin)
    seg, use, flat = _segment_voxels(full, source, dvec, dims, spacing, origin)
    vals = flat_data[flat]
    sums = np.sum(np.where(use, seg * vals, 0.0), axis=1)
    length = np.linalg.norm(dvec, axis=1)
    energy = np.where(miss, 0.0, length * sums)

    # Tangent of each crossing parameter: for a plane crossing on axis a,
    # alpha = (plane - s_a) / (p_a - s_a) so
    # d_alpha = (-ds_a - alpha * (dp_a - ds_a)) / (p_a - s_a);
    # clipped sentinels (label 3) are constants with zero tangent.
    d_dvec = d_pixels - d_source[None, :, :]                     # (N, 3, T)
    axis = np.minimum(labels, 2)
    const = labels == _CONST_LABEL
    ds_g = d_source[axis, :]                                     # (N, M, T)
    dd_g = np.take_along_axis(d_dvec, axis[:, :, None], axis=1)  # (N, M, T)
    den_g = np.take_along_axis(dvec, axis, axis=1)               # (N, M)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_alpha = (-ds_g - full[:, :, None] * dd_g) / den_g[:, :, None]
    d_alpha[const] = 0.0
    # Miss rows carry arbitrary labels over zero denominators; their
    # energies and tangents are zeroed below, so silence them here too.
    d_alpha[miss] = 0.0

    d_seg = d_alpha[:, 1:, :] - d_alpha[:, :-1, :]
    d_sums = np.sum(np.where(use[:, :, None], vals[:, :, None] * d_seg, 0.0), axis=1)
    with np.errstate(invalid="ignore"):
        d_length = (dvec[:, :, None] * d_dvec).sum(axis=1) / length[:, None]
    d_energy = d_length * sums[:, None] + length[:, None] * d_sums
    d_energy[miss] = 0.0
    return energy, d_energy


def ray_structure(flat_data, dims, spacing, origin, source, pixels):
    """Discrete structure of the traversal, for piecewise-boundary detection.

    Returns arrays that change only when a sort permutation, kept-crossing
    set, entry/exit selector, or voxel assignment changes: hashing them at
    perturbed poses detects non-smooth points of the energy map.
    """
    full, labels, miss, dvec = _sorted_crossings(source, pixels, dims, spacing, origin)
    seg, use, flat = _segment_voxels(full, np.asarray(source, float), dvec,
                                     dims, spacing, origin)
    return labels, use, np.where(use, flat, -1), miss


def jacobs_raysum(flat_data, dims, spacing, origin, source, pixels):
    """Iterative ray sums: advance every ray one plane crossing at a time.

    Partially vectorized: the crossing-parameter updates run in a loop but
    each update applies to all rays at once.
    """
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    source = np.asarray(source, dtype=np.float64)
    dvec = pixels - source[None, :]
    n = pixels.shape[0]

    amin, amax, _, _ = entry_exit_params(source[None, :], pixels, origin, spacing, dims)
    miss = ~(amin < amax)
    amin = np.where(miss, 0.0, amin)
    amax = np.where(miss, 0.0, amax)

    origin = np.asarray(origin, dtype=np.float64)
    spacing = np.asarray(spacing, dtype=np.float64)
    dims_arr = np.asarray(dims, dtype=np.int64)

    parallel = dvec == 0.0
    step = np.where(dvec > 0, 1, -1).astype(np.int64)
    # Index of the first plane crossed strictly after entry, per axis.
    entry_pos = source[None, :] + amin[:, None] * dvec
    rel = (entry_pos - origin[None, :]) / spacing[None, :]
    i_next = np.where(step > 0, np.floor(rel) + 1, np.ceil(rel) - 1).astype(np.int64)

    def next_alphas(i_next):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (origin[None, :] + i_next * spacing[None, :] - source[None, :]) / dvec
        return np.where(parallel, np.inf, a)

    a_next = next_alphas(i_next)
    # Rounding in `rel` can land one plane short of the entry; fix up.
    for _ in range(3):
        behind = ~parallel & (a_next <= amin[:, None])
        if not behind.any():
            break
        i_next += np.where(behind, step, 0)
        a_next = next_alphas(i_next)

    energy = np.zeros(n)
    active = ~miss & (amin < amax)
    a_prev = amin.copy()
    flat_data = np.asarray(flat_data)
    max_steps = int(dims_arr.sum()) + 6
    for _ in range(max_steps):
        if not active.any():
            break
        a_cur = np.minimum(a_next.min(axis=1), amax)
        seg = a_cur - a_prev
        use = active & (seg > SEGMENT_EPS)
        if use.any():
            mid = 0.5 * (a_prev + a_cur)
            pos = source[None, :] + mid[:, None] * dvec
            idx = np.floor((pos - origin[None, :]) / spacing[None, :])
            idx = np.clip(idx, 0, dims_arr[None, :] - 1).astype(np.int64)
            flat = idx[:, 0] + dims_arr[0] * (idx[:, 1] + dims_arr[1] * idx[:, 2])
            energy[use] += seg[use] * flat_data[flat[use]]
        advance = active[:, None] & (a_next <= a_cur[:, None]) & (a_cur < amax)[:, None]
        i_next += np.where(advance, step, 0)
        a_next = np.where(advance, next_alphas(i_next), a_next)
        a_prev = np.where(active, a_cur, a_prev)
        active &= a_cur < amax
    energy *= np.linalg.norm(dvec, axis=1)
    return np.where(miss, 0.0, energy)
