"""DRR rendering: the vectorized Siddon path and the iterative oracle.

Per-pixel energies follow the discrete line-integral model: sort the
parameters at which a ray crosses the grid's orthogonal planes, and sum
voxel densities weighted by segment lengths, scaled by the source-to-pixel
distance so values carry mm * density units.

Rendering is embarrassingly parallel over pixels: rays are processed in
chunks whose results depend only on the rays themselves, so any
partitioning yields bit-identical images.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import get_backend, python_ref
from .errors import DegenerateRayError, InvalidArgumentError
from .geometry import DetectorSpec, PoseParameters, detector_grid
from .volume import Volume

# Rays per kernel call; bounds the numpy backend's candidate-table memory.
RAY_CHUNK = 16384
GRAD_RAY_CHUNK = 2048


@dataclass
class Image:
    """An H x W grid of DRR intensities (mm-weighted attenuation sums)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidArgumentError(f"image values must be 2-D, got shape {values.shape}")
        self.values = values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def plane_alphas(source, pixel, volume: Volume):
    """Ray parameters of all plane intersections, one array per axis.

    A ray parallel to an axis (zero denominator) yields an empty array for
    that axis; entry/exit handling falls to the slab rule.
    """
    source = np.asarray(source, dtype=np.float64)
    pixel = np.asarray(pixel, dtype=np.float64)
    if np.array_equal(source, pixel):
        raise DegenerateRayError(f"source and pixel coincide at {tuple(source)}")
    out = []
    for a in range(3):
        den = pixel[a] - source[a]
        if den == 0.0:
            out.append(np.empty(0))
            continue
        out.append((volume.plane_coords(a) - source[a]) / den)
    return tuple(out)


def entry_exit(source, pixel, volume: Volume) -> tuple[float, float]:
    """Clipped entry/exit parameters of a ray; a miss has amin >= amax."""
    source = np.asarray(source, dtype=np.float64)
    pixel = np.asarray(pixel, dtype=np.float64)
    if np.array_equal(source, pixel):
        raise DegenerateRayError(f"source and pixel coincide at {tuple(source)}")
    amin, amax, _, _ = python_ref.entry_exit_params(
        source[None, :], pixel[None, :], volume.plane_origin, volume.spacing, volume.dims)
    return float(amin[0]), float(amax[0])


def _check_rays(source, pixels):
    source = np.ascontiguousarray(source, dtype=np.float64)
    pixels = np.ascontiguousarray(pixels, dtype=np.float64)
    if np.any(np.all(pixels == source[None, :], axis=1)):
        raise DegenerateRayError("a detector pixel coincides with the source")
    return source, pixels


def ray_energies(volume: Volume, source, pixels, method: str = "vectorized",
                 backend: str | None = None, chunk_size: int | None = None) -> np.ndarray:
    """Energies for an explicit (N, 3) bundle of rays."""
    source, pixels = _check_rays(source, np.atleast_2d(pixels))
    kern = get_backend(backend)
    fn = {"vectorized": kern.siddon_raysum, "iterative": kern.jacobs_raysum}.get(method)
    if fn is None:
        raise InvalidArgumentError(f"method must be 'vectorized' or 'iterative', got {method!r}")
    chunk = chunk_size or RAY_CHUNK
    flat = volume.flat_data()
    out = np.empty(pixels.shape[0])
    for start in range(0, pixels.shape[0], chunk):
        stop = start + chunk
        out[start:stop] = fn(flat, volume.dims, volume.spacing, volume.plane_origin,
                             source, pixels[start:stop])
    return out


def ray_energies_with_tangents(volume: Volume, source, d_source, pixels, d_pixels,
                               backend: str | None = None,
                               chunk_size: int | None = None):
    """Energies plus their derivatives against the pose parameters.

    ``d_source`` (3, 7) and ``d_pixels`` (N, 3, 7) are the endpoint
    tangents; returns ``(energy (N,), d_energy (N, 7))``.  The energies are
    bitwise identical to the vectorized primal path.
    """
    source, pixels = _check_rays(source, np.atleast_2d(pixels))
    d_source = np.ascontiguousarray(d_source, dtype=np.float64)
    d_pixels = np.ascontiguousarray(d_pixels, dtype=np.float64)
    kern = get_backend(backend)
    chunk = chunk_size or GRAD_RAY_CHUNK
    flat = volume.flat_data()
    energy = np.empty(pixels.shape[0])
    d_energy = np.empty((pixels.shape[0], d_source.shape[1]))
    for start in range(0, pixels.shape[0], chunk):
        stop = start + chunk
        energy[start:stop], d_energy[start:stop] = kern.siddon_raysum_grad(
            flat, volume.dims, volume.spacing, volume.plane_origin,
            source, d_source, pixels[start:stop], d_pixels[start:stop])
    return energy, d_energy


def _render(volume, pose, spec, method, backend, chunk_size):
    rays = detector_grid(pose, spec)
    energies = ray_energies(volume, rays.source, rays.pixels.reshape(-1, 3),
                            method=method, backend=backend, chunk_size=chunk_size)
    return Image(energies.reshape(spec.height, spec.width))


def render(volume: Volume, pose: PoseParameters, spec: DetectorSpec,
           backend: str | None = None, chunk_size: int | None = None) -> Image:
    """Render a DRR with the vectorized Siddon formulation."""
    return _render(volume, pose, spec, "vectorized", backend, chunk_size)


def render_iterative(volume: Volume, pose: PoseParameters, spec: DetectorSpec,
                     backend: str | None = None, chunk_size: int | None = None) -> Image:
    """Render a DRR with the iterative (plane-by-plane) variant.

    Same contract as :func:`render`; kept as an independently-implemented
    oracle for it.
    """
    return _render(volume, pose, spec, "iterative", backend, chunk_size)
