"""Exact pose gradients of image losses, plus a finite-difference validator.

The gradient is forward-mode: the seven-component tangents of the source
and pixel positions (from the dual-number geometry) are pushed through the
ray-summation kernel, and the loss closes the chain with its analytic
pixel-space gradient.  Sort permutations, kept-crossing sets, and voxel
assignments are treated as locally constant, which makes this the exact
derivative of the implemented primal everywhere except on the
measure-zero set where those discrete choices switch.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import python_ref
from .errors import GradientUndefinedError, InvalidArgumentError
from .geometry import DetectorSpec, PoseParameters, detector_grid_with_tangents
from .metrics import loss_value_and_pixel_grad
from .raytrace import Image, ray_energies_with_tangents
from .volume import Volume

# Poses this close to the polar axis have an ill-conditioned in-plane basis.
MIN_ABS_SIN_PHI = 1e-6


@dataclass
class GradientRecord:
    """A loss value and its gradient against (rho, theta, phi, gamma, bx, by, bz)."""

    value: float
    grad: np.ndarray


def _check_pose(pose: PoseParameters):
    if abs(math.sin(pose.phi)) <= MIN_ABS_SIN_PHI:
        raise GradientUndefinedError(
            f"pose is gimbal-degenerate: |sin(phi)| <= {MIN_ABS_SIN_PHI} at phi={pose.phi}")


def render_with_gradient(volume: Volume, pose: PoseParameters, spec: DetectorSpec,
                         backend: str | None = None):
    """The DRR plus the per-pixel derivatives against the pose.

    Returns ``(image, d_image)`` with ``d_image`` of shape (H, W, 7).  The
    image is bitwise identical to the plain vectorized render.
    """
    _check_pose(pose)
    rays, d_source, d_pixels = detector_grid_with_tangents(pose, spec)
    energy, d_energy = ray_energies_with_tangents(
        volume, rays.source, d_source,
        rays.pixels.reshape(-1, 3), d_pixels.reshape(-1, 3, 7), backend=backend)
    shape = (spec.height, spec.width)
    return Image(energy.reshape(shape)), d_energy.reshape(shape + (7,))


def loss_and_gradient(volume: Volume, pose: PoseParameters, spec: DetectorSpec,
                      fixed_image, loss_kind: str = "neg_zncc",
                      backend: str | None = None) -> GradientRecord:
    """Loss between the rendered DRR and a fixed image, with its exact gradient."""
    image, d_image = render_with_gradient(volume, pose, spec, backend=backend)
    value, pixel_grad = loss_value_and_pixel_grad(loss_kind, image, fixed_image)
    # Fixed reduction order over pixels keeps gradients bit-reproducible.
    grad = pixel_grad.reshape(-1) @ d_image.reshape(-1, 7)
    return GradientRecord(value=value, grad=grad)


def default_fd_steps() -> np.ndarray:
    """Central-difference steps: 1e-5 rad for angles, 1e-3 mm for lengths."""
    return np.array([1e-3, 1e-5, 1e-5, 1e-5, 1e-3, 1e-3, 1e-3])


def finite_difference(loss_fn, eta, steps, scheme: str = "central") -> np.ndarray:
    """Finite-difference gradient of a scalar function of a 7-vector."""
    eta = np.asarray(eta, dtype=np.float64)
    steps = np.broadcast_to(np.asarray(steps, dtype=np.float64), eta.shape)
    if np.any(steps <= 0):
        raise InvalidArgumentError(f"steps must be positive, got {steps}")
    if scheme not in ("forward", "central"):
        raise InvalidArgumentError(f"scheme must be 'forward' or 'central', got {scheme!r}")
    grad = np.zeros_like(eta)
    base = loss_fn(eta) if scheme == "forward" else None
    for i, delta in enumerate(steps):
        bumped = eta.copy()
        bumped[i] += delta
        hi = loss_fn(bumped)
        if scheme == "forward":
            grad[i] = (hi - base) / delta
        else:
            bumped[i] = eta[i] - delta
            lo = loss_fn(bumped)
            grad[i] = (hi - lo) / (2.0 * delta)
    return grad


def finite_difference_gradient(volume: Volume, pose: PoseParameters, spec: DetectorSpec,
                               fixed_image, loss_kind: str = "neg_zncc",
                               steps=None, scheme: str = "central",
                               backend: str | None = None) -> np.ndarray:
    """Finite-difference gradient of the rendered loss; the validation oracle.

    Uses only primal renders, so it is independent of the forward-mode
    tangent machinery it validates.
    """
    from .raytrace import render  # local import to keep module deps one-way

    _check_pose(pose)
    if steps is None:
        steps = default_fd_steps()

    def loss_fn(eta):
        moving = render(volume, PoseParameters.from_vector(eta), spec, backend=backend)
        value, _ = loss_value_and_pixel_grad(loss_kind, moving, fixed_image)
        return value

    return finite_difference(loss_fn, pose.to_vector(), steps, scheme)


def discrete_signature(volume: Volume, pose: PoseParameters, spec: DetectorSpec) -> bytes:
    """Hash of the traversal's discrete structure at a pose.

    Two poses with equal signatures share sort permutations, kept-crossing
    sets, entry/exit selectors, and voxel assignments, so the energy map
    is smooth between them.
    """
    from .geometry import detector_grid

    rays = detector_grid(pose, spec)
    pixels = rays.pixels.reshape(-1, 3)
    digest = hashlib.sha256()
    chunk = 16384
    for start in range(0, pixels.shape[0], chunk):
        labels, use, flat, miss = python_ref.ray_structure(
            volume.flat_data(), volume.dims, volume.spacing, volume.plane_origin,
            rays.source, pixels[start:start + chunk])
        for arr in (labels, use, flat, miss):
            digest.update(np.ascontiguousarray(arr).tobytes())
    return digest.digest()


def detect_fd_boundaries(volume: Volume, pose: PoseParameters, spec: DetectorSpec,
                         steps=None) -> np.ndarray:
    """Which finite-difference stencils straddle a piecewise boundary.

    Component i is True when the discrete traversal structure differs
    anywhere across [eta - steps[i] * e_i, eta + steps[i] * e_i]; exact
    gradients and finite differences may legitimately disagree there.
    """
    if steps is None:
        steps = default_fd_steps()
    steps = np.broadcast_to(np.asarray(steps, dtype=np.float64), (7,))
    eta = pose.to_vector()
    center = discrete_signature(volume, pose, spec)
    out = np.zeros(7, dtype=bool)
    for i in range(7):
        for sign in (+1.0, -1.0):
            bumped = eta.copy()
            bumped[i] += sign * steps[i]
            sig = discrete_signature(volume, PoseParameters.from_vector(bumped), spec)
            if sig != center:
                out[i] = True
                break
    return out
