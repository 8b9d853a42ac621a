"""Pose parameters and the source/detector geometry they induce.

The seven pose parameters are eta = (rho, theta, phi, gamma, bx, by, bz).
The X-ray source orbits a sphere of radius rho around the isocenter:

    s = isocenter + shift + rho * u(theta, phi)

with u(theta, phi) = (sin(phi)cos(theta), sin(phi)sin(theta), cos(phi)),
phi the polar angle from +z and theta the azimuth from +x.  The detector
plane is tangent to the sphere at the antipode, so its center is
c = isocenter + shift - rho * u and the source-to-detector distance is
2 * rho.  gamma rolls the in-plane pixel basis about the detector normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dual
from .errors import InvalidArgumentError

POSE_PARAM_NAMES = ("rho", "theta", "phi", "gamma", "bx", "by", "bz")

# Indices of the angular (radian) and translational (mm) parameters in the
# seven-vector; used for per-group learning rates and step sizes.
ANGLE_INDICES = (1, 2, 3)
SHIFT_INDICES = (0, 4, 5, 6)


@dataclass(frozen=True)
class PoseParameters:
    """The seven-parameter source/detector pose.

    rho is half the source-to-detector distance (mm), theta/phi/gamma are
    radians, and shift is a rigid translation (mm) applied to both the
    source and the detector.
    """

    rho: float
    theta: float
    phi: float
    gamma: float = 0.0
    shift: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        vals = (self.rho, self.theta, self.phi, self.gamma, *self.shift)
        if len(vals) != 7 or not all(np.isfinite(v) for v in vals):
            raise InvalidArgumentError(f"pose parameters must be 7 finite reals, got {self}")
        if self.rho <= 0:
            raise InvalidArgumentError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "shift", tuple(float(v) for v in self.shift))

    def to_vector(self) -> np.ndarray:
        """(rho, theta, phi, gamma, bx, by, bz) as a 7-vector."""
        return np.array([self.rho, self.theta, self.phi, self.gamma, *self.shift])

    @classmethod
    def from_vector(cls, eta) -> "PoseParameters":
        eta = np.asarray(eta, dtype=np.float64)
        if eta.shape != (7,):
            raise InvalidArgumentError(f"pose vector must have 7 components, got shape {eta.shape}")
        return cls(eta[0], eta[1], eta[2], eta[3], tuple(eta[4:7]))


@dataclass(frozen=True)
class DetectorSpec:
    """Fixed imaging constants: detector size, pixel pitch, and isocenter."""

    height: int
    width: int
    pixel_pitch: tuple[float, float] = (1.0, 1.0)
    isocenter: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise InvalidArgumentError(f"detector must be at least 1x1, got {self.height}x{self.width}")
        pitch = self.pixel_pitch
        if np.isscalar(pitch):
            pitch = (pitch, pitch)
        pitch = tuple(float(p) for p in pitch)
        if any(p <= 0 or not np.isfinite(p) for p in pitch):
            raise InvalidArgumentError(f"pixel pitch must be positive, got {self.pixel_pitch}")
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "pixel_pitch", pitch)
        object.__setattr__(self, "isocenter", tuple(float(v) for v in self.isocenter))

    @classmethod
    def for_volume(cls, volume, height: int, width: int, pixel_pitch=(1.0, 1.0)) -> "DetectorSpec":
        """A spec whose isocenter is the volume's physical center."""
        return cls(height, width, pixel_pitch, volume.center)


@dataclass
class RaySet:
    """A source point and the H x W grid of detector pixel positions (mm)."""

    source: np.ndarray
    pixels: np.ndarray

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def detector_center(self) -> np.ndarray:
        return self.pixels.reshape(-1, 3).mean(axis=0)


def _pose_frame(pose: PoseParameters, seed_tangents: bool):
    """The source, detector center, and in-plane basis as dual 3-vectors.

    Single source of truth for the pose-to-frame math: the plain geometry
    functions read the value parts, the gradient path reads the tangents.
    """
    n = 7
    if seed_tangents:
        eta = [dual.Dual.variable(v, i, n) for i, v in enumerate(pose.to_vector())]
    else:
        eta = [dual.Dual.constant(v, n) for v in pose.to_vector()]
    rho, theta, phi, gamma = eta[0], eta[1], eta[2], eta[3]
    shift = eta[4:7]

    st, ct = dual.sin(theta), dual.cos(theta)
    sp, cp = dual.sin(phi), dual.cos(phi)
    sg, cg = dual.sin(gamma), dual.cos(gamma)

    u = [sp * ct, sp * st, cp]                 # detector normal, points at the source
    e_theta = [-st, ct, dual.Dual.constant(0.0, n)]
    e_phi = [cp * ct, cp * st, -sp]

    source = [shift[a] + rho * u[a] for a in range(3)]
    center = [shift[a] - rho * u[a] for a in range(3)]
    # Roll the in-plane basis about the normal; the sign is fixed so that at
    # the canonical pose (theta=0, phi=pi/2) a quarter turn maps pixel (0, 0)
    # onto where pixel (0, W-1) was.
    e1 = [cg * e_phi[a] - sg * e_theta[a] for a in range(3)]
    e2 = [cg * e_theta[a] + sg * e_phi[a] for a in range(3)]
    return source, center, e1, e2


def _pixel_offsets(spec: DetectorSpec):
    """In-plane pixel offsets from the detector center, in mm."""
    pitch_x, pitch_y = spec.pixel_pitch
    a_h = (np.arange(spec.height) - (spec.height - 1) / 2.0) * pitch_y
    a_w = (np.arange(spec.width) - (spec.width - 1) / 2.0) * pitch_x
    return a_h, a_w


def source_position(pose: PoseParameters, spec: DetectorSpec) -> np.ndarray:
    """Position of the X-ray point source in volume coordinates (mm)."""
    source, _, _, _ = _pose_frame(pose, seed_tangents=False)
    return np.asarray(spec.isocenter) + dual.values(source)


def detector_grid(pose: PoseParameters, spec: DetectorSpec) -> RaySet:
    """The source plus all detector pixel positions for a pose."""
    source, center, e1, e2 = _pose_frame(pose, seed_tangents=False)
    iso = np.asarray(spec.isocenter)
    a_h, a_w = _pixel_offsets(spec)
    c = iso + dual.values(center)
    pixels = (c[None, None, :]
              + a_h[:, None, None] * dual.values(e1)[None, None, :]
              + a_w[None, :, None] * dual.values(e2)[None, None, :])
    return RaySet(source=iso + dual.values(source), pixels=pixels)


def detector_grid_with_tangents(pose: PoseParameters, spec: DetectorSpec):
    """RaySet plus the derivatives of source and pixels w.r.t. the pose.

    Returns ``(rayset, d_source, d_pixels)`` with ``d_source`` of shape
    (3, 7) and ``d_pixels`` of shape (H, W, 3, 7), ordered like
    :data:`POSE_PARAM_NAMES`.
    """
    source, center, e1, e2 = _pose_frame(pose, seed_tangents=True)
    iso = np.asarray(spec.isocenter)
    a_h, a_w = _pixel_offsets(spec)

    c_val = iso + dual.values(center)
    e1_val, e2_val = dual.values(e1), dual.values(e2)
    pixels = (c_val[None, None, :]
              + a_h[:, None, None] * e1_val[None, None, :]
              + a_w[None, :, None] * e2_val[None, None, :])
    rayset = RaySet(source=iso + dual.values(source), pixels=pixels)

    d_source = dual.tangents(source)                       # (3, 7)
    d_center = dual.tangents(center)
    d_e1, d_e2 = dual.tangents(e1), dual.tangents(e2)      # (3, 7)
    d_pixels = (d_center[None, None, :, :]
                + a_h[:, None, None, None] * d_e1[None, None, :, :]
                + a_w[None, :, None, None] * d_e2[None, None, :, :])
    return rayset, d_source, d_pixels
