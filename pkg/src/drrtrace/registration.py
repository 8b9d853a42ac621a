"""Slice-to-volume registration by momentum gradient descent.

The six free parameters are (theta, phi, gamma, bx, by, bz); rho is fixed
because the fixed image's source-to-detector distance is assumed known.
Rotations and translations carry different units, so the optimizer uses
one learning rate per group.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GradientUndefinedError, InvalidArgumentError, MetricUndefinedError
from .geometry import DetectorSpec, PoseParameters
from .gradients import loss_and_gradient
from .metrics import loss_value_and_pixel_grad
from .raytrace import render
from .volume import Volume

OPTIMIZED_PARAMS = ("theta", "phi", "gamma", "bx", "by", "bz")

# Half-widths of the initialization windows: the narrow ranges span 90 deg
# for theta/phi, 45 deg for gamma, and 30 mm for shifts; the wide ranges
# span 120 deg for all angles and 60 mm.
NARROW_HALF_WIDTHS = {
    "theta": math.radians(45.0), "phi": math.radians(45.0),
    "gamma": math.radians(22.5),
    "bx": 15.0, "by": 15.0, "bz": 15.0,
}
WIDE_HALF_WIDTHS = {
    "theta": math.radians(60.0), "phi": math.radians(60.0),
    "gamma": math.radians(60.0),
    "bx": 30.0, "by": 30.0, "bz": 30.0,
}


@dataclass
class OptimizerConfig:
    """Momentum gradient-descent settings for 6-DoF pose recovery."""

    lr_rotation: float = 5.3e-2
    lr_translation: float = 7.5e1
    momentum: float = 0.9
    max_iters: int = 250
    converged_threshold: float = -0.999
    loss_kind: str = "neg_zncc"

    def __post_init__(self):
        if self.lr_rotation <= 0 or self.lr_translation <= 0:
            raise InvalidArgumentError("learning rates must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidArgumentError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.max_iters < 1:
            raise InvalidArgumentError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class RegistrationTrace:
    """Per-iteration poses and losses of one registration run.

    ``poses`` is (T, 6) over (theta, phi, gamma, bx, by, bz); rho is fixed
    and recorded once.  ``converged`` is True iff the final loss fell
    below the configured threshold; ``iterations_used`` counts update
    steps taken before the final recorded entry.
    """

    rho: float
    poses: np.ndarray
    losses: np.ndarray
    converged: bool
    failed: bool = False

    @property
    def iterations_used(self) -> int:
        return len(self.losses) - 1

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1])

    def final_pose(self) -> PoseParameters:
        return PoseParameters.from_vector(np.concatenate([[self.rho], self.poses[-1]]))


def register(fixed_image, volume: Volume, pose0: PoseParameters, spec: DetectorSpec,
             config: OptimizerConfig | None = None) -> RegistrationTrace:
    """Recover the pose of ``fixed_image`` starting from ``pose0``.

    pose0's rho must equal the rho that produced the fixed image (the
    problem is 6-DoF).  A pose where the loss or gradient is undefined
    (e.g. every ray misses the volume) marks the run failed rather than
    raising.
    """
    config = config or OptimizerConfig()
    eta = pose0.to_vector()
    beta = np.array([config.lr_rotation] * 3 + [config.lr_translation] * 3)
    velocity = np.zeros(6)
    poses, losses = [], []
    converged = failed = False

    for iteration in range(config.max_iters + 1):
        try:
            record = loss_and_gradient(volume, PoseParameters.from_vector(eta), spec,
                                       fixed_image, loss_kind=config.loss_kind)
        except (MetricUndefinedError, GradientUndefinedError, InvalidArgumentError):
            poses.append(eta[1:].copy())
            losses.append(np.inf)
            failed = True
            break
        poses.append(eta[1:].copy())
        losses.append(record.value)
        if record.value < config.converged_threshold:
            converged = True
            break
        if iteration == config.max_iters:
            break
        velocity = config.momentum * velocity - beta * record.grad[1:]
        eta[1:] += velocity

    return RegistrationTrace(rho=pose0.rho, poses=np.array(poses),
                             losses=np.array(losses), converged=converged, failed=failed)


def sample_initializations(truth: PoseParameters, half_widths, n: int,
                           seed: int) -> list[PoseParameters]:
    """Uniform pose samples centered on ``truth``; deterministic per seed.

    ``half_widths`` is a 7-vector (rho first) of per-parameter half-widths;
    use 0 for parameters that stay fixed.
    """
    half_widths = np.broadcast_to(np.asarray(half_widths, dtype=np.float64), (7,))
    if np.any(half_widths < 0):
        raise InvalidArgumentError(f"half-widths must be non-negative, got {half_widths}")
    center = truth.to_vector()
    rng = np.random.default_rng(seed)
    draws = rng.uniform(center - half_widths, center + half_widths, size=(n, 7))
    return [PoseParameters.from_vector(row) for row in draws]


def default_half_widths(wide: bool = False) -> np.ndarray:
    """Initialization half-widths as a 7-vector (rho fixed at 0)."""
    table = WIDE_HALF_WIDTHS if wide else NARROW_HALF_WIDTHS
    return np.array([0.0] + [table[p] for p in OPTIMIZED_PARAMS])


@dataclass
class LandscapeGrid:
    """Loss values on a 1-D or 2-D grid of pose offsets around a truth pose."""

    axes: tuple[str, ...]
    coords: tuple[np.ndarray, ...] = field(default_factory=tuple)
    losses: np.ndarray = None


def loss_landscape(volume: Volume, truth: PoseParameters, spec: DetectorSpec,
                   loss_kind: str = "neg_zncc", axes=("theta",),
                   samples=41, half_widths=None) -> LandscapeGrid:
    """Sweep the loss over one or two pose parameters around ``truth``.

    The fixed image renders once at the truth pose; each grid pose varies
    only the swept parameters.  Metric-undefined poses record +inf.
    """
    if isinstance(axes, str):
        axes = (axes,)
    axes = tuple(axes)
    if not 1 <= len(axes) <= 2:
        raise InvalidArgumentError(f"axes must name one or two parameters, got {axes}")
    for name in axes:
        if name not in OPTIMIZED_PARAMS:
            raise InvalidArgumentError(f"unknown sweep axis {name!r}, expected one of {OPTIMIZED_PARAMS}")
    samples = np.broadcast_to(np.asarray(samples, dtype=int), (len(axes),))
    if np.any(samples < 3):
        raise InvalidArgumentError(f"grid resolution must be >= 3 per axis, got {samples}")
    if half_widths is None:
        half_widths = [NARROW_HALF_WIDTHS[name] for name in axes]
    half_widths = np.broadcast_to(np.asarray(half_widths, dtype=np.float64), (len(axes),))

    fixed = render(volume, truth, spec)
    center = truth.to_vector()
    param_index = {name: i for i, name in enumerate(OPTIMIZED_PARAMS, start=1)}
    coords = tuple(center[param_index[name]] + np.linspace(-hw, hw, int(ns))
                   for name, hw, ns in zip(axes, half_widths, samples))

    def evaluate(offsets):
        eta = center.copy()
        for name, value in zip(axes, offsets):
            eta[param_index[name]] = value
        try:
            moving = render(volume, PoseParameters.from_vector(eta), spec)
            value, _ = loss_value_and_pixel_grad(loss_kind, moving, fixed)
            return value
        except MetricUndefinedError:
            return np.inf

    if len(axes) == 1:
        losses = np.array([evaluate((c,)) for c in coords[0]])
    else:
        losses = np.array([[evaluate((c0, c1)) for c1 in coords[1]] for c0 in coords[0]])
    return LandscapeGrid(axes=axes, coords=coords, losses=losses)


def write_trace_jsonl(trace: RegistrationTrace, path) -> None:
    """One JSON object per iteration: iter, pose[6], loss."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, (pose, loss) in enumerate(zip(trace.poses, trace.losses)):
            fh.write(json.dumps({"iter": i, "pose": [float(p) for p in pose],
                                 "loss": float(loss)}) + "\n")


def write_landscape_csv(grid: LandscapeGrid, path) -> None:
    """CSV with a header row of coordinates.

    1-D grids: ``<axis>,loss`` rows.  2-D grids: the header row carries the
    second axis's coordinates; each data row starts with the first axis's
    coordinate.
    """
    def fmt(x):
        return repr(float(x))

    with open(path, "w", encoding="utf-8") as fh:
        if len(grid.axes) == 1:
            fh.write(f"{grid.axes[0]},loss\n")
            for c, v in zip(grid.coords[0], grid.losses):
                fh.write(f"{fmt(c)},{fmt(v)}\n")
        else:
            header = ",".join(fmt(c) for c in grid.coords[1])
            fh.write(f"{grid.axes[0]}\\{grid.axes[1]},{header}\n")
            for c0, row in zip(grid.coords[0], grid.losses):
                fh.write(fmt(c0) + "," + ",".join(fmt(v) for v in row) + "\n")
