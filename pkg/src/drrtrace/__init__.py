"""drrtrace: differentiable digitally reconstructed radiographs.

Renders DRRs from voxel volumes with a vectorized Siddon formulation,
computes exact gradients of image-similarity losses against the seven
source/detector pose parameters, and solves slice-to-volume registration
by momentum gradient descent.
"""

from ._kernels import DEFAULT_BACKEND, available_backends, get_backend
from .errors import (CorruptFileError, DegenerateRayError, DrrTraceError,
                     GradientUndefinedError, HeaderParseError,
                     InvalidArgumentError, MetricUndefinedError)
from .geometry import (DetectorSpec, PoseParameters, RaySet, detector_grid,
                       detector_grid_with_tangents, source_position)
from .gradients import (GradientRecord, default_fd_steps, detect_fd_boundaries,
                        finite_difference, finite_difference_gradient,
                        loss_and_gradient, render_with_gradient)
from .imageio import load_float_image, save_float_image, save_pgm
from .metrics import l2, neg_zncc, rmse_normalized, zncc
from .raytrace import (Image, entry_exit, plane_alphas, ray_energies, render,
                       render_iterative)
from .registration import (LandscapeGrid, OptimizerConfig, RegistrationTrace,
                           default_half_widths, loss_landscape, register,
                           sample_initializations, write_landscape_csv,
                           write_trace_jsonl)
from .volume import Volume, import_raw, load_volume, make_phantom, save_volume

__version__ = "0.1.0"

__all__ = [
    "CorruptFileError", "DegenerateRayError", "DrrTraceError",
    "GradientUndefinedError", "HeaderParseError", "InvalidArgumentError",
    "MetricUndefinedError",
    "Volume", "make_phantom", "save_volume", "load_volume", "import_raw",
    "PoseParameters", "DetectorSpec", "RaySet", "source_position",
    "detector_grid", "detector_grid_with_tangents",
    "Image", "render", "render_iterative", "ray_energies", "plane_alphas",
    "entry_exit",
    "save_pgm", "save_float_image", "load_float_image",
    "zncc", "neg_zncc", "l2", "rmse_normalized",
    "GradientRecord", "loss_and_gradient", "render_with_gradient",
    "finite_difference", "finite_difference_gradient", "default_fd_steps",
    "detect_fd_boundaries",
    "OptimizerConfig", "RegistrationTrace", "register",
    "sample_initializations", "loss_landscape", "LandscapeGrid",
    "default_half_widths", "write_trace_jsonl", "write_landscape_csv",
    "DEFAULT_BACKEND", "available_backends", "get_backend",
    "__version__",
]
