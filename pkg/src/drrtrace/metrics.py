"""Image similarity metrics and their pixel-space gradients."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, MetricUndefinedError
from .raytrace import Image

LOSS_KINDS = ("neg_zncc", "l2")


def _as_values(image) -> np.ndarray:
    if isinstance(image, Image):
        return image.values
    return np.asarray(image, dtype=np.float64)


def _check_pair(a, b):
    a, b = _as_values(a), _as_values(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _standardize(values: np.ndarray, which: str):
    mu = values.mean()
    sigma = np.sqrt(np.mean((values - mu) ** 2))
    if sigma == 0.0:
        raise MetricUndefinedError(f"{which} image has zero variance")
    return (values - mu) / sigma, sigma


def zncc(a, b) -> float:
    """Zero-normalized cross-correlation, in [-1, 1].

    Mean of the product of the standardized images (population standard
    deviation); 1 for positively affinely related images, -1 for
    negatively related ones.
    """
    a, b = _check_pair(a, b)
    a_hat, _ = _standardize(a, "first")
    b_hat, _ = _standardize(b, "second")
    # Rounding can push the mean an ulp past +/-1; keep the documented range.
    return float(min(1.0, max(-1.0, np.mean(a_hat * b_hat))))


def neg_zncc(a, b) -> float:
    """Exactly -zncc(a, b); the registration loss."""
    return -zncc(a, b)


def l2(a, b) -> float:
    """Euclidean norm of the pixelwise difference."""
    a, b = _check_pair(a, b)
    return float(np.linalg.norm((a - b).ravel()))


def rmse_normalized(a, b) -> float:
    """RMSE after min-max normalizing each image to [0, 1] independently."""
    a, b = _check_pair(a, b)
    out = []
    for values, which in ((a, "first"), (b, "second")):
        lo, hi = values.min(), values.max()
        if hi == lo:
            raise MetricUndefinedError(f"{which} image is constant")
        out.append((values - lo) / (hi - lo))
    return float(np.sqrt(np.mean((out[0] - out[1]) ** 2)))


def loss_value_and_pixel_grad(kind: str, moving, fixed):
    """Loss value plus its gradient against the moving image's pixels.

    The value is computed exactly as the plain metric functions compute
    it, so it matches the primal path bit for bit.
    """
    moving_v, fixed_v = _check_pair(moving, fixed)
    if kind == "neg_zncc":
        a_hat, sigma_a = _standardize(moving_v, "moving")
        b_hat, _ = _standardize(fixed_v, "fixed")
        raw = np.mean(a_hat * b_hat)
        value = -float(min(1.0, max(-1.0, raw)))
        grad = -(b_hat - raw * a_hat) / (moving_v.size * sigma_a)
        return value, grad
    if kind == "l2":
        diff = moving_v - fixed_v
        value = float(np.linalg.norm(diff.ravel()))
        if value == 0.0:
            return 0.0, np.zeros_like(diff)
        return value, diff / value
    raise InvalidArgumentError(f"loss kind must be one of {LOSS_KINDS}, got {kind!r}")
