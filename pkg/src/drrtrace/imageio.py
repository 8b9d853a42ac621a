"""Image export: display PGM and lossless float64 with a JSON sidecar."""

from __future__ import annotations

import json

import numpy as np

from .errors import CorruptFileError, HeaderParseError
from .raytrace import Image


def save_pgm(image: Image, path) -> None:
    """Write a 16-bit binary PGM (P5, maxval 65535), min-max normalized.

    A constant image maps to all zeros.  Normalization is for display
    only; use :func:`save_float_image` for lossless round trips.
    """
    values = image.values
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        scaled = np.round((values - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.zeros_like(values)
    data = scaled.astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def save_float_image(image: Image, path) -> None:
    """Write intensities as little-endian float64, row-major.

    The sidecar ``<path>.json`` holds a one-line JSON header in the same
    convention as the volume format: ``{"dims": [H, W], "dtype": "f64"}``.
    """
    path = str(path)
    with open(path, "wb") as fh:
        fh.write(image.values.astype("<f8", copy=False).tobytes())
    header = {"dims": [image.height, image.width], "dtype": "f64"}
    with open(path + ".json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")


def load_float_image(path) -> Image:
    """Read an image written by :func:`save_float_image`."""
    path = str(path)
    try:
        with open(path + ".json", "r", encoding="utf-8") as fh:
            line = fh.readline()
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise HeaderParseError(f"{path}.json: malformed JSON header", exc.pos) from exc
    if not isinstance(header, dict) or "dims" not in header or header.get("dtype") != "f64":
        raise HeaderParseError(f"{path}.json: expected dims and dtype 'f64'", 0)
    h, w = (int(v) for v in header["dims"])
    with open(path, "rb") as fh:
        payload = fh.read()
    if len(payload) != h * w * 8:
        raise CorruptFileError(
            f"{path}: payload has {len(payload)} bytes, sidecar declares {h * w * 8}")
    return Image(np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(h, w))
