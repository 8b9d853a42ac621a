"""Voxel volumes: representation, synthetic phantoms, and file I/O.

A volume is an axis-aligned grid of voxels in physical (mm) coordinates.
Axis ``a`` has ``dims[a]`` voxels of size ``spacing[a]``, bounded by the
``dims[a] + 1`` orthogonal planes ``plane_origin[a] + k * spacing[a]`` for
``k in 0..dims[a]``.  Densities are stored as float64 with x varying
fastest (flat index ``i + nx * (j + ny * k)``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import CorruptFileError, HeaderParseError, InvalidArgumentError

PHANTOM_KINDS = ("uniform", "sphere", "off_center_cube", "single_voxel")

_RAW_DTYPES = {"f32": "<f4", "i16": "<i2", "u8": "u1"}


@dataclass(frozen=True)
class Volume:
    """Immutable 3D scalar voxel grid with physical spacing.

    ``data`` is indexed ``[i, j, k]`` for the x/y/z axes and is kept
    Fortran-ordered so ``data.ravel(order="F")`` is the x-fastest flat
    layout used by the kernels and the ``.dvol`` file format.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    plane_origin: tuple[float, float, float]
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(n) for n in np.broadcast_to(self.dims, (3,)))
        spacing = tuple(float(s) for s in np.broadcast_to(self.spacing, (3,)))
        origin = tuple(float(b) for b in np.broadcast_to(self.plane_origin, (3,)))
        if len(dims) != 3 or any(n < 1 for n in dims):
            raise InvalidArgumentError(f"dims must be three integers >= 1, got {self.dims}")
        if len(spacing) != 3 or any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise InvalidArgumentError(f"spacing must be three positive reals, got {self.spacing}")
        if any(not np.isfinite(b) for b in origin):
            raise InvalidArgumentError(f"plane_origin must be finite, got {self.plane_origin}")
        data = np.asfortranarray(self.data, dtype=np.float64)
        if data.shape != dims:
            if data.size == int(np.prod(dims)):
                data = np.asfortranarray(data.reshape(dims, order="F"))
            else:
                raise InvalidArgumentError(
                    f"data has {data.size} values, expected {int(np.prod(dims))} for dims {dims}"
                )
        data.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "plane_origin", origin)
        object.__setattr__(self, "data", data)

    @property
    def extent(self) -> tuple[float, float, float]:
        """Physical size per axis in mm (dims * spacing)."""
        return tuple(n * s for n, s in zip(self.dims, self.spacing))

    @property
    def center(self) -> tuple[float, float, float]:
        """Physical center of the volume in mm."""
        return tuple(b + 0.5 * n * s for b, n, s in zip(self.plane_origin, self.dims, self.spacing))

    def plane_coords(self, axis: int) -> np.ndarray:
        """Coordinates of the ``dims[axis] + 1`` orthogonal planes on one axis."""
        n = self.dims[axis]
        return self.plane_origin[axis] + np.arange(n + 1) * self.spacing[axis]

    def flat_data(self) -> np.ndarray:
        """The densities in x-fastest flat order (no copy)."""
        return self.data.ravel(order="F")

    def with_data(self, data: np.ndarray) -> "Volume":
        """A new volume with the same grid but different densities."""
        return Volume(self.dims, self.spacing, self.plane_origin, data)


def _as_triple(value, name: str) -> tuple[float, float, float]:
    arr = np.broadcast_to(np.asarray(value, dtype=np.float64), (3,))
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")
    return tuple(float(v) for v in arr)


def make_phantom(kind: str, dims, spacing=1.0, density: float = 1.0,
                 plane_origin=(0.0, 0.0, 0.0)) -> Volume:
    """Build a synthetic test volume.

    Kinds:
      * ``uniform``: every voxel set to ``density``.
      * ``sphere``: voxels whose centers lie within 0.4 * min-extent of the
        volume center.
      * ``off_center_cube``: voxels whose center fractions lie in
        [0.25, 0.5] on every axis.
      * ``single_voxel``: exactly the center voxel.
    """
    if kind not in PHANTOM_KINDS:
        raise InvalidArgumentError(f"unknown phantom kind {kind!r}, expected one of {PHANTOM_KINDS}")
    if np.isscalar(dims):
        dims = (dims, dims, dims)
    dims = tuple(int(n) for n in dims)
    spacing = _as_triple(spacing, "spacing")
    if any(s <= 0 for s in spacing):
        raise InvalidArgumentError(f"spacing must be positive, got {spacing}")
    origin = _as_triple(plane_origin, "plane_origin")
    density = float(density)
    if not np.isfinite(density):
        raise InvalidArgumentError(f"density must be finite, got {density}")

    data = np.zeros(dims, dtype=np.float64, order="F")
    if kind == "uniform":
        data[:] = density
    elif kind == "single_voxel":
        data[dims[0] // 2, dims[1] // 2, dims[2] // 2] = density
    else:
        # Voxel-center coordinates per axis, in mm for the sphere test and
        # as axis fractions for the cube test.
        centers = [origin[a] + (np.arange(dims[a]) + 0.5) * spacing[a] for a in range(3)]
        if kind == "sphere":
            extent = [n * s for n, s in zip(dims, spacing)]
            mid = [b + 0.5 * e for b, e in zip(origin, extent)]
            radius = 0.4 * min(extent)
            r2 = sum(np.square(c - m)[_axis_shape(a)] for a, (c, m) in enumerate(zip(centers, mid)))
            data[r2 <= radius * radius] = density
        else:  # off_center_cube
            inside = [
                (np.arange(dims[a]) + 0.5) / dims[a] for a in range(3)
            ]
            box = [(f >= 0.25) & (f <= 0.5) for f in inside]
            mask = box[0][:, None, None] & box[1][None, :, None] & box[2][None, None, :]
            data[mask] = density
    return Volume(dims, spacing, origin, data)


def _axis_shape(axis: int):
    shape = [None, None, None]
    shape[axis] = slice(None)
    return tuple(shape)


def save_volume(volume: Volume, path) -> None:
    """Write a volume in the ``.dvol`` format.

    Line 1 is a JSON header with keys dims/spacing/origin/dtype terminated
    by a newline; the rest of the file is little-endian float64 densities
    in x-fastest order.
    """
    header = {
        "dims": list(volume.dims),
        "spacing": list(volume.spacing),
        "origin": list(volume.plane_origin),
        "dtype": "f64",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(volume.flat_data().astype("<f8", copy=False).tobytes())


def load_volume(path) -> Volume:
    """Read a ``.dvol`` volume written by :func:`save_volume`."""
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    if not line.endswith(b"\n"):
        raise HeaderParseError(f"{path}: header line is not newline-terminated", len(line))
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        offset = getattr(exc, "pos", getattr(exc, "start", 0))
        raise HeaderParseError(f"{path}: malformed JSON header", offset) from exc
    if not isinstance(header, dict):
        raise HeaderParseError(f"{path}: header is not a JSON object", 0)
    missing = {"dims", "spacing", "origin", "dtype"} - header.keys()
    if missing:
        raise HeaderParseError(f"{path}: header missing keys {sorted(missing)}", len(line))
    if header["dtype"] != "f64":
        raise HeaderParseError(f"{path}: unsupported dtype {header['dtype']!r}", len(line))
    dims = tuple(int(n) for n in header["dims"])
    expected = int(np.prod(dims)) * 8
    if len(payload) != expected:
        raise CorruptFileError(
            f"{path}: payload has {len(payload)} bytes, header declares {expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return Volume(dims, tuple(header["spacing"]), tuple(header["origin"]), data)


def import_raw(path, dims, spacing, plane_origin=(0.0, 0.0, 0.0),
               element_type: str = "f32", clamp_negative: bool = False) -> Volume:
    """Import a headerless little-endian raw voxel file.

    Values are cast directly to float64; there is no Hounsfield rescaling.
    ``clamp_negative`` zeroes negative densities at import time.
    """
    if element_type not in _RAW_DTYPES:
        raise InvalidArgumentError(
            f"element_type must be one of {sorted(_RAW_DTYPES)}, got {element_type!r}"
        )
    if np.isscalar(dims):
        dims = (dims, dims, dims)
    dims = tuple(int(n) for n in dims)
    dtype = np.dtype(_RAW_DTYPES[element_type])
    with open(path, "rb") as fh:
        payload = fh.read()
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(payload) != expected:
        raise CorruptFileError(
            f"{path}: payload has {len(payload)} bytes, expected {expected} "
            f"for dims {dims} and element type {element_type}"
        )
    data = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if clamp_negative:
        data = np.maximum(data, 0.0)
    return Volume(dims, spacing, plane_origin, data)
