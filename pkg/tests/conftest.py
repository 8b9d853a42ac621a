import math

import numpy as np
import pytest

import drrtrace as dt


@pytest.fixture(scope="session")
def small_sphere():
    return dt.make_phantom("sphere", 16, 2.0)


@pytest.fixture(scope="session")
def unit_cube():
    """A single voxel of density 1 spanning [0, 1]^3."""
    return dt.make_phantom("uniform", (1, 1, 1), 1.0, 1.0)


@pytest.fixture(scope="session")
def oblique_pose():
    return dt.PoseParameters(rho=100.0, theta=0.3, phi=1.2, gamma=0.1)


@pytest.fixture(scope="session")
def small_spec(small_sphere):
    return dt.DetectorSpec.for_volume(small_sphere, 21, 21, (4.0, 4.0))


def slab_chord_length(source, pixel, lo, hi):
    """Independent slab-method oracle: chord of segment source->pixel in a box.

    ``lo``/``hi`` are the box corners.  Interval arithmetic only; shares no
    code with the library's entry/exit implementation.
    """
    source = np.asarray(source, float)
    pixel = np.asarray(pixel, float)
    d = pixel - source
    t0, t1 = 0.0, 1.0
    for a in range(3):
        if d[a] == 0.0:
            if not lo[a] <= source[a] <= hi[a]:
                return 0.0
            continue
        ta = (lo[a] - source[a]) / d[a]
        tb = (hi[a] - source[a]) / d[a]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
    if t0 >= t1:
        return 0.0
    return (t1 - t0) * math.dist(source, pixel)


def volume_chord_length(volume, source, pixel):
    lo = np.asarray(volume.plane_origin)
    hi = lo + np.asarray(volume.dims) * np.asarray(volume.spacing)
    return slab_chord_length(source, pixel, lo, hi)
