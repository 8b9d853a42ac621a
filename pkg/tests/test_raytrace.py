import math

import numpy as np
import pytest

import drrtrace as dt
from drrtrace._kernels import available_backends, python_ref
from drrtrace.errors import DegenerateRayError

from conftest import volume_chord_length

BACKENDS = available_backends()


class TestPlaneAlphas:
    def test_direct_substitution(self):
        # b_x=0, dX=1, s_x=-1, p_x=3: alpha(i) = (i + 1)/4
        vol = dt.make_phantom("uniform", (4, 1, 1), 1.0)
        ax, _, _ = dt.plane_alphas([-1.0, 0.5, 0.5], [3.0, 0.5, 0.5], vol)
        assert ax[0] == pytest.approx(0.25)
        assert ax[3] == pytest.approx(1.0)

    def test_parallel_axis_contributes_nothing(self):
        vol = dt.make_phantom("uniform", (1, 1, 1), 1.0)
        ax, ay, az = dt.plane_alphas([0.5, -1.0, 0.5], [0.5, 2.0, 0.5], vol)
        assert ax.size == 0
        assert ay.size == 2
        assert az.size == 0

    def test_diagonal_symmetry(self):
        vol = dt.make_phantom("uniform", (1, 1, 1), 1.0)
        alphas = dt.plane_alphas([-1.0, -1.0, -1.0], [2.0, 2.0, 2.0], vol)
        for axis_alphas in alphas:
            np.testing.assert_allclose(axis_alphas, [1 / 3, 2 / 3])

    def test_degenerate_ray(self):
        vol = dt.make_phantom("uniform", (1, 1, 1), 1.0)
        with pytest.raises(DegenerateRayError):
            dt.plane_alphas([0.5, 0.5, 0.5], [0.5, 0.5, 0.5], vol)


class TestEntryExit:
    def test_axial_through_unit_cube(self, unit_cube):
        amin, amax = dt.entry_exit([-1.0, 0.5, 0.5], [2.0, 0.5, 0.5], unit_cube)
        assert (amin, amax) == pytest.approx((1 / 3, 2 / 3))

    def test_parallel_outside_misses(self, unit_cube):
        amin, amax = dt.entry_exit([-1.0, 5.0, 0.5], [2.0, 5.0, 0.5], unit_cube)
        assert amin >= amax

    def test_diagonal(self, unit_cube):
        amin, amax = dt.entry_exit([-1.0, -1.0, -1.0], [2.0, 2.0, 2.0], unit_cube)
        assert (amin, amax) == pytest.approx((1 / 3, 2 / 3))

    def test_clipped_to_unit_interval(self, unit_cube):
        # source inside the cube: entry clips to 0
        amin, amax = dt.entry_exit([0.5, 0.5, 0.5], [2.0, 0.5, 0.5], unit_cube)
        assert amin == 0.0
        assert amax == pytest.approx(0.5 / 1.5)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("method", ["vectorized", "iterative"])
class TestRayEnergies:
    def test_axial_chord(self, unit_cube, method, backend):
        e = dt.ray_energies(unit_cube, [-1.0, 0.5, 0.5], [[2.0, 0.5, 0.5]],
                            method=method, backend=backend)
        assert e[0] == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_chord(self, unit_cube, method, backend):
        e = dt.ray_energies(unit_cube, [-1.0, -1.0, -1.0], [[2.0, 2.0, 2.0]],
                            method=method, backend=backend)
        assert e[0] == pytest.approx(math.sqrt(3), abs=1e-12)

    def test_miss_is_zero(self, unit_cube, method, backend):
        e = dt.ray_energies(unit_cube, [-1.0, 5.0, 0.5], [[2.0, 5.0, 0.5]],
                            method=method, backend=backend)
        assert e[0] == 0.0

    def test_corner_touch_counts_as_miss(self, unit_cube, method, backend):
        # ray touching only the edge x=y=0: amin == amax == 1/3
        e = dt.ray_energies(unit_cube, [-1.0, 1.0, 0.5], [[2.0, -2.0, 0.5]],
                            method=method, backend=backend)
        assert e[0] == 0.0

    def test_face_graze_uses_inner_voxel(self, unit_cube, method, backend):
        # ray exactly in the z=1 face plane: parallel-inside is inclusive and
        # the clamped lookup attributes the chord to the boundary voxel
        e = dt.ray_energies(unit_cube, [-1.0, 0.5, 1.0], [[2.0, 0.5, 1.0]],
                            method=method, backend=backend)
        assert e[0] == pytest.approx(1.0, abs=1e-12)

    def test_density_scaling_power_of_two(self, method, backend):
        vol = dt.make_phantom("sphere", 8, 1.0)
        doubled = vol.with_data(vol.data * 2.0)
        src = np.array([-5.0, 4.2, 3.9])
        pix = np.array([[12.0, 4.0, 4.1], [12.0, 2.0, 6.0]])
        e1 = dt.ray_energies(vol, src, pix, method=method, backend=backend)
        e2 = dt.ray_energies(doubled, src, pix, method=method, backend=backend)
        np.testing.assert_array_equal(e2, 2.0 * e1)

    def test_uniform_chord_law_random_rays(self, method, backend):
        # 50 random rays against the independent slab oracle
        vol = dt.make_phantom("uniform", (8, 10, 12), (1.0, 1.5, 0.75), 2.5,
                              plane_origin=(-3.0, 1.0, 0.5))
        rng = np.random.default_rng(7)
        src = rng.uniform(-40, -20, size=3)
        pix = rng.uniform([0, -5, -5], [40, 25, 25], size=(50, 3))
        e = dt.ray_energies(vol, src, pix, method=method, backend=backend)
        for k in range(50):
            chord = volume_chord_length(vol, src, pix[k])
            assert e[k] == pytest.approx(2.5 * chord, rel=1e-10, abs=1e-12)

    def test_nan_voxel_propagates(self, method, backend):
        data = np.ones((2, 2, 2))
        data[0, 1, 1] = np.nan
        vol = dt.Volume((2, 2, 2), 1.0, 0.0, data)
        hit_nan = dt.ray_energies(vol, [-1.0, 1.5, 1.5], [[3.0, 1.5, 1.5]],
                                  method=method, backend=backend)
        clean = dt.ray_energies(vol, [-1.0, 0.5, 0.5], [[3.0, 0.5, 0.5]],
                                method=method, backend=backend)
        assert math.isnan(hit_nan[0])
        assert clean[0] == pytest.approx(2.0)

    def test_degenerate_ray_raises(self, unit_cube, method, backend):
        with pytest.raises(DegenerateRayError):
            dt.ray_energies(unit_cube, [0.5, 0.5, 0.5], [[0.5, 0.5, 0.5]],
                            method=method, backend=backend)


class TestRenderOracles:
    def _poses(self):
        # axis-aligned, oblique, and corner-heavy poses
        return [
            dt.PoseParameters(rho=60.0, theta=0.0, phi=math.pi / 2),
            dt.PoseParameters(rho=60.0, theta=0.3, phi=1.2, gamma=0.1),
            dt.PoseParameters(rho=75.0, theta=math.pi / 4, phi=math.pi / 4,
                              gamma=0.7, shift=(3.0, -2.0, 5.0)),
            dt.PoseParameters(rho=60.0, theta=-1.2, phi=2.0, gamma=-0.4),
            dt.PoseParameters(rho=90.0, theta=2.5, phi=0.6, shift=(-4.0, 1.0, 2.0)),
        ]

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_vectorized_matches_iterative(self, small_sphere, small_spec, backend):
        for pose in self._poses():
            a = dt.render(small_sphere, pose, small_spec, backend=backend)
            b = dt.render_iterative(small_sphere, pose, small_spec, backend=backend)
            assert np.abs(a.values - b.values).max() < 1e-9

    def test_backends_agree(self, small_sphere, small_spec, oblique_pose):
        if len(BACKENDS) < 2:
            pytest.skip("compiled backend not built")
        for method, fn in (("vectorized", dt.render), ("iterative", dt.render_iterative)):
            imgs = [fn(small_sphere, oblique_pose, small_spec, backend=b).values
                    for b in BACKENDS]
            assert np.abs(imgs[0] - imgs[1]).max() < 1e-9

    def test_single_voxel_phantom(self):
        # density 5 voxel spanning [1,2]^3 mm in a 3^3 volume; axial pose
        vol = dt.make_phantom("single_voxel", 3, 1.0, 5.0)
        spec = dt.DetectorSpec.for_volume(vol, 5, 5, (1.5, 1.5))
        pose = dt.PoseParameters(rho=50.0, theta=0.0, phi=math.pi / 2)
        img = dt.render(vol, pose, spec)
        rays = dt.detector_grid(pose, spec)
        lo, hi = np.full(3, 1.0), np.full(3, 2.0)
        from conftest import slab_chord_length
        for h in range(5):
            for w in range(5):
                chord = slab_chord_length(rays.source, rays.pixels[h, w], lo, hi)
                assert img.values[h, w] == pytest.approx(5.0 * chord, abs=1e-10)
        # central ray passes straight through the bright voxel
        assert img.values[2, 2] == pytest.approx(5.0, rel=1e-10)
        assert (img.values == 0).sum() > 0

    def test_uniform_volume_analytic_law(self, oblique_pose):
        vol = dt.make_phantom("uniform", 16, 2.0, 1.75)
        spec = dt.DetectorSpec.for_volume(vol, 15, 15, (4.0, 4.0))
        img = dt.render(vol, oblique_pose, spec)
        rays = dt.detector_grid(oblique_pose, spec)
        for h in range(15):
            for w in range(15):
                chord = volume_chord_length(vol, rays.source, rays.pixels[h, w])
                if chord > 0:
                    assert img.values[h, w] == pytest.approx(1.75 * chord, rel=1e-10)
                else:
                    assert img.values[h, w] == 0.0

    def test_translation_covariance(self, small_sphere, small_spec, oblique_pose):
        delta = (7.5, -3.25, 11.0)
        moved_vol = dt.Volume(small_sphere.dims, small_sphere.spacing,
                              tuple(b + d for b, d in zip(small_sphere.plane_origin, delta)),
                              small_sphere.data)
        moved_spec = dt.DetectorSpec(small_spec.height, small_spec.width,
                                     small_spec.pixel_pitch,
                                     tuple(c + d for c, d in zip(small_spec.isocenter, delta)))
        a = dt.render(small_sphere, oblique_pose, small_spec)
        b = dt.render(moved_vol, oblique_pose, moved_spec)
        assert np.abs(a.values - b.values).max() < 1e-10 * max(1.0, a.values.max())

    def test_chunking_is_bit_identical(self, small_sphere, small_spec, oblique_pose):
        full = dt.render(small_sphere, oblique_pose, small_spec)
        for chunk in (1, 7, 64):
            part = dt.render(small_sphere, oblique_pose, small_spec, chunk_size=chunk)
            np.testing.assert_array_equal(part.values, full.values)

    def test_intensities_nonnegative_finite(self, small_sphere, small_spec):
        for pose in self._poses():
            img = dt.render(small_sphere, pose, small_spec)
            assert np.all(np.isfinite(img.values))
            assert np.all(img.values >= 0)

    def test_cross_path_rmse_sphere_100px(self):
        vol = dt.make_phantom("sphere", 64, 4.0)
        spec = dt.DetectorSpec.for_volume(vol, 100, 100, (4.0, 4.0))
        pose = dt.PoseParameters(rho=400.0, theta=0.3, phi=1.2, gamma=0.1)
        a = dt.render(vol, pose, spec)
        b = dt.render_iterative(vol, pose, spec)
        assert dt.rmse_normalized(a, b) < 1e-3


class TestSegmentBookkeeping:
    def test_segment_lengths_telescope(self, small_sphere):
        # sum of all consecutive crossing gaps equals amax - amin
        rng = np.random.default_rng(3)
        src = np.array([-20.0, 11.0, 17.0])
        pixels = rng.uniform([40, -5, -5], [60, 37, 37], size=(64, 3))
        full, _, miss, _ = python_ref._sorted_crossings(
            src, pixels, small_sphere.dims, small_sphere.spacing,
            small_sphere.plane_origin)
        seg_sum = np.diff(full, axis=1).sum(axis=1)
        amin, amax = full[:, 0], full[:, -1]
        hit = ~miss
        assert hit.any()
        np.testing.assert_allclose(seg_sum[hit], (amax - amin)[hit], atol=1e-12)

    def test_corner_ray_no_out_of_bounds(self, unit_cube):
        # exact corner-to-corner diagonal duplicates every crossing 3 ways
        e = dt.ray_energies(unit_cube, [-1.0, -1.0, -1.0], [[2.0, 2.0, 2.0]])
        assert e[0] == pytest.approx(math.sqrt(3), abs=1e-12)

    def test_source_inside_volume(self, small_sphere):
        center = np.asarray(small_sphere.center)
        e = dt.ray_energies(small_sphere, center, [center + [100.0, 3.0, -2.0]])
        assert np.isfinite(e[0])
        assert e[0] > 0


class TestImageIO:
    def test_float_round_trip(self, tmp_path, small_sphere, small_spec, oblique_pose):
        img = dt.render(small_sphere, oblique_pose, small_spec)
        base = str(tmp_path / "drr.f64")
        dt.save_float_image(img, base)
        loaded = dt.load_float_image(base)
        np.testing.assert_array_equal(loaded.values, img.values)

    def test_pgm_header_and_range(self, tmp_path, small_sphere, small_spec, oblique_pose):
        img = dt.render(small_sphere, oblique_pose, small_spec)
        path = tmp_path / "drr.pgm"
        dt.save_pgm(img, path)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n21 21\n65535\n")
        data = np.frombuffer(raw.split(b"65535\n", 1)[1], dtype=">u2")
        assert data.size == 21 * 21
        assert data.min() == 0
        assert data.max() == 65535

    def test_pgm_constant_image(self, tmp_path):
        dt.save_pgm(dt.Image(np.ones((2, 2))), tmp_path / "c.pgm")
        data = np.frombuffer((tmp_path / "c.pgm").read_bytes().split(b"65535\n", 1)[1],
                             dtype=">u2")
        assert np.all(data == 0)
