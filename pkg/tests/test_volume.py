import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import drrtrace as dt
from drrtrace.errors import CorruptFileError, HeaderParseError, InvalidArgumentError


class TestMakePhantom:
    def test_uniform_fills_every_voxel(self):
        vol = dt.make_phantom("uniform", (2, 2, 2), 1.0, 1.0)
        assert vol.data.shape == (2, 2, 2)
        assert np.all(vol.data == 1.0)

    def test_single_voxel_sets_center_only(self):
        vol = dt.make_phantom("single_voxel", (3, 3, 3), 1.0, 5.0)
        nonzero = np.argwhere(vol.data != 0)
        assert nonzero.tolist() == [[1, 1, 1]]
        assert vol.data[1, 1, 1] == 5.0

    def test_sphere_volume_fraction(self):
        # Brute-force oracle: count voxel centers within 0.4 * extent of the
        # volume center; must agree with the analytic ball volume fraction
        # (4/3) * pi * 0.4^3 = 0.26808.
        vol = dt.make_phantom("sphere", 64, 1.0)
        centers = (np.arange(64) + 0.5) * 1.0
        x, y, z = np.meshgrid(centers, centers, centers, indexing="ij")
        r2 = (x - 32.0) ** 2 + (y - 32.0) ** 2 + (z - 32.0) ** 2
        expected = (r2 <= (0.4 * 64.0) ** 2).sum()
        assert (vol.data != 0).sum() == expected
        frac = (vol.data != 0).mean()
        assert abs(frac - (4.0 / 3.0) * math.pi * 0.4 ** 3) < 0.01

    def test_off_center_cube_occupies_quarter_band(self):
        vol = dt.make_phantom("off_center_cube", 8, 1.0)
        # center fractions (i + 0.5)/8 in [0.25, 0.5] -> i in {2, 3}
        expect = np.zeros((8, 8, 8))
        expect[2:4, 2:4, 2:4] = 1.0
        np.testing.assert_array_equal(vol.data, expect)

    def test_anisotropic_spacing_sphere_uses_min_extent(self):
        vol = dt.make_phantom("sphere", (16, 16, 8), (1.0, 1.0, 4.0))
        # extent = (16, 16, 32) mm; radius = 0.4 * 16 mm
        assert (vol.data != 0).any()

    @pytest.mark.parametrize("kind", dt.volume.PHANTOM_KINDS)
    def test_phantom_data_finite_and_sized(self, kind):
        vol = dt.make_phantom(kind, (4, 5, 6), 1.5, 2.0)
        assert vol.data.size == 4 * 5 * 6
        assert np.all(np.isfinite(vol.data))

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            dt.make_phantom("uniform", 4, spacing=0.0)
        with pytest.raises(InvalidArgumentError):
            dt.make_phantom("uniform", 4, spacing=-1.0)
        with pytest.raises(InvalidArgumentError):
            dt.make_phantom("blob", 4)
        with pytest.raises(InvalidArgumentError):
            dt.make_phantom("uniform", 4, density=float("nan"))
        with pytest.raises(InvalidArgumentError):
            dt.Volume((0, 1, 1), (1, 1, 1), (0, 0, 0), np.zeros(0))


class TestVolumeType:
    def test_plane_coords_strictly_increasing(self):
        vol = dt.make_phantom("uniform", (3, 4, 5), (0.5, 1.0, 2.0))
        for axis in range(3):
            coords = vol.plane_coords(axis)
            assert len(coords) == vol.dims[axis] + 1
            assert np.all(np.diff(coords) > 0)

    def test_extent_and_center(self):
        vol = dt.make_phantom("uniform", (4, 4, 4), 2.0, plane_origin=(1.0, 2.0, 3.0))
        assert vol.extent == (8.0, 8.0, 8.0)
        assert vol.center == (5.0, 6.0, 7.0)

    def test_data_immutable(self):
        vol = dt.make_phantom("uniform", 2)
        with pytest.raises(ValueError):
            vol.data[0, 0, 0] = 9.0

    def test_flat_data_is_x_fastest(self):
        data = np.arange(2 * 3 * 4, dtype=float).reshape(2, 3, 4, order="F")
        vol = dt.Volume((2, 3, 4), (1, 1, 1), (0, 0, 0), data)
        flat = vol.flat_data()
        # index = i + nx * (j + ny * k)
        assert flat[1 + 2 * (2 + 3 * 3)] == vol.data[1, 2, 3]
        np.testing.assert_array_equal(flat, np.arange(24, dtype=float))


class TestDvolRoundTrip:
    def test_save_load_identity(self, tmp_path):
        vol = dt.make_phantom("sphere", (4, 5, 6), (0.5, 1.5, 2.0), 3.25,
                              plane_origin=(-1.0, 0.0, 2.5))
        path = tmp_path / "phantom.dvol"
        dt.save_volume(vol, path)
        loaded = dt.load_volume(path)
        assert loaded.dims == vol.dims
        assert loaded.spacing == vol.spacing
        assert loaded.plane_origin == vol.plane_origin
        np.testing.assert_array_equal(loaded.data, vol.data)

    @settings(max_examples=20, deadline=None)
    @given(dims=st.tuples(*[st.integers(1, 5)] * 3), seed=st.integers(0, 2 ** 16))
    def test_save_load_identity_random(self, dims, seed, tmp_path_factory):
        rng = np.random.default_rng(seed)
        vol = dt.Volume(dims, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0),
                        rng.normal(size=dims))
        path = tmp_path_factory.mktemp("dvol") / "v.dvol"
        dt.save_volume(vol, path)
        loaded = dt.load_volume(path)
        np.testing.assert_array_equal(loaded.data, vol.data)

    def test_payload_size_mismatch(self, tmp_path):
        path = tmp_path / "bad.dvol"
        header = {"dims": [2, 2, 2], "spacing": [1, 1, 1], "origin": [0, 0, 0],
                  "dtype": "f64"}
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(np.zeros(7).tobytes())  # 7 values, header says 8
        with pytest.raises(CorruptFileError):
            dt.load_volume(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "trunc.dvol"
        path.write_bytes(b'{"dims": [2, 2, ')
        with pytest.raises(HeaderParseError):
            dt.load_volume(path)

    def test_malformed_header_reports_offset(self, tmp_path):
        path = tmp_path / "garbled.dvol"
        path.write_bytes(b'{"dims" [2]}\n' + b"\x00" * 16)
        with pytest.raises(HeaderParseError) as excinfo:
            dt.load_volume(path)
        assert excinfo.value.offset >= 0
        assert "offset" in str(excinfo.value)

    def test_missing_keys(self, tmp_path):
        path = tmp_path / "nokeys.dvol"
        path.write_bytes(b'{"dims": [1, 1, 1]}\n' + b"\x00" * 8)
        with pytest.raises(HeaderParseError):
            dt.load_volume(path)


class TestImportRaw:
    def test_f32(self, tmp_path):
        path = tmp_path / "two.raw"
        path.write_bytes(np.array([1.0, 2.0], dtype="<f4").tobytes())
        vol = dt.import_raw(path, (2, 1, 1), 1.0)
        np.testing.assert_array_equal(vol.flat_data(), [1.0, 2.0])

    def test_i16_direct_cast(self, tmp_path):
        path = tmp_path / "ct.raw"
        path.write_bytes(np.array([-1000, 400], dtype="<i2").tobytes())
        vol = dt.import_raw(path, (2, 1, 1), 1.0, element_type="i16")
        np.testing.assert_array_equal(vol.flat_data(), [-1000.0, 400.0])

    def test_u8(self, tmp_path):
        path = tmp_path / "u8.raw"
        path.write_bytes(bytes([0, 128, 255]))
        vol = dt.import_raw(path, (3, 1, 1), 1.0, element_type="u8")
        np.testing.assert_array_equal(vol.flat_data(), [0.0, 128.0, 255.0])

    def test_clamp_negative(self, tmp_path):
        path = tmp_path / "neg.raw"
        path.write_bytes(np.array([-5, 7], dtype="<i2").tobytes())
        vol = dt.import_raw(path, (2, 1, 1), 1.0, element_type="i16",
                            clamp_negative=True)
        np.testing.assert_array_equal(vol.flat_data(), [0.0, 7.0])

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "short.raw"
        path.write_bytes(b"\x00\x00\x00")  # 3 bytes, 2x1x1 f32 needs 8
        with pytest.raises(CorruptFileError):
            dt.import_raw(path, (2, 1, 1), 1.0)

    def test_unknown_element_type(self, tmp_path):
        path = tmp_path / "x.raw"
        path.write_bytes(b"\x00" * 8)
        with pytest.raises(InvalidArgumentError):
            dt.import_raw(path, (2, 1, 1), 1.0, element_type="f16")
