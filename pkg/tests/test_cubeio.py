import struct

import numpy as np
import numpy.testing as npt
import pytest

from csstap import ArrayGeometry, DataCube, read_cube, write_cube
from csstap.cubeio import cube_to_bytes


def tiny_cube():
    geom = ArrayGeometry(2, 2)
    snaps = np.array(
        [
            [1 + 2j, 3 - 4j, 0.5j, -1.0],
            [0.0, 1.25, -2.5 + 0.75j, 8.0 - 8.0j],
        ],
        dtype=complex,
    )
    return DataCube(geometry=geom, snapshots=snaps)


class TestCubeFormat:
    def test_header_layout(self):
        data = cube_to_bytes(tiny_cube())
        assert data[:4] == b"CSC1"
        version, n, l, m = struct.unpack_from("<IIII", data, 4)
        assert (version, n, l, m) == (1, 2, 2, 2)
        assert data[20:32] == b"\x00" * 12
        assert len(data) == 32 + 2 * 4 * 16

    def test_payload_is_interleaved_little_endian_float64(self):
        # Hand-built oracle for the first sample (1 + 2j).
        data = cube_to_bytes(tiny_cube())
        re, im = struct.unpack_from("<dd", data, 32)
        assert (re, im) == (1.0, 2.0)

    def test_roundtrip_bit_exact(self, tmp_path):
        cube = tiny_cube()
        path = tmp_path / "cube.csc1"
        write_cube(path, cube)
        loaded = read_cube(path)
        npt.assert_array_equal(loaded.snapshots, cube.snapshots)
        assert loaded.geometry.n_elements == 2
        assert loaded.geometry.n_pulses == 2
        # writing the loaded cube reproduces the file byte for byte
        write_cube(tmp_path / "again.csc1", loaded)
        assert (tmp_path / "again.csc1").read_bytes() == path.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.csc1"
        data = bytearray(cube_to_bytes(tiny_cube()))
        data[:4] = b"NOPE"
        path.write_bytes(bytes(data))
        with pytest.raises(ValueError, match="magic"):
            read_cube(path)

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "bad.csc1"
        data = bytearray(cube_to_bytes(tiny_cube()))
        struct.pack_into("<I", data, 4, 9)
        path.write_bytes(bytes(data))
        with pytest.raises(ValueError, match="version"):
            read_cube(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "short.csc1"
        path.write_bytes(cube_to_bytes(tiny_cube())[:-8])
        with pytest.raises(ValueError, match="payload"):
            read_cube(path)

    def test_short_header_rejected(self, tmp_path):
        path = tmp_path / "tiny.csc1"
        path.write_bytes(b"CSC1\x01")
        with pytest.raises(ValueError, match="header"):
            read_cube(path)
