"""Binary data-cube file format "CSC1".

Layout (little-endian throughout):

* 32-byte header: magic ``CSC1`` (4 ASCII bytes), format version u32,
  N u32, L u32, M u32, 12 reserved zero bytes.
* payload: M*N*L complex samples as interleaved (real, imag) float64,
  range-cell-major, then element, then pulse (the snapshot layout).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .scene import DataCube
from .steering import ArrayGeometry

__all__ = ["write_cube", "read_cube", "CUBE_MAGIC", "CUBE_FORMAT_VERSION"]

CUBE_MAGIC = b"CSC1"
CUBE_FORMAT_VERSION = 1
_HEADER_STRUCT = struct.Struct("<4sIIII12x")
assert _HEADER_STRUCT.size == 32


def cube_to_bytes(cube: DataCube) -> bytes:
    """Serialize a cube to the CSC1 byte layout."""
    geometry = cube.geometry
    header = _HEADER_STRUCT.pack(
        CUBE_MAGIC,
        CUBE_FORMAT_VERSION,
        geometry.n_elements,
        geometry.n_pulses,
        cube.n_range_cells,
    )
    samples = np.ascontiguousarray(cube.snapshots, dtype="<c16")
    return header + samples.tobytes()


def write_cube(path: str | Path, cube: DataCube) -> None:
    Path(path).write_bytes(cube_to_bytes(cube))


def read_cube(
    path: str | Path, spacing_wavelengths: float = 0.5
) -> DataCube:
    """Read a CSC1 cube file.

    The file does not carry the element spacing; pass it explicitly when it
    differs from half-wavelength.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER_STRUCT.size:
        raise ValueError(f"{path}: file shorter than the 32-byte CSC1 header")
    magic, version, n_elements, n_pulses, n_cells = _HEADER_STRUCT.unpack_from(data)
    if magic != CUBE_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {CUBE_MAGIC!r}")
    if version != CUBE_FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported format version {version}, "
            f"expected {CUBE_FORMAT_VERSION}"
        )
    expected = n_cells * n_elements * n_pulses * 16
    payload = data[_HEADER_STRUCT.size :]
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    snapshots = np.frombuffer(payload, dtype="<c16").reshape(
        n_cells, n_elements * n_pulses
    )
    geometry = ArrayGeometry(
        n_elements=n_elements,
        n_pulses=n_pulses,
        element_spacing_wavelengths=spacing_wavelengths,
    )
    return DataCube(geometry=geometry, snapshots=snapshots.copy())
