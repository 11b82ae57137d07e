"""Space-time steering vectors and the angle-Doppler grid dictionary.

A uniform linear array of ``N`` elements collecting ``L`` coherent pulses
sees a point scatterer as a phase ramp across elements (spatial frequency
``f_s``) times a phase ramp across pulses (normalized Doppler ``f_d``).
`build_dictionary` evaluates those ramps on a grid of candidate
(``f_s``, ``f_d``) pairs and stacks them as unit-norm columns; solving a
snapshot against the dictionary yields an angle-Doppler coefficient map.

Conventions
-----------
* Frequencies are normalized to [-0.5, 0.5) cycles per element / per pulse.
* Kronecker ordering is spatial-major: snapshot entry ``n*L + l`` belongs to
  element ``n``, pulse ``l``; dictionary column ``m*n_doppler + n`` belongs
  to grid cell (spatial ``m``, Doppler ``n``).
* Columns are stored unit-normalized; the raw steering norm sqrt(N*L) is
  recorded per column so physical amplitudes remain recoverable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DictionaryMemoryError

__all__ = [
    "ArrayGeometry",
    "AngleDopplerGrid",
    "SteeringDictionary",
    "spatial_steering",
    "doppler_steering",
    "space_time_steering",
    "build_dictionary",
    "column_coherence",
    "coherence_profile",
    "azimuth_to_spatial_freq",
    "spatial_freq_to_azimuth",
]

# 16 bytes per complex128 entry.
_BYTES_PER_ENTRY = 16
DEFAULT_DICTIONARY_BUDGET_BYTES = 2**31  # 2 GiB

_POWER_METHOD_ITERATIONS = 50


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array plus coherent processing interval.

    Parameters
    ----------
    n_elements : int
        Number of array elements N (>= 1).
    n_pulses : int
        Number of pulses per CPI, L (>= 1).
    element_spacing_wavelengths : float
        Element spacing in wavelengths (d over lambda), > 0.
    """

    n_elements: int
    n_pulses: int
    element_spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError(f"n_elements must be >= 1, got {self.n_elements}")
        if self.n_pulses < 1:
            raise ValueError(f"n_pulses must be >= 1, got {self.n_pulses}")
        if not self.element_spacing_wavelengths > 0:
            raise ValueError(
                "element_spacing_wavelengths must be > 0, got "
                f"{self.element_spacing_wavelengths}"
            )

    @property
    def snapshot_length(self) -> int:
        """Length N*L of one range cell's stacked space-time sample vector."""
        return self.n_elements * self.n_pulses


@dataclass(frozen=True)
class AngleDopplerGrid:
    """Grid of candidate (spatial frequency, Doppler frequency) pairs.

    Grid cell (m, n) maps to flat index ``m*n_doppler + n``, matching the
    dictionary column order.
    """

    spatial_freqs: np.ndarray
    doppler_freqs: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "spatial_freqs", np.asarray(self.spatial_freqs, dtype=float)
        )
        object.__setattr__(
            self, "doppler_freqs", np.asarray(self.doppler_freqs, dtype=float)
        )
        for name, freqs in (
            ("spatial_freqs", self.spatial_freqs),
            ("doppler_freqs", self.doppler_freqs),
        ):
            if freqs.ndim != 1 or freqs.size == 0:
                raise ValueError(f"{name} must be a nonempty 1-D array")
            if np.any(np.diff(freqs) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            if freqs[0] < -0.5 or freqs[-1] >= 0.5:
                raise ValueError(f"{name} entries must lie in [-0.5, 0.5)")

    @classmethod
    def uniform(cls, n_spatial: int, n_doppler: int) -> "AngleDopplerGrid":
        """Uniform grid with spacing 1/n covering [-0.5, 0.5)."""
        if n_spatial < 1 or n_doppler < 1:
            raise ValueError("grid dimensions must be >= 1")
        return cls(
            spatial_freqs=-0.5 + np.arange(n_spatial) / n_spatial,
            doppler_freqs=-0.5 + np.arange(n_doppler) / n_doppler,
        )

    @property
    def n_spatial(self) -> int:
        return self.spatial_freqs.size

    @property
    def n_doppler(self) -> int:
        return self.doppler_freqs.size

    @property
    def n_cells(self) -> int:
        return self.n_spatial * self.n_doppler

    def flat_index(self, m: int, n: int) -> int:
        """Flat column index of grid cell (spatial m, Doppler n)."""
        if not (0 <= m < self.n_spatial and 0 <= n < self.n_doppler):
            raise ValueError(f"grid cell ({m}, {n}) out of range")
        return m * self.n_doppler + n

    def unflatten(self, index: int) -> tuple[int, int]:
        """Inverse of `flat_index`."""
        if not (0 <= index < self.n_cells):
            raise ValueError(f"flat index {index} out of range")
        return divmod(index, self.n_doppler)

    def nearest_cell(self, f_s: float, f_d: float) -> tuple[int, int]:
        """Grid cell whose frequencies are closest to (f_s, f_d)."""
        m = int(np.argmin(np.abs(self.spatial_freqs - f_s)))
        n = int(np.argmin(np.abs(self.doppler_freqs - f_d)))
        return m, n


def spatial_steering(f_s: float, n_elements: int) -> np.ndarray:
    """Spatial steering vector [exp(j*2*pi*k*f_s)] for k = 0..N-1.

    Parameters
    ----------
    f_s : float
        Normalized spatial frequency.
    n_elements : int
        Number of array elements (>= 1).

    Returns
    -------
    numpy.ndarray
        Complex vector of length ``n_elements`` with unit-modulus entries;
        entry 0 is 1+0j (first element is the phase reference).
    """
    if n_elements < 1:
        raise ValueError(f"n_elements must be >= 1, got {n_elements}")
    return np.exp(2j * np.pi * f_s * np.arange(n_elements))


def doppler_steering(f_d: float, n_pulses: int) -> np.ndarray:
    """Doppler steering vector [exp(j*2*pi*k*f_d)] for k = 0..L-1."""
    if n_pulses < 1:
        raise ValueError(f"n_pulses must be >= 1, got {n_pulses}")
    return np.exp(2j * np.pi * f_d * np.arange(n_pulses))


def space_time_steering(
    f_s: float, f_d: float, geometry: ArrayGeometry
) -> np.ndarray:
    """Space-time steering vector: spatial (x) Doppler Kronecker product.

    Entry ``n*L + l`` equals exp(j*2*pi*(n*f_s + l*f_d)). The Euclidean norm
    is sqrt(N*L); no normalization is applied here.
    """
    return np.kron(
        spatial_steering(f_s, geometry.n_elements),
        doppler_steering(f_d, geometry.n_pulses),
    )


@dataclass
class SteeringDictionary:
    """Grid of unit-normalized space-time steering vectors as a matrix.

    Attributes
    ----------
    geometry : ArrayGeometry
    grid : AngleDopplerGrid
    columns : numpy.ndarray
        Complex matrix of shape (N*L, n_spatial*n_doppler), each column the
        unit-norm steering vector of its grid cell.
    column_norms : numpy.ndarray
        Pre-normalization Euclidean norms (all sqrt(N*L)).

    The dictionary is immutable after construction; all methods are pure
    reads and safe to call concurrently.
    """

    geometry: ArrayGeometry
    grid: AngleDopplerGrid
    columns: np.ndarray
    column_norms: np.ndarray
    # Kronecker factors, kept so products with the dictionary can use two
    # small matmuls instead of one dense (N*L) x (Ns*Nd) product.
    _spatial_atoms: np.ndarray = field(repr=False, default=None)
    _doppler_atoms: np.ndarray = field(repr=False, default=None)
    _spectral_norm: float = field(repr=False, default=None)

    @property
    def n_rows(self) -> int:
        return self.columns.shape[0]

    @property
    def n_columns(self) -> int:
        return self.columns.shape[1]

    @property
    def spectral_norm(self) -> float:
        """Largest singular value, estimated by power iteration at build time."""
        if self._spectral_norm is None:
            self._spectral_norm = _power_method_spectral_norm(self.columns)
        return self._spectral_norm

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Product dictionary @ x via the Kronecker factorization."""
        X = x.reshape(self.grid.n_spatial, self.grid.n_doppler)
        out = self._spatial_atoms @ X @ self._doppler_atoms.T
        return out.reshape(self.n_rows) / self.column_norms[0]

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        """Adjoint product dictionary^H @ y via the Kronecker factorization."""
        Y = y.reshape(self.geometry.n_elements, self.geometry.n_pulses)
        out = self._spatial_atoms.conj().T @ Y @ self._doppler_atoms.conj()
        return out.reshape(self.n_columns) / self.column_norms[0]


def build_dictionary(
    geometry: ArrayGeometry,
    grid: AngleDopplerGrid,
    max_bytes: int = DEFAULT_DICTIONARY_BUDGET_BYTES,
) -> SteeringDictionary:
    """Construct the angle-Doppler steering dictionary for a geometry/grid.

    Parameters
    ----------
    geometry : ArrayGeometry
    grid : AngleDopplerGrid
    max_bytes : int
        Memory budget for the dense column matrix.

    Returns
    -------
    SteeringDictionary

    Raises
    ------
    DictionaryMemoryError
        If the dense matrix would exceed ``max_bytes``; the exception reports
        the required byte count.
    """
    n_rows = geometry.snapshot_length
    n_cols = grid.n_cells
    if n_cols == 0:
        raise ValueError("grid has no cells")
    required = n_rows * n_cols * _BYTES_PER_ENTRY
    if required > max_bytes:
        raise DictionaryMemoryError(required, max_bytes)

    spatial_atoms = np.exp(
        2j * np.pi * np.outer(np.arange(geometry.n_elements), grid.spatial_freqs)
    )
    doppler_atoms = np.exp(
        2j * np.pi * np.outer(np.arange(geometry.n_pulses), grid.doppler_freqs)
    )
    raw_norm = np.sqrt(n_rows)
    columns = (
        np.einsum("nm,ld->nlmd", spatial_atoms, doppler_atoms).reshape(
            n_rows, n_cols
        )
        / raw_norm
    )
    dictionary = SteeringDictionary(
        geometry=geometry,
        grid=grid,
        columns=columns,
        column_norms=np.full(n_cols, raw_norm),
        _spatial_atoms=spatial_atoms,
        _doppler_atoms=doppler_atoms,
    )
    dictionary._spectral_norm = _power_method_spectral_norm(columns)
    return dictionary


def _power_method_spectral_norm(columns: np.ndarray, n_iter: int = _POWER_METHOD_ITERATIONS) -> float:
    """Spectral norm of ``columns`` by power iteration on the small Gram."""
    gram = columns @ columns.conj().T  # (N*L) x (N*L), the smaller side
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(gram.shape[0]) + 1j * rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = gram @ v
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(np.sqrt(lam))


def column_coherence(dictionary: SteeringDictionary, i: int, j: int) -> float:
    """Absolute inner product |<column_i, column_j>| of two unit-norm columns.

    Symmetric in (i, j); equals 1 when i == j. Raises ``ValueError`` for an
    out-of-range index.
    """
    n = dictionary.n_columns
    for idx in (i, j):
        if not 0 <= idx < n:
            raise ValueError(f"column index {idx} out of range [0, {n})")
    value = abs(np.vdot(dictionary.columns[:, i], dictionary.columns[:, j]))
    return float(min(value, 1.0))


def coherence_profile(dictionary: SteeringDictionary, j: int) -> np.ndarray:
    """Coherence of every column against column ``j`` as one vector.

    Equivalent to ``[column_coherence(d, k, j) for k in range(n_columns)]``
    computed in one adjoint product.
    """
    if not 0 <= j < dictionary.n_columns:
        raise ValueError(
            f"column index {j} out of range [0, {dictionary.n_columns})"
        )
    profile = np.abs(dictionary.rmatvec(dictionary.columns[:, j]))
    return np.minimum(profile, 1.0)


def azimuth_to_spatial_freq(azimuth_deg: float, spacing_wavelengths: float) -> float:
    """Map an azimuth angle in degrees to normalized spatial frequency.

    f_s = (d/lambda) * cos(azimuth). Intended for axis labeling; grids are
    laid out uniformly in frequency, not in angle.
    """
    return spacing_wavelengths * float(np.cos(np.deg2rad(azimuth_deg)))


def spatial_freq_to_azimuth(f_s: float, spacing_wavelengths: float) -> float:
    """Inverse of `azimuth_to_spatial_freq`, clipped to the visible region."""
    cosine = np.clip(f_s / spacing_wavelengths, -1.0, 1.0)
    return float(np.rad2deg(np.arccos(cosine)))
