"""Synthetic space-time scene generation.

A scene is a superposition of point scatterers (clutter patches and targets)
plus circularly-symmetric complex Gaussian receiver noise. Each range cell
yields one snapshot: the stacked N*L space-time sample vector. All
randomness flows from the scenario seed through per-range-cell substreams,
so a cube is a pure function of its configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .steering import (
    ArrayGeometry,
    AngleDopplerGrid,
    azimuth_to_spatial_freq,
    space_time_steering,
)

__all__ = [
    "Scatterer",
    "ScenarioConfig",
    "DataCube",
    "synthesize_snapshot",
    "synthesize_cube",
    "mountaintop_analog_preset",
    "mountaintop_analog_grid",
    "scenario_to_json",
    "scenario_from_json",
]


@dataclass(frozen=True)
class Scatterer:
    """Point scatterer at one (spatial, Doppler) frequency pair.

    ``fluctuation_stddev`` adds an independent complex Gaussian perturbation
    to the amplitude on every snapshot draw (0 = deterministic amplitude).
    """

    spatial_freq: float
    doppler_freq: float
    amplitude: complex
    fluctuation_stddev: float = 0.0

    def __post_init__(self):
        for name, f in (
            ("spatial_freq", self.spatial_freq),
            ("doppler_freq", self.doppler_freq),
        ):
            if not -0.5 <= f < 0.5:
                raise ValueError(f"{name} must lie in [-0.5, 0.5), got {f}")
        if self.fluctuation_stddev < 0:
            raise ValueError("fluctuation_stddev must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of a synthetic scene.

    Clutter scatterers appear in every range cell; target scatterers only in
    their designated cell. ``prf_hz`` is optional and only used to translate
    normalized Doppler to hertz for reporting.
    """

    geometry: ArrayGeometry
    n_range_cells: int
    clutter: tuple[Scatterer, ...] = ()
    targets: tuple[tuple[int, Scatterer], ...] = ()
    noise_power: float = 1.0
    prf_hz: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "clutter", tuple(self.clutter))
        object.__setattr__(
            self, "targets", tuple((int(c), s) for c, s in self.targets)
        )
        if self.n_range_cells < 1:
            raise ValueError("n_range_cells must be >= 1")
        if self.noise_power < 0:
            raise ValueError("noise_power must be >= 0")
        if self.prf_hz is not None and not self.prf_hz > 0:
            raise ValueError("prf_hz must be > 0 when given")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        for cell, _ in self.targets:
            if not 0 <= cell < self.n_range_cells:
                raise ValueError(
                    f"target range cell {cell} out of range "
                    f"[0, {self.n_range_cells})"
                )


@dataclass
class DataCube:
    """Snapshots for every range cell of one CPI.

    ``snapshots`` has shape (n_range_cells, N*L); row m is range cell m's
    stacked space-time vector.
    """

    geometry: ArrayGeometry
    snapshots: np.ndarray

    def __post_init__(self):
        self.snapshots = np.asarray(self.snapshots, dtype=np.complex128)
        if self.snapshots.ndim != 2:
            raise ValueError("snapshots must be a 2-D array")
        if self.snapshots.shape[1] != self.geometry.snapshot_length:
            raise ValueError(
                f"snapshot length {self.snapshots.shape[1]} does not match "
                f"geometry N*L = {self.geometry.snapshot_length}"
            )

    @property
    def n_range_cells(self) -> int:
        return self.snapshots.shape[0]


def synthesize_snapshot(
    scatterers,
    geometry: ArrayGeometry,
    noise_power: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One range cell's snapshot: scatterer superposition plus noise.

    Returns sum_i alpha_i * phi(f_s_i, f_d_i) + w with the unnormalized
    steering vectors and w circularly-symmetric complex Gaussian with
    per-entry variance ``noise_power``. Deterministic given ``rng`` state;
    fluctuation draws (one per fluctuating scatterer, in list order) precede
    the noise draw.
    """
    if noise_power < 0:
        raise ValueError("noise_power must be >= 0")
    snapshot = np.zeros(geometry.snapshot_length, dtype=np.complex128)
    for scatterer in scatterers:
        amplitude = complex(scatterer.amplitude)
        if scatterer.fluctuation_stddev > 0:
            jitter = complex(rng.standard_normal(), rng.standard_normal())
            amplitude += scatterer.fluctuation_stddev / np.sqrt(2.0) * jitter
        snapshot += amplitude * space_time_steering(
            scatterer.spatial_freq, scatterer.doppler_freq, geometry
        )
    if noise_power > 0:
        scale = np.sqrt(noise_power / 2.0)
        n = geometry.snapshot_length
        snapshot += scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return snapshot


def synthesize_cube(config: ScenarioConfig) -> DataCube:
    """Generate the full data cube for a scenario.

    Every range cell gets the clutter scatterers (with independent
    fluctuation draws) plus noise; target scatterers are added only in their
    designated cells. Each range cell draws from its own substream spawned
    from the scenario seed, so cells are independent and the cube is fully
    determined by the configuration.
    """
    targets_by_cell: dict[int, list[Scatterer]] = {}
    for cell, scatterer in config.targets:
        targets_by_cell.setdefault(cell, []).append(scatterer)

    streams = np.random.SeedSequence(config.seed).spawn(config.n_range_cells)
    snapshots = np.empty(
        (config.n_range_cells, config.geometry.snapshot_length),
        dtype=np.complex128,
    )
    for m in range(config.n_range_cells):
        scatterers = list(config.clutter) + targets_by_cell.get(m, [])
        snapshots[m] = synthesize_snapshot(
            scatterers,
            config.geometry,
            config.noise_power,
            np.random.default_rng(streams[m]),
        )
    return DataCube(geometry=config.geometry, snapshots=snapshots)


# Mountaintop-analog constants: 14-element ULA, 16-pulse CPI, a clutter
# ridge whose central patch sits at the spatial cell nearest 70 deg azimuth,
# and a target at 100 deg sharing the clutter Doppler.
_PRESET_N_ELEMENTS = 14
_PRESET_N_PULSES = 16
_PRESET_SPACING = 0.5
_PRESET_N_RANGE_CELLS = 100
_PRESET_TARGET_CELL = 50
_PRESET_N_PATCHES = 11
_PRESET_CLUTTER_AZ_DEG = 70.0
_PRESET_TARGET_AZ_DEG = 100.0
_PRESET_DOPPLER = -0.25  # -150 Hz at the preset PRF
_PRESET_PRF_HZ = 600.0
_PRESET_N_DOPPLER = 64
# Fixed per-patch phases (golden-ratio sequence) so the ridge is rough
# rather than a single coherent beam.
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def mountaintop_analog_grid(n_doppler: int = _PRESET_N_DOPPLER) -> AngleDopplerGrid:
    """Analysis grid matched to the preset scene's lattice.

    Spatial cells sit at the array's natural resolution (N cells of width
    1/N), so same-Doppler steering vectors on distinct cells are exactly
    orthogonal; the Doppler axis is oversampled.
    """
    return AngleDopplerGrid.uniform(_PRESET_N_ELEMENTS, n_doppler)


def mountaintop_analog_preset(
    cnr_db: float,
    snr_db: float,
    *,
    seed: int = 0,
    on_grid: bool = True,
    fluctuation_ratio: float = 0.3,
) -> ScenarioConfig:
    """Synthetic scenario mirroring the Mountain-Top experiment geometry.

    14 elements, 16 pulses, d/lambda = 0.5, 100 range cells, noise power 1.
    Eleven clutter patches occupy spatial resolution cells of the array (the
    1/N lattice of `mountaintop_analog_grid`), all at one normalized
    Doppler, with the central patch on the cell nearest 70 deg azimuth. A
    single target in range cell 50 shares the clutter Doppler and sits on
    the cell nearest 100 deg azimuth, which is kept free of clutter. Placing
    patches a full resolution cell apart keeps them mutually orthogonal, so
    the planted support is actually identifiable; packing 11 same-Doppler
    patches any tighter makes them unresolvable for a 14-element aperture.

    ``cnr_db`` fixes the total clutter power (sum of squared patch
    amplitudes over the noise power) and ``snr_db`` the target power.

    Parameters
    ----------
    cnr_db, snr_db : float
        Clutter-to-noise and signal-to-noise ratios in dB.
    seed : int
        Scenario seed.
    on_grid : bool
        Keep scatterers exactly on the analysis lattice (True) or shift the
        ridge and target to the exact cos-mapped azimuth frequencies
        (False, for basis-mismatch studies).
    fluctuation_ratio : float
        Per-snapshot amplitude jitter of each clutter patch, as a fraction
        of the patch amplitude. Nonzero jitter gives the range-varying
        clutter that starves covariance estimation at small sample support.
    """
    geometry = ArrayGeometry(
        n_elements=_PRESET_N_ELEMENTS,
        n_pulses=_PRESET_N_PULSES,
        element_spacing_wavelengths=_PRESET_SPACING,
    )
    grid = mountaintop_analog_grid()

    clutter_fs_exact = azimuth_to_spatial_freq(_PRESET_CLUTTER_AZ_DEG, _PRESET_SPACING)
    target_fs_exact = azimuth_to_spatial_freq(_PRESET_TARGET_AZ_DEG, _PRESET_SPACING)

    center_slot, doppler_n = grid.nearest_cell(clutter_fs_exact, _PRESET_DOPPLER)
    target_slot, _ = grid.nearest_cell(target_fs_exact, _PRESET_DOPPLER)
    doppler = float(grid.doppler_freqs[doppler_n])

    # The 11 resolution cells closest to the ridge center, skipping the
    # target's cell (ties resolved toward lower cells for determinism).
    candidates = sorted(
        (s for s in range(grid.n_spatial) if s != target_slot),
        key=lambda s: (abs(s - center_slot), s),
    )
    patch_slots = sorted(candidates[:_PRESET_N_PATCHES])

    patch_fs = grid.spatial_freqs[patch_slots]
    target_fs = float(grid.spatial_freqs[target_slot])
    if not on_grid:
        patch_fs = patch_fs + (clutter_fs_exact - grid.spatial_freqs[center_slot])
        target_fs = target_fs_exact

    noise_power = 1.0
    patch_amplitude = np.sqrt(10 ** (cnr_db / 10.0) * noise_power / _PRESET_N_PATCHES)
    target_amplitude = np.sqrt(10 ** (snr_db / 10.0) * noise_power)

    clutter = tuple(
        Scatterer(
            spatial_freq=float(f),
            doppler_freq=doppler,
            amplitude=patch_amplitude
            * np.exp(2j * np.pi * ((i * _GOLDEN) % 1.0)),
            fluctuation_stddev=fluctuation_ratio * patch_amplitude,
        )
        for i, f in enumerate(patch_fs)
    )
    target = Scatterer(
        spatial_freq=target_fs,
        doppler_freq=doppler,
        amplitude=complex(target_amplitude),
        fluctuation_stddev=0.0,
    )
    return ScenarioConfig(
        geometry=geometry,
        n_range_cells=_PRESET_N_RANGE_CELLS,
        clutter=clutter,
        targets=((_PRESET_TARGET_CELL, target),),
        noise_power=noise_power,
        prf_hz=_PRESET_PRF_HZ,
        seed=seed,
    )


def _scatterer_to_dict(s: Scatterer) -> dict:
    return {
        "spatial_freq": s.spatial_freq,
        "doppler_freq": s.doppler_freq,
        "amplitude": [s.amplitude.real, s.amplitude.imag],
        "fluctuation_stddev": s.fluctuation_stddev,
    }


def _scatterer_from_dict(d: dict, where: str) -> Scatterer:
    try:
        re, im = d["amplitude"]
        return Scatterer(
            spatial_freq=float(d["spatial_freq"]),
            doppler_freq=float(d["doppler_freq"]),
            amplitude=complex(float(re), float(im)),
            fluctuation_stddev=float(d.get("fluctuation_stddev", 0.0)),
        )
    except KeyError as exc:
        raise ValueError(f"{where}: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from exc


def scenario_to_json(config: ScenarioConfig, indent: int | None = 2) -> str:
    """Serialize a scenario as UTF-8 JSON.

    Complex amplitudes are written as two-element [real, imag] arrays;
    targets as objects with ``range_cell`` and ``scatterer`` fields.
    """
    doc = {
        "geometry": {
            "n_elements": config.geometry.n_elements,
            "n_pulses": config.geometry.n_pulses,
            "element_spacing_wavelengths": config.geometry.element_spacing_wavelengths,
        },
        "n_range_cells": config.n_range_cells,
        "clutter": [_scatterer_to_dict(s) for s in config.clutter],
        "targets": [
            {"range_cell": cell, "scatterer": _scatterer_to_dict(s)}
            for cell, s in config.targets
        ],
        "noise_power": config.noise_power,
        "prf_hz": config.prf_hz,
        "seed": config.seed,
    }
    return json.dumps(doc, indent=indent)


def scenario_from_json(text: str) -> ScenarioConfig:
    """Parse a scenario from its JSON form, naming any offending field."""
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("scenario document must be a JSON object")
    try:
        geom = doc["geometry"]
        geometry = ArrayGeometry(
            n_elements=int(geom["n_elements"]),
            n_pulses=int(geom["n_pulses"]),
            element_spacing_wavelengths=float(
                geom.get("element_spacing_wavelengths", 0.5)
            ),
        )
        clutter = tuple(
            _scatterer_from_dict(d, f"clutter[{i}]")
            for i, d in enumerate(doc.get("clutter", []))
        )
        targets = tuple(
            (
                int(t["range_cell"]),
                _scatterer_from_dict(t["scatterer"], f"targets[{i}]"),
            )
            for i, t in enumerate(doc.get("targets", []))
        )
        prf = doc.get("prf_hz")
        return ScenarioConfig(
            geometry=geometry,
            n_range_cells=int(doc["n_range_cells"]),
            clutter=clutter,
            targets=targets,
            noise_power=float(doc.get("noise_power", 1.0)),
            prf_hz=None if prf is None else float(prf),
            seed=int(doc.get("seed", 0)),
        )
    except KeyError as exc:
        raise ValueError(f"scenario config: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ValueError(f"scenario config: {exc}") from exc
