"""Clutter filtering on the angle-Doppler coefficient map.

Three filters, all built on the same idea: solve snapshots against the
steering dictionary, locate the dominant (clutter) cells, and zero them out
of the map under test so weaker targets become visible.

* `annihilate_single` -- one snapshot: zero its own k strongest cells, where
  k comes from the largest consecutive-ratio gap in the sorted magnitudes.
* `annihilate_multi` -- average the solutions of target-free training
  snapshots, find the clutter cells there, zero those cells in the test map.
* `sidelobe_suppress` -- iteratively pick the strongest training-map cell
  and zero it together with every grid cell whose dictionary column is
  strongly coherent with it (in both maps), until the training map's residue
  energy falls below a prescribed fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoGapError
from .solvers import SolverConfig, solve_snapshot
from .steering import SteeringDictionary, coherence_profile

__all__ = [
    "ClutterSupport",
    "FilterOutput",
    "SidelobeConfig",
    "SidelobeIteration",
    "estimate_gap_index",
    "default_gap_limit",
    "annihilate_single",
    "annihilate_multi",
    "sidelobe_suppress",
    "filter_output_to_csv",
    "diagnostics_to_csv",
]

#: Consecutive-ratio gaps at or below this are considered too weak to trust;
#: the annihilating filters then fall back to energy-fraction selection.
WEAK_GAP_RATIO = 3.0
#: Fraction of map energy zeroed by the energy-fraction fallback.
FALLBACK_ENERGY_FRACTION = 0.9

_AGGREGATION_MODES = ("mean", "median")


@dataclass
class ClutterSupport:
    """Grid cells identified as clutter.

    ``indices`` lists grid flat-indices in descending magnitude order with
    ``magnitudes`` matching; the first ``gap_index`` entries are the clutter
    set. ``gap_ratio`` is the magnitude ratio across the detected gap.
    """

    indices: np.ndarray
    magnitudes: np.ndarray
    gap_index: int
    gap_ratio: float

    def clutter_indices(self) -> np.ndarray:
        return self.indices[: self.gap_index]


@dataclass(frozen=True)
class SidelobeIteration:
    iteration: int
    peak_index: int
    neighborhood_size: int
    residue_energy: float


@dataclass
class FilterOutput:
    """Result of one filter run.

    ``magnitude_map`` is the nonnegative coefficient-modulus map after
    zeroing; it is zero on every index in ``zeroed_indices`` and unchanged
    elsewhere. ``test_coefficients`` keeps the complex pre-zeroing test
    solution for re-synthesis studies. ``diagnostics`` is populated by the
    sidelobe filter only.
    """

    magnitude_map: np.ndarray
    zeroed_indices: list[int]
    diagnostics: list[SidelobeIteration] = field(default_factory=list)
    clutter: ClutterSupport | None = None
    test_coefficients: np.ndarray | None = None
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class SidelobeConfig:
    """Tuning constants of the sidelobe suppressing filter.

    ``coherence_threshold`` is the minimum column coherence for a cell to be
    zeroed along with the current peak (1.0 zeroes only the peak itself).
    ``residue_fraction`` stops the loop once the training map's remaining
    energy drops to that fraction of its initial energy. ``max_peaks`` is a
    safety bound on iterations.
    """

    coherence_threshold: float = 0.9
    residue_fraction: float = 0.05
    max_peaks: int = 256

    def __post_init__(self):
        if not 0.0 < self.coherence_threshold <= 1.0:
            raise ValueError("coherence_threshold must lie in (0, 1]")
        if not 0.0 <= self.residue_fraction <= 1.0:
            raise ValueError("residue_fraction must lie in [0, 1]")
        if self.max_peaks < 1:
            raise ValueError("max_peaks must be >= 1")


def estimate_gap_index(
    magnitudes_sorted_desc: np.ndarray, search_limit: int
) -> tuple[int, float]:
    """Locate the clutter/noise gap in a descending magnitude list.

    Returns (k, ratio) where k is the 1-based split position maximizing
    magnitudes[i-1] / magnitudes[i] over i in [1, search_limit]. A zero
    denominator puts the split just before the first zero with ratio
    +infinity.

    Raises
    ------
    NoGapError
        If all entries are equal (ratio 1 everywhere), including the
        all-zero map; callers should fall back to energy-fraction mode.
    ValueError
        Empty input, unsorted input, or search_limit out of [1, len-1].
    """
    mags = np.asarray(magnitudes_sorted_desc, dtype=float)
    if mags.size == 0:
        raise ValueError("magnitude list is empty")
    if np.any(np.diff(mags) > 0):
        raise ValueError("magnitudes must be sorted in descending order")
    if not 1 <= search_limit <= mags.size - 1:
        raise ValueError(
            f"search_limit must lie in [1, {mags.size - 1}], got {search_limit}"
        )
    if mags[0] == mags[-1]:
        raise NoGapError(
            "all magnitudes are equal; no gap separates clutter from the rest"
        )
    window = mags[: search_limit + 1]
    zero_positions = np.flatnonzero(window[1:] == 0.0)
    if zero_positions.size:
        k = int(zero_positions[0]) + 1
        return k, float("inf")
    ratios = window[:-1] / window[1:]
    k = int(np.argmax(ratios)) + 1
    return k, float(ratios[k - 1])


def default_gap_limit(dictionary: SteeringDictionary) -> int:
    """Default gap search depth: min(4*N, n_cells/8), at least 1."""
    limit = min(
        4 * dictionary.geometry.n_elements, dictionary.grid.n_cells // 8
    )
    return max(1, min(limit, dictionary.grid.n_cells - 1))


def _select_clutter(
    magnitude_map: np.ndarray, gap_limit: int
) -> tuple[ClutterSupport, tuple[str, ...]]:
    """Sort the map and pick the clutter prefix via the gap rule.

    Falls back to zeroing the smallest prefix holding 90% of the map energy
    when the best gap ratio is too weak to trust; the fallback never zeroes
    past the searched window, so at most ``gap_limit`` cells are removed.
    """
    order = np.argsort(magnitude_map)[::-1]
    sorted_mags = magnitude_map[order]
    limit = min(gap_limit, sorted_mags.size - 1)
    try:
        k, ratio = estimate_gap_index(sorted_mags, limit)
    except NoGapError as exc:
        raise NoGapError(str(exc), magnitude_map=magnitude_map.copy()) from None
    warnings: tuple[str, ...] = ()
    if np.isfinite(ratio) and ratio <= WEAK_GAP_RATIO:
        energy = np.cumsum(sorted_mags**2)
        k = int(np.searchsorted(energy, FALLBACK_ENERGY_FRACTION * energy[-1])) + 1
        k = min(k, limit)
        ratio = float(sorted_mags[k - 1] / sorted_mags[k]) if sorted_mags[k] > 0 else float("inf")
        warnings = (
            f"no gap ratio above {WEAK_GAP_RATIO}; fell back to zeroing the "
            f"smallest prefix holding {FALLBACK_ENERGY_FRACTION:.0%} of map "
            f"energy (k={k})",
        )
    support = ClutterSupport(
        indices=order, magnitudes=sorted_mags, gap_index=k, gap_ratio=ratio
    )
    return support, warnings


def _aggregate_solutions(solutions: np.ndarray, robust: str) -> np.ndarray:
    """Combine K solution vectors into one.

    ``mean`` is the elementwise complex mean. ``median`` pairs the
    coordinatewise median of moduli with the phase of the complex mean,
    which keeps the mode robust to sporadic outliers while staying
    idempotent on identical inputs.
    """
    if robust not in _AGGREGATION_MODES:
        raise ValueError(
            f"unknown aggregation {robust!r}, expected one of {_AGGREGATION_MODES}"
        )
    mean = solutions.mean(axis=0)
    if robust == "mean":
        return mean
    moduli = np.median(np.abs(solutions), axis=0)
    mean_abs = np.abs(mean)
    phase = np.where(mean_abs > 0, mean / np.where(mean_abs > 0, mean_abs, 1.0), 1.0)
    return moduli * phase


def annihilate_single(
    dictionary: SteeringDictionary,
    r_test: np.ndarray,
    solver_cfg: SolverConfig,
    gap_limit: int | None = None,
) -> FilterOutput:
    """Annihilating filter on a single snapshot.

    Solves r = Phi x, finds the gap index k in the sorted coefficient
    moduli, zeroes the k largest map entries, and returns the map. Exactly
    k entries are zeroed; no entry ever increases.
    """
    if gap_limit is None:
        gap_limit = default_gap_limit(dictionary)
    solution = solve_snapshot(dictionary, r_test, solver_cfg)
    magnitude_map = np.abs(solution.coefficients)
    support, warnings = _select_clutter(magnitude_map, gap_limit)
    zeroed = support.clutter_indices()
    out = magnitude_map.copy()
    out[zeroed] = 0.0
    return FilterOutput(
        magnitude_map=out,
        zeroed_indices=[int(i) for i in zeroed],
        clutter=support,
        test_coefficients=solution.coefficients,
        warnings=warnings,
    )


def annihilate_multi(
    dictionary: SteeringDictionary,
    r_train,
    r_test: np.ndarray,
    solver_cfg: SolverConfig,
    gap_limit: int | None = None,
    robust: str = "mean",
) -> FilterOutput:
    """Annihilating filter with multi-snapshot averaging.

    Solves every training snapshot and the test snapshot, aggregates the
    training solutions elementwise, finds the clutter cells on the
    aggregated map, and zeroes those cells in the test map. The zeroed set
    is a function of the training data only.
    """
    r_train = list(r_train)
    if not r_train:
        raise ValueError("at least one training snapshot is required")
    if gap_limit is None:
        gap_limit = default_gap_limit(dictionary)
    train_solutions = np.stack(
        [solve_snapshot(dictionary, r, solver_cfg).coefficients for r in r_train]
    )
    test_solution = solve_snapshot(dictionary, r_test, solver_cfg)
    averaged = _aggregate_solutions(train_solutions, robust)
    support, warnings = _select_clutter(np.abs(averaged), gap_limit)
    zeroed = support.clutter_indices()
    out = np.abs(test_solution.coefficients)
    out[zeroed] = 0.0
    return FilterOutput(
        magnitude_map=out,
        zeroed_indices=[int(i) for i in zeroed],
        clutter=support,
        test_coefficients=test_solution.coefficients,
        warnings=warnings,
    )


def sidelobe_suppress(
    dictionary: SteeringDictionary,
    r_train,
    r_test: np.ndarray,
    solver_cfg: SolverConfig,
    cfg: SidelobeConfig,
) -> FilterOutput:
    """Iterative peak-plus-coherent-neighborhood zeroing.

    Repeatedly finds the strongest cell of the averaged training map and
    zeroes, in both the training and test maps, every cell whose dictionary
    column has coherence >= the threshold with the peak's column (always
    including the peak itself). Stops once the training map's residue energy
    is at or below ``residue_fraction`` of its initial energy, or after
    ``max_peaks`` iterations (with a warning).
    """
    r_train = list(r_train)
    if not r_train:
        raise ValueError("at least one training snapshot is required")
    train_solutions = np.stack(
        [solve_snapshot(dictionary, r, solver_cfg).coefficients for r in r_train]
    )
    test_solution = solve_snapshot(dictionary, r_test, solver_cfg)

    train_map = np.abs(_aggregate_solutions(train_solutions, "mean"))
    test_map = np.abs(test_solution.coefficients)
    initial_energy = float(np.sum(train_map**2))
    diagnostics: list[SidelobeIteration] = []
    zeroed: list[int] = []
    zeroed_mask = np.zeros(train_map.size, dtype=bool)
    warnings: tuple[str, ...] = ()

    if initial_energy > 0.0:
        target_energy = cfg.residue_fraction * initial_energy
        energy = initial_energy
        iteration = 0
        while energy > target_energy:
            if iteration >= cfg.max_peaks:
                warnings = (
                    f"max_peaks={cfg.max_peaks} reached before the residue "
                    f"criterion; remaining energy fraction "
                    f"{energy / initial_energy:.3g}",
                )
                break
            peak = int(np.argmax(train_map))
            profile = coherence_profile(dictionary, peak)
            neighborhood = np.flatnonzero(profile >= cfg.coherence_threshold)
            train_map[neighborhood] = 0.0
            test_map[neighborhood] = 0.0
            newly = neighborhood[~zeroed_mask[neighborhood]]
            zeroed.extend(int(i) for i in newly)
            zeroed_mask[neighborhood] = True
            energy = float(np.sum(train_map**2))
            iteration += 1
            diagnostics.append(
                SidelobeIteration(iteration, peak, int(neighborhood.size), energy)
            )

    return FilterOutput(
        magnitude_map=test_map,
        zeroed_indices=zeroed,
        diagnostics=diagnostics,
        test_coefficients=test_solution.coefficients,
        warnings=warnings,
    )


def filter_output_to_csv(output: FilterOutput, grid) -> str:
    """Magnitude map as CSV: ``spatial_index,doppler_index,magnitude,zeroed``."""
    zeroed_mask = np.zeros(output.magnitude_map.size, dtype=bool)
    zeroed_mask[list(output.zeroed_indices)] = True
    lines = ["spatial_index,doppler_index,magnitude,zeroed"]
    n_doppler = grid.n_doppler
    for flat, (mag, z) in enumerate(zip(output.magnitude_map, zeroed_mask)):
        m, n = divmod(flat, n_doppler)
        lines.append(f"{m},{n},{float(mag)!r},{int(z)}")
    return "\n".join(lines) + "\n"


def diagnostics_to_csv(output: FilterOutput) -> str:
    """Sidelobe iteration log as CSV: ``iter,peak_index,neighborhood_size,residue_energy``."""
    lines = ["iter,peak_index,neighborhood_size,residue_energy"]
    for row in output.diagnostics:
        lines.append(
            f"{row.iteration},{row.peak_index},{row.neighborhood_size},"
            f"{row.residue_energy!r}"
        )
    return "\n".join(lines) + "\n"
