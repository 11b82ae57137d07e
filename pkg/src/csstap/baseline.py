"""Sample-matrix-inversion baseline and the evaluation harness.

`estimate_covariance` + `smi_spectrum` implement the classical adaptive
filter: estimate the space-time covariance from training snapshots, apply
distortionless weights per grid cell. `angle_scan`, `range_scan`, and
`scr_improvement` produce the comparison artifacts (angle cuts, range cuts,
signal-to-clutter gains) for any mix of sparse-recovery filters and SMI.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NoGapError,
    SingularCovarianceError,
    UndefinedMetricError,
    UndefinedReferenceError,
)
from .filters import (
    FilterOutput,
    SidelobeConfig,
    _aggregate_solutions,
    _select_clutter,
    annihilate_single,
    default_gap_limit,
    sidelobe_suppress,
)
from .scene import DataCube
from .solvers import SolverConfig, solve_snapshot
from .steering import SteeringDictionary, spatial_freq_to_azimuth

__all__ = [
    "CovarianceEstimate",
    "ScanResult",
    "FilterMethod",
    "estimate_covariance",
    "smi_spectrum",
    "matched_filter_spectrum",
    "angle_scan",
    "range_scan",
    "scr_improvement",
    "select_training_cells",
    "apply_filter_method",
    "magnitude_map_to_pgm",
    "DB_FLOOR",
]

#: dB value substituted for zero magnitudes so CSV outputs stay finite.
DB_FLOOR = -120.0
#: Condition number beyond which the covariance is treated as singular.
_SINGULAR_CONDITION = 1e12
#: Floor applied to non-target maxima in `scr_improvement`.
_SCR_FLOOR = 1e-12

_PGM_DB_RANGE = 60.0  # dB span [-60, 0] mapped onto pixel values [0, 255]


@dataclass
class CovarianceEstimate:
    """Sample covariance with diagonal loading.

    ``matrix`` is Hermitian (N*L) x (N*L); ``loading`` is the applied
    diagonal level delta (the matrix already includes it).
    """

    matrix: np.ndarray
    n_samples: int
    loading: float


@dataclass
class ScanResult:
    """One scan axis plus a dB trace per method."""

    axis_values: np.ndarray
    responses_db: dict[str, np.ndarray]

    def __post_init__(self):
        self.axis_values = np.asarray(self.axis_values, dtype=float)
        for label, trace in self.responses_db.items():
            trace = np.asarray(trace, dtype=float)
            if trace.shape != self.axis_values.shape:
                raise ValueError(
                    f"trace {label!r} length {trace.shape} does not match "
                    f"axis length {self.axis_values.shape}"
                )
            self.responses_db[label] = trace

    @property
    def method_labels(self) -> list[str]:
        return list(self.responses_db)

    def to_csv(self) -> str:
        header = "axis," + ",".join(f"{m}_db" for m in self.responses_db)
        lines = [header]
        for i, axis in enumerate(self.axis_values):
            row = [repr(float(axis))]
            row += [repr(float(t[i])) for t in self.responses_db.values()]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def estimate_covariance(
    r_train,
    loading_factor: float = 0.0,
    *,
    absolute_loading: float | None = None,
) -> CovarianceEstimate:
    """Sample covariance (1/K) sum r r^H plus diagonal loading.

    The loading level is ``loading_factor`` times the average per-entry
    power of the sample part (trace / N*L), i.e. scale-invariant; pass
    ``absolute_loading`` to set delta directly instead.
    """
    snapshots = np.stack([np.asarray(r, dtype=np.complex128) for r in r_train])
    if snapshots.ndim != 2:
        raise ValueError("training snapshots must be 1-D vectors")
    k, dim = snapshots.shape
    if k < 1:
        raise ValueError("at least one training snapshot is required")
    if loading_factor < 0:
        raise ValueError("loading_factor must be >= 0")
    sample = snapshots.T @ snapshots.conj() / k
    sample = 0.5 * (sample + sample.conj().T)
    if absolute_loading is not None:
        if absolute_loading < 0:
            raise ValueError("absolute_loading must be >= 0")
        delta = float(absolute_loading)
    else:
        delta = loading_factor * float(np.trace(sample).real) / dim
    return CovarianceEstimate(
        matrix=sample + delta * np.eye(dim),
        n_samples=k,
        loading=delta,
    )


def smi_spectrum(
    covariance: CovarianceEstimate,
    r_test: np.ndarray,
    dictionary: SteeringDictionary,
) -> np.ndarray:
    """Adaptive amplitude map |w^H r| with distortionless weights per cell.

    w = R^-1 s / (s^H R^-1 s) for each unit-norm grid steering vector s, so
    w^H s = 1 exactly. Requires an invertible covariance: K >= N*L samples
    or nonzero loading.
    """
    r_test = np.asarray(r_test, dtype=np.complex128)
    dim = dictionary.n_rows
    if covariance.matrix.shape != (dim, dim):
        raise ValueError(
            f"covariance shape {covariance.matrix.shape} does not match "
            f"snapshot length {dim}"
        )
    if r_test.shape != (dim,):
        raise ValueError(f"snapshot length {r_test.shape} does not match {dim}")
    if covariance.loading == 0.0 and covariance.n_samples < dim:
        raise ValueError(
            f"covariance from {covariance.n_samples} < {dim} samples is "
            "singular; diagonal loading is required at small sample support"
        )
    condition = float(np.linalg.cond(covariance.matrix))
    if not np.isfinite(condition) or condition > _SINGULAR_CONDITION:
        raise SingularCovarianceError(condition)
    solved = np.linalg.solve(covariance.matrix, dictionary.columns)
    numer = solved.conj().T @ r_test
    denom = np.einsum("ij,ij->j", dictionary.columns.conj(), solved).real
    if np.any(denom <= 0):
        raise SingularCovarianceError(condition)
    return np.abs(numer) / denom


def matched_filter_spectrum(
    dictionary: SteeringDictionary, r: np.ndarray
) -> np.ndarray:
    """Unadapted map |Phi^H r|: the beamformer/DFT spectrum."""
    r = np.asarray(r, dtype=np.complex128)
    if r.shape != (dictionary.n_rows,):
        raise ValueError(
            f"snapshot length {r.shape} does not match {dictionary.n_rows}"
        )
    return np.abs(dictionary.rmatvec(r))


def _to_db_relative(values: np.ndarray, reference: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(np.where(values > 0, values / reference, np.nan))
    return np.where(np.isnan(db), DB_FLOOR, np.maximum(db, DB_FLOOR))


def angle_scan(
    method_outputs: dict[str, np.ndarray],
    dictionary: SteeringDictionary,
    doppler_bin: int,
    normalize_at: int,
) -> ScanResult:
    """Spatial cut of each method's map at one Doppler bin, in relative dB.

    The trace is normalized to 0 dB at spatial bin ``normalize_at`` (the
    known target direction); zero magnitudes clamp to the -120 dB floor.
    The axis carries azimuth degrees for the grid's spatial frequencies.
    """
    grid = dictionary.grid
    if not 0 <= doppler_bin < grid.n_doppler:
        raise ValueError(f"doppler_bin {doppler_bin} out of range")
    if not 0 <= normalize_at < grid.n_spatial:
        raise ValueError(f"normalize_at {normalize_at} out of range")
    spacing = dictionary.geometry.element_spacing_wavelengths
    axis = np.array(
        [spatial_freq_to_azimuth(f, spacing) for f in grid.spatial_freqs]
    )
    responses: dict[str, np.ndarray] = {}
    for label, magnitude_map in method_outputs.items():
        magnitude_map = np.asarray(magnitude_map, dtype=float)
        if magnitude_map.shape != (grid.n_cells,):
            raise ValueError(
                f"map {label!r} length {magnitude_map.shape} does not match "
                f"grid size {grid.n_cells}"
            )
        cut = magnitude_map.reshape(grid.n_spatial, grid.n_doppler)[:, doppler_bin]
        reference = float(cut[normalize_at])
        if reference <= 0.0:
            raise UndefinedReferenceError(
                f"map {label!r} has zero magnitude at the normalization bin "
                f"{normalize_at}"
            )
        db = _to_db_relative(cut, reference)
        db[normalize_at] = 0.0
        responses[label] = db
    return ScanResult(axis_values=axis, responses_db=responses)


@dataclass(frozen=True)
class FilterMethod:
    """Named filter configuration for scans and the CLI.

    ``kind`` selects the processing chain: ``annihilate-single``,
    ``annihilate-multi``, ``sidelobe``, ``smi``, or ``matched``. Training
    snapshots (where used) are the ``n_train`` range cells nearest the cell
    under test, excluding ``n_guard`` guard cells on each side.
    """

    name: str
    kind: str
    solver: SolverConfig = field(default_factory=SolverConfig)
    n_train: int = 16
    n_guard: int = 5
    gap_limit: int | None = None
    robust: str = "mean"
    sidelobe: SidelobeConfig = field(default_factory=SidelobeConfig)
    loading_factor: float = 1.0

    _KINDS = ("annihilate-single", "annihilate-multi", "sidelobe", "smi", "matched")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(
                f"unknown filter kind {self.kind!r}, expected one of {self._KINDS}"
            )

    @property
    def needs_training(self) -> bool:
        return self.kind in ("annihilate-multi", "sidelobe", "smi")


def select_training_cells(
    n_cells: int, test_cell: int, n_train: int, n_guard: int
) -> list[int]:
    """Training cells nearest the test cell, guard cells excluded.

    Candidates are ranked by distance from the test cell (ties: lower index
    first). Raises ``ValueError`` listing required vs available counts when
    the cube cannot supply ``n_train`` cells.
    """
    if not 0 <= test_cell < n_cells:
        raise ValueError(f"test cell {test_cell} out of range [0, {n_cells})")
    candidates = [
        m for m in range(n_cells) if abs(m - test_cell) > n_guard
    ]
    if len(candidates) < n_train:
        raise ValueError(
            f"training requires {n_train} cells but only {len(candidates)} "
            f"are available ({n_cells} cells, {n_guard} guard cells around "
            f"cell {test_cell})"
        )
    candidates.sort(key=lambda m: (abs(m - test_cell), m))
    return sorted(candidates[:n_train])


def _annihilate_from_solutions(
    train_coefficients: np.ndarray,
    test_coefficients: np.ndarray,
    gap_limit: int,
    robust: str,
) -> FilterOutput:
    """Multi-snapshot annihilation on precomputed solution vectors."""
    averaged = _aggregate_solutions(train_coefficients, robust)
    support, warnings = _select_clutter(np.abs(averaged), gap_limit)
    zeroed = support.clutter_indices()
    out = np.abs(test_coefficients)
    out[zeroed] = 0.0
    return FilterOutput(
        magnitude_map=out,
        zeroed_indices=[int(i) for i in zeroed],
        clutter=support,
        test_coefficients=test_coefficients,
        warnings=warnings,
    )


def apply_filter_method(
    dictionary: SteeringDictionary,
    cube: DataCube,
    test_cell: int,
    method: FilterMethod,
) -> FilterOutput:
    """Run one named filter configuration against one range cell."""
    r_test = cube.snapshots[test_cell]
    if method.kind == "matched":
        return FilterOutput(
            magnitude_map=matched_filter_spectrum(dictionary, r_test),
            zeroed_indices=[],
        )
    if method.kind == "annihilate-single":
        return annihilate_single(dictionary, r_test, method.solver, method.gap_limit)

    train_cells = select_training_cells(
        cube.n_range_cells, test_cell, method.n_train, method.n_guard
    )
    r_train = [cube.snapshots[m] for m in train_cells]
    if method.kind == "smi":
        covariance = estimate_covariance(r_train, method.loading_factor)
        return FilterOutput(
            magnitude_map=smi_spectrum(covariance, r_test, dictionary),
            zeroed_indices=[],
        )
    if method.kind == "sidelobe":
        return sidelobe_suppress(
            dictionary, r_train, r_test, method.solver, method.sidelobe
        )
    gap_limit = (
        method.gap_limit if method.gap_limit is not None else default_gap_limit(dictionary)
    )
    train_solutions = np.stack(
        [solve_snapshot(dictionary, r, method.solver).coefficients for r in r_train]
    )
    test_solution = solve_snapshot(dictionary, r_test, method.solver)
    return _annihilate_from_solutions(
        train_solutions, test_solution.coefficients, gap_limit, method.robust
    )


def range_scan(
    cube: DataCube,
    methods,
    target_cell: int,
    dictionary: SteeringDictionary,
) -> ScanResult:
    """Per-range-cell filter response, in dB relative to the target cell.

    Applies each configured filter to every range cell (training cells drawn
    near each cell with guards excluded) and records the output map's
    maximum. Sparse solutions are computed once per cell and shared across
    test cells, since a cell's solution does not depend on which filter call
    consumes it.
    """
    if cube.n_range_cells < 2:
        raise ValueError(
            f"range scan requires at least 2 range cells, got {cube.n_range_cells}"
        )
    if isinstance(methods, FilterMethod):
        methods = [methods]
    if not 0 <= target_cell < cube.n_range_cells:
        raise ValueError(f"target_cell {target_cell} out of range")
    n_cells = cube.n_range_cells
    for method in methods:
        if method.needs_training:
            # Probe the worst-case cell now so failures carry the counts.
            select_training_cells(n_cells, target_cell, method.n_train, method.n_guard)

    solution_cache: dict[SolverConfig, np.ndarray] = {}

    def solutions_for(cfg: SolverConfig) -> np.ndarray:
        if cfg not in solution_cache:
            solution_cache[cfg] = np.stack(
                [
                    solve_snapshot(dictionary, cube.snapshots[m], cfg).coefficients
                    for m in range(n_cells)
                ]
            )
        return solution_cache[cfg]

    responses: dict[str, np.ndarray] = {}
    for method in methods:
        maxima = np.empty(n_cells)
        if method.kind in ("annihilate-single", "annihilate-multi"):
            all_solutions = solutions_for(method.solver)
            gap_limit = (
                method.gap_limit
                if method.gap_limit is not None
                else default_gap_limit(dictionary)
            )
        for m in range(n_cells):
            # Cells holding no dominant component legitimately have no
            # clutter gap; score them on their unzeroed map.
            if method.kind == "annihilate-single":
                out = np.abs(all_solutions[m]).copy()
                try:
                    support, _ = _select_clutter(out, gap_limit)
                    out[support.clutter_indices()] = 0.0
                except NoGapError:
                    pass
                maxima[m] = out.max()
            elif method.kind == "annihilate-multi":
                train_cells = select_training_cells(
                    n_cells, m, method.n_train, method.n_guard
                )
                try:
                    output = _annihilate_from_solutions(
                        all_solutions[train_cells],
                        all_solutions[m],
                        gap_limit,
                        method.robust,
                    )
                    maxima[m] = output.magnitude_map.max()
                except NoGapError:
                    maxima[m] = np.abs(all_solutions[m]).max()
            else:
                output = apply_filter_method(dictionary, cube, m, method)
                maxima[m] = output.magnitude_map.max()
        reference = maxima[target_cell]
        if reference <= 0.0:
            raise UndefinedReferenceError(
                f"method {method.name!r} has zero response at the target cell"
            )
        db = _to_db_relative(maxima, reference)
        db[target_cell] = 0.0
        responses[method.name] = db
    return ScanResult(
        axis_values=np.arange(n_cells, dtype=float), responses_db=responses
    )


def scr_improvement(
    map_before: np.ndarray, map_after: np.ndarray, target_cell: int
) -> float:
    """Gain in target-to-largest-interferer ratio, in dB.

    Compares target magnitude against the strongest non-target cell before
    and after filtering. Non-target maxima are floored at 1e-12 so fully
    annihilated maps stay finite.
    """
    before = np.asarray(map_before, dtype=float)
    after = np.asarray(map_after, dtype=float)
    if before.shape != after.shape:
        raise ValueError("maps must have identical shapes")
    if not 0 <= target_cell < before.size:
        raise ValueError(f"target_cell {target_cell} out of range")
    if before[target_cell] <= 0.0 or after[target_cell] <= 0.0:
        raise UndefinedMetricError(
            "target magnitude is zero; the ratio is undefined"
        )
    others = np.ones(before.size, dtype=bool)
    others[target_cell] = False
    before_ratio = before[target_cell] / max(float(before[others].max()), _SCR_FLOOR)
    after_ratio = after[target_cell] / max(float(after[others].max()), _SCR_FLOOR)
    return float(20.0 * np.log10(after_ratio / before_ratio))


def magnitude_map_to_pgm(
    magnitude_map: np.ndarray, grid
) -> bytes:
    """Render a magnitude map as an 8-bit binary PGM (P5) heatmap.

    Rows are Doppler bins, columns spatial bins. dB relative to the map
    maximum is mapped linearly from [-60, 0] onto pixel values [0, 255];
    zero magnitudes (and anything below -60 dB) render black. The output is
    a pure function of the map, so files are byte-identical across runs.
    """
    magnitude_map = np.asarray(magnitude_map, dtype=float)
    if magnitude_map.shape != (grid.n_cells,):
        raise ValueError(
            f"map length {magnitude_map.shape} does not match grid size "
            f"{grid.n_cells}"
        )
    image = magnitude_map.reshape(grid.n_spatial, grid.n_doppler).T
    peak = image.max()
    if peak <= 0.0:
        pixels = np.zeros_like(image, dtype=np.uint8)
    else:
        with np.errstate(divide="ignore"):
            db = np.where(image > 0, 20.0 * np.log10(image / peak), -np.inf)
        db = np.clip(db, -_PGM_DB_RANGE, 0.0)
        pixels = np.round(255.0 * (db + _PGM_DB_RANGE) / _PGM_DB_RANGE).astype(
            np.uint8
        )
    header = f"P5\n{grid.n_spatial} {grid.n_doppler}\n255\n".encode("ascii")
    return header + pixels.tobytes()
