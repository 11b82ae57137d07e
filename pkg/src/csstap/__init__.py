"""Sparse-recovery space-time adaptive processing (CS-STAP).

Builds angle-Doppler steering dictionaries, solves the ill-posed snapshot
equation with complex-valued sparse solvers, filters clutter out of the
recovered coefficient map, and compares against a sample-matrix-inversion
baseline on synthetic scenes.
"""

__version__ = "0.1.0"

from .baseline import (
    CovarianceEstimate,
    FilterMethod,
    ScanResult,
    angle_scan,
    apply_filter_method,
    estimate_covariance,
    magnitude_map_to_pgm,
    matched_filter_spectrum,
    range_scan,
    scr_improvement,
    select_training_cells,
    smi_spectrum,
)
from .cubeio import read_cube, write_cube
from .errors import (
    DegenerateSupportError,
    DictionaryMemoryError,
    NoGapError,
    SingularCovarianceError,
    UndefinedMetricError,
    UndefinedReferenceError,
)
from .filters import (
    ClutterSupport,
    FilterOutput,
    SidelobeConfig,
    SidelobeIteration,
    annihilate_multi,
    annihilate_single,
    default_gap_limit,
    diagnostics_to_csv,
    estimate_gap_index,
    filter_output_to_csv,
    sidelobe_suppress,
)
from .scene import (
    DataCube,
    ScenarioConfig,
    Scatterer,
    mountaintop_analog_grid,
    mountaintop_analog_preset,
    scenario_from_json,
    scenario_to_json,
    synthesize_cube,
    synthesize_snapshot,
)
from .solvers import (
    SolverConfig,
    SparseSolution,
    greedy_solve,
    l1_solve,
    objective_value,
    soft_threshold,
    solve_snapshot,
    trace_to_csv,
)
from .steering import (
    AngleDopplerGrid,
    ArrayGeometry,
    SteeringDictionary,
    azimuth_to_spatial_freq,
    build_dictionary,
    coherence_profile,
    column_coherence,
    doppler_steering,
    space_time_steering,
    spatial_freq_to_azimuth,
    spatial_steering,
)
