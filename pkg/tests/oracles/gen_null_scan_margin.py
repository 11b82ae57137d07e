"""Calibrate the null (all-noise) range-scan spread margin.

Monte-Carlo oracle: on cubes containing only receiver noise, the per-cell
filter responses of the annihilating filter should cluster; the test asserts
no cell exceeds the median response by more than a margin. This script
estimates the spread distribution and prints quantiles; the frozen margin in
tests/test_baseline.py was chosen as the observed maximum over 400 runs
plus ~3 dB of headroom.

Run from the repository root: python3 tests/oracles/gen_null_scan_margin.py
"""

import numpy as np

from csstap import (
    AngleDopplerGrid,
    ArrayGeometry,
    FilterMethod,
    ScenarioConfig,
    SolverConfig,
    build_dictionary,
    range_scan,
    synthesize_cube,
)

N_RUNS = 400
N_CELLS = 12


def main():
    geometry = ArrayGeometry(4, 4)
    dictionary = build_dictionary(geometry, AngleDopplerGrid.uniform(8, 8))
    method = FilterMethod(
        name="cs",
        kind="annihilate-single",
        solver=SolverConfig(max_support=6, max_iterations=12),
        gap_limit=5,
    )
    spreads = []
    for seed in range(N_RUNS):
        config = ScenarioConfig(
            geometry=geometry, n_range_cells=N_CELLS, noise_power=1.0, seed=seed
        )
        cube = synthesize_cube(config)
        result = range_scan(cube, method, 0, dictionary)
        db = result.responses_db["cs"]
        spreads.append(float(db.max() - np.median(db)))
    spreads = np.array(spreads)
    print(
        f"runs={N_RUNS} median={np.median(spreads):.2f} "
        f"p99={np.quantile(spreads, 0.99):.2f} max={spreads.max():.2f} dB"
    )


if __name__ == "__main__":
    main()
