import numpy as np
import numpy.testing as npt
import pytest

from csstap import (
    ArrayGeometry,
    DataCube,
    FilterMethod,
    ScenarioConfig,
    Scatterer,
    SingularCovarianceError,
    SolverConfig,
    UndefinedMetricError,
    UndefinedReferenceError,
    angle_scan,
    estimate_covariance,
    magnitude_map_to_pgm,
    matched_filter_spectrum,
    range_scan,
    scr_improvement,
    select_training_cells,
    smi_spectrum,
    synthesize_cube,
)


def noise_snapshots(rng, count, dim, power=1.0):
    scale = np.sqrt(power / 2.0)
    return [
        scale * (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
        for _ in range(count)
    ]


class TestEstimateCovariance:
    def test_zero_snapshots_give_zero_matrix(self):
        est = estimate_covariance([np.zeros(8, dtype=complex)] * 3, 1.0)
        npt.assert_array_equal(est.matrix, np.zeros((8, 8)))
        assert est.loading == 0.0

    def test_single_snapshot_outer_product(self, rng):
        r = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        est = estimate_covariance([r], 0.0)
        npt.assert_allclose(est.matrix, np.outer(r, r.conj()), atol=1e-12)
        assert est.n_samples == 1

    def test_hermitian(self, rng):
        est = estimate_covariance(noise_snapshots(rng, 5, 8), 1.0)
        npt.assert_allclose(est.matrix, est.matrix.conj().T, atol=1e-10)

    def test_white_noise_monte_carlo(self):
        # Monte-Carlo oracle: sample covariance of unit-power noise
        # approaches the identity.
        rng = np.random.default_rng(42)
        est = estimate_covariance(noise_snapshots(rng, 10_000, 4), 0.0)
        npt.assert_allclose(est.matrix, np.eye(4), atol=0.05)

    def test_trace_relative_loading(self, rng):
        snaps = noise_snapshots(rng, 20, 8)
        base = estimate_covariance(snaps, 0.0)
        loaded = estimate_covariance(snaps, 1.0)
        delta = float(np.trace(base.matrix).real) / 8
        npt.assert_allclose(
            loaded.matrix, base.matrix + delta * np.eye(8), atol=1e-12
        )
        assert loaded.loading == pytest.approx(delta)

    def test_absolute_loading(self, rng):
        snaps = noise_snapshots(rng, 4, 8)
        est = estimate_covariance(snaps, 0.0, absolute_loading=2.5)
        assert est.loading == 2.5

    def test_empty_training_rejected(self):
        with pytest.raises(ValueError):
            estimate_covariance([], 1.0)


class TestSmiSpectrum:
    def test_identity_covariance_is_matched_filter(self, dft_dictionary, rng):
        r = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        est = estimate_covariance(noise_snapshots(rng, 40, 16), 0.0)
        est.matrix[:] = np.eye(16)
        smi = smi_spectrum(est, r, dft_dictionary)
        matched = matched_filter_spectrum(dft_dictionary, r)
        assert int(np.argmax(smi)) == int(np.argmax(matched))
        ratio = smi / matched
        npt.assert_allclose(ratio, ratio[0], atol=1e-9)

    def test_matched_filter_peak(self, dft_dictionary):
        r = dft_dictionary.columns[:, 0].copy()
        est = estimate_covariance([r * 0], 0.0, absolute_loading=1.0)
        smi = smi_spectrum(est, r, dft_dictionary)
        assert int(np.argmax(smi)) == 0

    def test_distortionless_constraint(self, dft_dictionary, rng):
        snaps = noise_snapshots(rng, 64, 16)
        est = estimate_covariance(snaps, 0.0)
        inv = np.linalg.inv(est.matrix)
        for j in (0, 5, 11):
            s = dft_dictionary.columns[:, j]
            w = inv @ s / (s.conj() @ inv @ s)
            assert abs(np.vdot(w, s) - 1.0) < 1e-10

    def test_loading_enforced_at_small_sample_support(self, dft_dictionary, rng):
        est = estimate_covariance(noise_snapshots(rng, 3, 16), 0.0)
        with pytest.raises(ValueError, match="loading"):
            smi_spectrum(est, np.zeros(16, dtype=complex), dft_dictionary)

    def test_singular_covariance_names_condition(self, dft_dictionary, rng):
        r = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        est = estimate_covariance([r] * 20, 0.0)  # rank one, K >= N*L
        with pytest.raises(SingularCovarianceError) as info:
            smi_spectrum(est, r, dft_dictionary)
        assert info.value.condition_number > 1e12
        assert "condition" in str(info.value)


class TestAngleScan:
    def test_constant_map_is_zero_db(self, dft_dictionary):
        result = angle_scan(
            {"m": np.ones(16)}, dft_dictionary, doppler_bin=1, normalize_at=2
        )
        npt.assert_allclose(result.responses_db["m"], 0.0, atol=1e-12)
        assert result.method_labels == ["m"]

    def test_single_nonzero_clamps_floor(self, dft_dictionary):
        grid = dft_dictionary.grid
        magnitude_map = np.zeros(16)
        magnitude_map[grid.flat_index(2, 1)] = 5.0
        result = angle_scan(
            {"m": magnitude_map}, dft_dictionary, doppler_bin=1, normalize_at=2
        )
        db = result.responses_db["m"]
        assert db[2] == 0.0
        assert np.all(db[np.arange(4) != 2] == -120.0)

    def test_zero_reference_rejected(self, dft_dictionary):
        with pytest.raises(UndefinedReferenceError):
            angle_scan(
                {"m": np.zeros(16)}, dft_dictionary, doppler_bin=0, normalize_at=0
            )

    def test_axis_in_degrees(self, dft_dictionary):
        result = angle_scan(
            {"m": np.ones(16)}, dft_dictionary, doppler_bin=0, normalize_at=0
        )
        expected = [
            np.rad2deg(np.arccos(np.clip(f / 0.5, -1, 1)))
            for f in dft_dictionary.grid.spatial_freqs
        ]
        npt.assert_allclose(result.axis_values, expected)

    def test_csv_format(self, dft_dictionary):
        result = angle_scan(
            {"cs": np.ones(16), "smi": np.ones(16)},
            dft_dictionary,
            doppler_bin=0,
            normalize_at=0,
        )
        lines = result.to_csv().strip().split("\n")
        assert lines[0] == "axis,cs_db,smi_db"
        assert len(lines) == 1 + 4


class TestSelectTrainingCells:
    def test_guard_cells_excluded(self):
        cells = select_training_cells(20, 10, 6, 2)
        assert all(abs(m - 10) > 2 for m in cells)
        assert len(cells) == 6
        assert cells == sorted(cells)

    def test_nearest_cells_preferred(self):
        cells = select_training_cells(20, 10, 4, 1)
        assert set(cells) == {8, 12, 7, 13}

    def test_insufficient_cells_lists_counts(self):
        with pytest.raises(ValueError, match="requires 10 cells.*9 .*available"):
            select_training_cells(12, 6, 10, 1)


def make_target_cube(n_cells=8, target_cell=3, snr=50.0, seed=7):
    geom = ArrayGeometry(4, 4)
    target = Scatterer(0.25, -0.25, np.sqrt(10 ** (snr / 10.0)))
    config = ScenarioConfig(
        geometry=geom,
        n_range_cells=n_cells,
        targets=((target_cell, target),),
        noise_power=1.0,
        seed=seed,
    )
    return synthesize_cube(config)


class TestRangeScan:
    def test_single_cell_cube_rejected(self, dft_dictionary):
        cube = DataCube(
            geometry=ArrayGeometry(4, 4), snapshots=np.zeros((1, 16), dtype=complex)
        )
        method = FilterMethod(name="cs", kind="annihilate-single")
        with pytest.raises(ValueError, match="at least 2"):
            range_scan(cube, method, 0, dft_dictionary)

    def test_insufficient_training_cells_rejected(self, dft_dictionary):
        cube = make_target_cube(n_cells=6)
        method = FilterMethod(name="cs", kind="annihilate-multi", n_train=16, n_guard=1)
        with pytest.raises(ValueError, match="requires 16"):
            range_scan(cube, method, 3, dft_dictionary)

    def test_planted_target_dominates(self, dft_dictionary):
        cube = make_target_cube(n_cells=10, target_cell=4)
        cfg = SolverConfig(
            max_support=6, max_iterations=12, residual_tolerance=1.1 * 4.0
        )
        method = FilterMethod(
            name="cs",
            kind="annihilate-multi",
            solver=cfg,
            n_train=4,
            n_guard=1,
            gap_limit=3,
        )
        result = range_scan(cube, method, 4, dft_dictionary)
        db = result.responses_db["cs"]
        assert db[4] == 0.0
        others = np.delete(db, 4)
        assert np.all(others <= -20.0)

    def test_all_noise_cube_has_flat_response(self, dft_dictionary):
        # Margin frozen from the Monte-Carlo null calibration
        # (tests/oracles/gen_null_scan_margin.py): spread max 5.7 dB over
        # 400 runs; 9 dB leaves headroom.
        geom = ArrayGeometry(4, 4)
        config = ScenarioConfig(
            geometry=geom, n_range_cells=12, noise_power=1.0, seed=3
        )
        cube = synthesize_cube(config)
        method = FilterMethod(
            name="cs",
            kind="annihilate-single",
            solver=SolverConfig(max_support=6, max_iterations=12),
            gap_limit=5,
        )
        result = range_scan(cube, method, 0, dft_dictionary)
        db = result.responses_db["cs"]
        assert db.max() - np.median(db) <= 9.0

    def test_multiple_methods_share_axis(self, dft_dictionary):
        cube = make_target_cube(n_cells=10, target_cell=4)
        cs = FilterMethod(
            name="cs",
            kind="annihilate-multi",
            solver=SolverConfig(
                max_support=6, max_iterations=12, residual_tolerance=4.4
            ),
            n_train=4,
            n_guard=1,
            gap_limit=3,
        )
        smi = FilterMethod(name="smi", kind="smi", n_train=4, n_guard=1)
        result = range_scan(cube, [cs, smi], 4, dft_dictionary)
        assert result.method_labels == ["cs", "smi"]
        assert len(result.axis_values) == 10


class TestScrImprovement:
    def test_identity_maps_zero_gain(self, rng):
        m = np.abs(rng.standard_normal(12)) + 0.1
        assert scr_improvement(m, m, 3) == pytest.approx(0.0, abs=1e-12)

    def test_full_annihilation_hits_floor(self):
        before = np.array([1.0, 1.0, 1.0, 1.0])
        after = np.array([0.0, 1.0, 0.0, 0.0])
        assert scr_improvement(before, after, 1) >= 100.0

    def test_zero_target_rejected(self):
        before = np.array([1.0, 0.0])
        after = np.array([1.0, 1.0])
        with pytest.raises(UndefinedMetricError):
            scr_improvement(before, after, 1)
        with pytest.raises(UndefinedMetricError):
            scr_improvement(after, before, 1)

    def test_known_gain(self):
        before = np.array([10.0, 1.0, 5.0])
        after = np.array([0.1, 1.0, 0.05])
        # before ratio 1/10, after ratio 1/0.1 = 10 -> 40 dB
        assert scr_improvement(before, after, 1) == pytest.approx(40.0)


class TestPgmExport:
    def test_golden_bytes(self):
        # 2x2 grid, map [1, 0.1, 0.01, 0]: dB rel max = [0, -20, -40, floor]
        # -> pixels [255, 170, 85, 0] after the [-60, 0] linear mapping.
        from csstap import AngleDopplerGrid

        grid = AngleDopplerGrid.uniform(2, 2)
        magnitude_map = np.array([1.0, 0.1, 0.01, 0.0])
        data = magnitude_map_to_pgm(magnitude_map, grid)
        assert data.startswith(b"P5\n2 2\n255\n")
        pixels = np.frombuffer(data[len(b"P5\n2 2\n255\n") :], dtype=np.uint8)
        # rows are Doppler bins: pixel (row=n, col=m) = map[m*2+n]
        npt.assert_array_equal(pixels, [255, 85, 170, 0])

    def test_bit_exact_reproducibility(self, dft_dictionary, rng):
        magnitude_map = np.abs(rng.standard_normal(16))
        a = magnitude_map_to_pgm(magnitude_map, dft_dictionary.grid)
        b = magnitude_map_to_pgm(magnitude_map.copy(), dft_dictionary.grid)
        assert a == b

    def test_all_zero_map_is_black(self, dft_dictionary):
        data = magnitude_map_to_pgm(np.zeros(16), dft_dictionary.grid)
        pixels = np.frombuffer(data.split(b"\n", 3)[3], dtype=np.uint8)
        assert np.all(pixels == 0)
