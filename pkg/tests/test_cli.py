import json
import subprocess
import sys

import pytest

from csstap import (
    ScenarioConfig,
    mountaintop_analog_grid,
    mountaintop_analog_preset,
    read_cube,
    scenario_to_json,
)

GRID_FLAG = "14x64"


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "csstap", *args],
        capture_output=True,
        text=True,
    )


@pytest.fixture(scope="module")
def scene_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "scene.json"
    path.write_text(scenario_to_json(mountaintop_analog_preset(40, 10, seed=11)))
    return path


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory, scene_path):
    out = tmp_path_factory.mktemp("sim")
    result = run_cli("simulate", "--config", str(scene_path), "--out", str(out))
    assert result.returncode == 0, result.stderr
    return out


class TestSimulate:
    def test_cube_header_matches_config(self, sim_dir):
        cube = read_cube(sim_dir / "cube.csc1")
        assert cube.geometry.n_elements == 14
        assert cube.geometry.n_pulses == 16
        assert cube.n_range_cells == 100

    def test_writes_config_echo_and_manifest(self, sim_dir):
        echo = json.loads((sim_dir / "config_echo.json").read_text())
        assert echo["seed"] == 11
        manifest = json.loads((sim_dir / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["tool_version"]

    def test_missing_config_exit_2_names_path(self, tmp_path):
        result = run_cli(
            "simulate", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "o")
        )
        assert result.returncode == 2
        assert "absent.json" in result.stderr

    def test_malformed_json_exit_2_with_line(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"geometry": [,}')
        result = run_cli("simulate", "--config", str(bad), "--out", str(tmp_path / "o"))
        assert result.returncode == 2
        assert "line" in result.stderr

    def test_missing_field_exit_2_names_field(self, tmp_path):
        bad = tmp_path / "partial.json"
        bad.write_text('{"geometry": {"n_elements": 4, "n_pulses": 4}}')
        result = run_cli("simulate", "--config", str(bad), "--out", str(tmp_path / "o"))
        assert result.returncode == 2
        assert "n_range_cells" in result.stderr

    def test_byte_identical_reruns(self, scene_path, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli("simulate", "--config", str(scene_path), "--out", str(out1)).returncode == 0
        assert run_cli("simulate", "--config", str(scene_path), "--out", str(out2)).returncode == 0
        assert (out1 / "cube.csc1").read_bytes() == (out2 / "cube.csc1").read_bytes()

    def test_seed_override(self, scene_path, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_cli("simulate", "--config", str(scene_path), "--out", str(out1), "--seed", "5")
        run_cli("simulate", "--config", str(scene_path), "--out", str(out2))
        assert (out1 / "cube.csc1").read_bytes() != (out2 / "cube.csc1").read_bytes()
        echo = json.loads((out1 / "config_echo.json").read_text())
        assert echo["seed"] == 5


class TestFilter:
    def test_annihilate_single_argmax_is_target(self, scene_path, sim_dir, tmp_path):
        out = tmp_path / "filt"
        result = run_cli(
            "filter",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(out),
            "--method", "annihilate-single",
            "--grid", GRID_FLAG,
            "--gap-limit", "11",
            "--max-support", "24",
        )
        assert result.returncode == 0, result.stderr
        scenario = mountaintop_analog_preset(40, 10, seed=11)
        grid = mountaintop_analog_grid()
        target = scenario.targets[0][1]
        m, n = grid.nearest_cell(target.spatial_freq, target.doppler_freq)
        assert f"argmax spatial_index={m} doppler_index={n}" in result.stdout
        assert (out / "map_cell50.csv").exists()
        assert (out / "map_cell50.pgm").exists()
        assert (out / "diagnostics_cell50.csv").exists()

    def test_sidelobe_eps_one_no_iterations(self, scene_path, sim_dir, tmp_path):
        out = tmp_path / "side"
        result = run_cli(
            "filter",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(out),
            "--method", "sidelobe",
            "--grid", GRID_FLAG,
            "--eps-frac", "1.0",
        )
        assert result.returncode == 0, result.stderr
        lines = (out / "diagnostics_cell50.csv").read_text().strip().split("\n")
        assert len(lines) == 1  # header only

    def test_smi_k3_with_loading_runs(self, scene_path, sim_dir, tmp_path):
        out = tmp_path / "smi"
        result = run_cli(
            "filter",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(out),
            "--method", "smi",
            "--grid", GRID_FLAG,
            "--train-cells", "3",
            "--loading", "1.0",
        )
        assert result.returncode == 0, result.stderr

    def test_unknown_method_exit_2(self, scene_path, sim_dir, tmp_path):
        result = run_cli(
            "filter",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(tmp_path / "x"),
            "--method", "mystery",
        )
        assert result.returncode == 2

    def test_filter_error_exit_4(self, tmp_path):
        # A zero scene gives an all-zero coefficient map: no clutter gap.
        empty = ScenarioConfig(
            geometry=mountaintop_analog_preset(40, 10).geometry,
            n_range_cells=4,
            noise_power=0.0,
            seed=0,
        )
        cfg = tmp_path / "empty.json"
        cfg.write_text(scenario_to_json(empty))
        sim = tmp_path / "sim"
        assert run_cli("simulate", "--config", str(cfg), "--out", str(sim)).returncode == 0
        result = run_cli(
            "filter",
            "--config", str(cfg),
            "--cube", str(sim / "cube.csc1"),
            "--out", str(tmp_path / "f"),
            "--method", "annihilate-single",
            "--grid", GRID_FLAG,
        )
        assert result.returncode == 4
        assert "filter error" in result.stderr

    def test_trace_flag_writes_solver_trace(self, scene_path, sim_dir, tmp_path):
        out = tmp_path / "traced"
        result = run_cli(
            "filter",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(out),
            "--method", "annihilate-single",
            "--grid", GRID_FLAG,
            "--gap-limit", "11",
            "--trace",
        )
        assert result.returncode == 0, result.stderr
        lines = (out / "trace_cell50.csv").read_text().strip().split("\n")
        assert lines[0] == "iter,residual_norm,objective"
        assert len(lines) > 1


class TestScan:
    def test_angle_scan_row_count(self, scene_path, sim_dir, tmp_path):
        out = tmp_path / "angle"
        result = run_cli(
            "scan",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(out),
            "--scan", "angle",
            "--grid", GRID_FLAG,
            "--gap-limit", "11",
        )
        assert result.returncode == 0, result.stderr
        lines = (out / "angle_scan.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 14  # header + one row per spatial bin

    def test_range_scan_row_count(self, scene_path, sim_dir, tmp_path):
        out = tmp_path / "range"
        result = run_cli(
            "scan",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(out),
            "--scan", "range",
            "--grid", GRID_FLAG,
            "--gap-limit", "11",
        )
        assert result.returncode == 0, result.stderr
        lines = (out / "range_scan.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 100

    def test_compare_has_both_method_columns(self, scene_path, sim_dir, tmp_path):
        out = tmp_path / "cmp"
        result = run_cli(
            "compare",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(out),
            "--grid", GRID_FLAG,
            "--gap-limit", "11",
            "--train-cells", "16",
        )
        assert result.returncode == 0, result.stderr
        header = (out / "angle_scan.csv").read_text().split("\n", 1)[0]
        assert header == "axis,cs_db,smi_db"
        assert (out / "report.txt").exists()


class TestManifestReplay:
    def test_simulate_replay_byte_identical(self, scene_path, tmp_path):
        out1 = tmp_path / "orig"
        assert run_cli("simulate", "--config", str(scene_path), "--out", str(out1)).returncode == 0
        out2 = tmp_path / "replay"
        result = run_cli("--manifest", str(out1 / "manifest.json"), "--out", str(out2))
        assert result.returncode == 0, result.stderr
        for name in ("cube.csc1", "config_echo.json", "manifest.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_filter_replay_byte_identical(self, scene_path, sim_dir, tmp_path):
        out1 = tmp_path / "orig"
        result = run_cli(
            "filter",
            "--config", str(scene_path),
            "--cube", str(sim_dir / "cube.csc1"),
            "--out", str(out1),
            "--method", "annihilate-multi",
            "--grid", GRID_FLAG,
            "--gap-limit", "11",
        )
        assert result.returncode == 0, result.stderr
        out2 = tmp_path / "replay"
        result = run_cli("--manifest", str(out1 / "manifest.json"), "--out", str(out2))
        assert result.returncode == 0, result.stderr
        for path in sorted(out1.iterdir()):
            assert (out2 / path.name).read_bytes() == path.read_bytes(), path.name
