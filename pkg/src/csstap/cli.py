"""Command-line front end.

Commands
--------
simulate  -- write a synthetic data cube (CSC1) from a scenario JSON
filter    -- run one clutter filter against a cube, emit map CSV/PGM
scan      -- angle or range scan over one or more methods, emit CSV
compare   -- sparse-recovery filter vs SMI on one scene, scans + report

Every run writes a ``manifest.json`` echoing the resolved configuration,
tool version, and seed; re-running with ``--manifest`` reproduces the run
byte-for-byte. Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 numerical/filter error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import (
    FilterMethod,
    angle_scan,
    apply_filter_method,
    magnitude_map_to_pgm,
    range_scan,
)
from .cubeio import read_cube, write_cube
from .errors import DictionaryMemoryError
from .filters import SidelobeConfig, diagnostics_to_csv, filter_output_to_csv
from .scene import (
    ScenarioConfig,
    scenario_from_json,
    scenario_to_json,
    synthesize_cube,
)
from .solvers import SolverConfig, solve_snapshot, trace_to_csv
from .steering import AngleDopplerGrid, build_dictionary

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_FILTER_METHODS = ("annihilate-single", "annihilate-multi", "sidelobe", "smi")
_SCAN_KINDS = ("angle", "range")


class _ConfigError(Exception):
    pass


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        ns, nd = text.lower().split("x")
        return int(ns), int(nd)
    except ValueError:
        raise _ConfigError(f"--grid expects NSxND (e.g. 64x64), got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cs-stap",
        description="Sparse-recovery space-time adaptive processing toolkit",
    )
    parser.add_argument("--version", action="version", version=f"cs-stap {__version__}")
    parser.add_argument(
        "--manifest",
        help="re-run a previous invocation from its manifest.json echo",
    )
    parser.add_argument("--out", help="output directory (with --manifest)")
    sub = parser.add_subparsers(dest="command")

    def add_common(p, with_cube: bool):
        p.add_argument("--config", required=True, help="scenario JSON path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        if with_cube:
            p.add_argument("--cube", required=True, help="CSC1 cube path")
            p.add_argument("--grid", default="64x64", help="dictionary grid NSxND")
            p.add_argument("--cell", type=int, default=None, help="range cell under test")
            p.add_argument("--train-cells", type=int, default=16)
            p.add_argument("--guard-cells", type=int, default=5)
            p.add_argument("--gap-limit", type=int, default=None)
            p.add_argument("--delta", type=float, default=0.9)
            p.add_argument("--eps-frac", type=float, default=0.05)
            p.add_argument("--max-peaks", type=int, default=256)
            p.add_argument("--solver", choices=("greedy", "l1"), default="greedy")
            p.add_argument("--max-support", type=int, default=32)
            p.add_argument("--l1-weight", type=float, default=None)
            p.add_argument("--loading", type=float, default=1.0)
            p.add_argument("--robust", choices=("mean", "median"), default="mean")
            p.add_argument("--trace", action="store_true", help="export solver traces")

    sim = sub.add_parser("simulate", help="synthesize a data cube")
    add_common(sim, with_cube=False)

    filt = sub.add_parser("filter", help="run one filter on one range cell")
    add_common(filt, with_cube=True)
    filt.add_argument("--method", required=True, choices=_FILTER_METHODS)

    scan = sub.add_parser("scan", help="angle or range scan")
    add_common(scan, with_cube=True)
    scan.add_argument("--scan", required=True, choices=_SCAN_KINDS)
    scan.add_argument(
        "--method",
        default="annihilate-multi",
        help="comma-separated method list",
    )

    comp = sub.add_parser("compare", help="sparse filter vs SMI")
    add_common(comp, with_cube=True)
    return parser


def _args_to_manifest(args) -> dict:
    manifest = {
        "tool": "cs-stap",
        "tool_version": __version__,
        "command": args.command,
        "seed": args.seed,
        "scenario": json.loads(scenario_to_json(args.scenario_resolved)),
    }
    if args.command != "simulate":
        manifest["cube_path"] = str(Path(args.cube).resolve())
        manifest["grid"] = list(_parse_grid(args.grid))
        manifest["params"] = {
            "cell": args.cell,
            "train_cells": args.train_cells,
            "guard_cells": args.guard_cells,
            "gap_limit": args.gap_limit,
            "delta": args.delta,
            "eps_frac": args.eps_frac,
            "max_peaks": args.max_peaks,
            "solver": args.solver,
            "max_support": args.max_support,
            "l1_weight": args.l1_weight,
            "loading": args.loading,
            "robust": args.robust,
            "trace": bool(args.trace),
        }
    if args.command == "filter":
        manifest["method"] = args.method
    if args.command == "scan":
        manifest["scan"] = args.scan
        manifest["method"] = args.method
    return manifest


def _manifest_to_args(manifest: dict, out_dir: str, parser) -> argparse.Namespace:
    command = manifest.get("command")
    if command not in ("simulate", "filter", "scan", "compare"):
        raise _ConfigError(f"manifest has unknown command {command!r}")
    argv = [command, "--config", "<embedded>", "--out", out_dir]
    if command != "simulate":
        params = manifest.get("params", {})
        grid = manifest.get("grid", [64, 64])
        argv += ["--cube", manifest["cube_path"], "--grid", f"{grid[0]}x{grid[1]}"]
        for flag, key in (
            ("--cell", "cell"),
            ("--train-cells", "train_cells"),
            ("--guard-cells", "guard_cells"),
            ("--gap-limit", "gap_limit"),
            ("--delta", "delta"),
            ("--eps-frac", "eps_frac"),
            ("--max-peaks", "max_peaks"),
            ("--solver", "solver"),
            ("--max-support", "max_support"),
            ("--l1-weight", "l1_weight"),
            ("--loading", "loading"),
            ("--robust", "robust"),
        ):
            value = params.get(key)
            if value is not None:
                argv += [flag, str(value)]
        if params.get("trace"):
            argv += ["--trace"]
    if command == "filter":
        argv += ["--method", manifest["method"]]
    if command == "scan":
        argv += ["--scan", manifest["scan"], "--method", manifest["method"]]
    if manifest.get("seed") is not None:
        argv += ["--seed", str(manifest["seed"])]
    args = parser.parse_args(argv)
    args.scenario_embedded = manifest["scenario"]
    return args


def _load_scenario(args) -> ScenarioConfig:
    embedded = getattr(args, "scenario_embedded", None)
    if embedded is not None:
        text = json.dumps(embedded)
        source = "manifest"
    else:
        path = Path(args.config)
        if not path.exists():
            raise _ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        source = str(path)
    try:
        scenario = scenario_from_json(text)
    except json.JSONDecodeError as exc:
        raise _ConfigError(
            f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    except ValueError as exc:
        raise _ConfigError(f"{source}: {exc}") from None
    if args.seed is not None:
        scenario = ScenarioConfig(
            geometry=scenario.geometry,
            n_range_cells=scenario.n_range_cells,
            clutter=scenario.clutter,
            targets=scenario.targets,
            noise_power=scenario.noise_power,
            prf_hz=scenario.prf_hz,
            seed=args.seed,
        )
    return scenario


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _write_manifest(args, out_dir: Path) -> None:
    doc = _args_to_manifest(args)
    _write_text(out_dir / "manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _solver_config(args) -> SolverConfig:
    if args.solver == "greedy":
        return SolverConfig(
            method="greedy_pursuit",
            max_support=args.max_support,
            max_iterations=max(args.max_support, 64),
            residual_tolerance=0.0,
        )
    return SolverConfig(
        method="l1_proximal",
        max_iterations=10000,
        l1_weight=args.l1_weight,
    )


def _filter_method(args, kind: str, name: str | None = None) -> FilterMethod:
    return FilterMethod(
        name=name or kind,
        kind=kind,
        solver=_solver_config(args),
        n_train=args.train_cells,
        n_guard=args.guard_cells,
        gap_limit=args.gap_limit,
        robust=args.robust,
        sidelobe=SidelobeConfig(
            coherence_threshold=args.delta,
            residue_fraction=args.eps_frac,
            max_peaks=args.max_peaks,
        ),
        loading_factor=args.loading,
    )


def _prepare(args):
    scenario = args.scenario_resolved
    cube = read_cube(
        args.cube, scenario.geometry.element_spacing_wavelengths
    )
    if (
        cube.geometry.n_elements != scenario.geometry.n_elements
        or cube.geometry.n_pulses != scenario.geometry.n_pulses
    ):
        raise _ConfigError(
            f"cube geometry {cube.geometry.n_elements}x{cube.geometry.n_pulses} "
            f"does not match scenario geometry "
            f"{scenario.geometry.n_elements}x{scenario.geometry.n_pulses}"
        )
    grid = AngleDopplerGrid.uniform(*_parse_grid(args.grid))
    dictionary = build_dictionary(scenario.geometry, grid)
    return scenario, cube, dictionary


def _test_cell(args, scenario: ScenarioConfig) -> int:
    if args.cell is not None:
        if not 0 <= args.cell < scenario.n_range_cells:
            raise _ConfigError(
                f"--cell {args.cell} out of range [0, {scenario.n_range_cells})"
            )
        return args.cell
    if scenario.targets:
        return scenario.targets[0][0]
    return scenario.n_range_cells // 2


def _target_bins(scenario: ScenarioConfig, grid: AngleDopplerGrid) -> tuple[int, int]:
    if not scenario.targets:
        raise _ConfigError("scenario defines no target; pass a scenario with one")
    target = scenario.targets[0][1]
    return grid.nearest_cell(target.spatial_freq, target.doppler_freq)


def _cmd_simulate(args, out_dir: Path) -> int:
    scenario = args.scenario_resolved
    cube = synthesize_cube(scenario)
    write_cube(out_dir / "cube.csc1", cube)
    _write_text(out_dir / "config_echo.json", scenario_to_json(scenario) + "\n")
    _write_manifest(args, out_dir)
    print(
        f"wrote {out_dir / 'cube.csc1'}: N={scenario.geometry.n_elements} "
        f"L={scenario.geometry.n_pulses} M={scenario.n_range_cells} "
        f"seed={scenario.seed}"
    )
    return EXIT_OK


def _cmd_filter(args, out_dir: Path) -> int:
    scenario, cube, dictionary = _prepare(args)
    cell = _test_cell(args, scenario)
    method = _filter_method(args, args.method)
    output = apply_filter_method(dictionary, cube, cell, method)
    _write_text(
        out_dir / f"map_cell{cell}.csv", filter_output_to_csv(output, dictionary.grid)
    )
    (out_dir / f"map_cell{cell}.pgm").write_bytes(
        magnitude_map_to_pgm(output.magnitude_map, dictionary.grid)
    )
    _write_text(out_dir / f"diagnostics_cell{cell}.csv", diagnostics_to_csv(output))
    if args.trace:
        cfg = _solver_config(args)
        traced = solve_snapshot(
            dictionary,
            cube.snapshots[cell],
            SolverConfig(
                method=cfg.method,
                max_iterations=cfg.max_iterations,
                residual_tolerance=cfg.residual_tolerance,
                l1_weight=cfg.l1_weight,
                max_support=cfg.max_support,
                step_size=cfg.step_size,
                trace=True,
            ),
        )
        _write_text(out_dir / f"trace_cell{cell}.csv", trace_to_csv(traced.trace))
    _write_manifest(args, out_dir)
    for warning in output.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    peak = int(np.argmax(output.magnitude_map))
    m, n = dictionary.grid.unflatten(peak)
    print(
        f"cell={cell} argmax spatial_index={m} doppler_index={n} "
        f"spatial_freq={dictionary.grid.spatial_freqs[m]!r} "
        f"doppler_freq={dictionary.grid.doppler_freqs[n]!r}"
    )
    return EXIT_OK


def _scan_methods(args) -> list[FilterMethod]:
    methods = []
    for name in str(args.method).split(","):
        name = name.strip()
        if name not in _FILTER_METHODS + ("matched",):
            raise _ConfigError(f"unknown scan method {name!r}")
        methods.append(_filter_method(args, name))
    return methods


def _cmd_scan(args, out_dir: Path) -> int:
    scenario, cube, dictionary = _prepare(args)
    cell = _test_cell(args, scenario)
    methods = _scan_methods(args)
    if args.scan == "angle":
        spatial_bin, doppler_bin = _target_bins(scenario, dictionary.grid)
        outputs = {
            method.name: apply_filter_method(
                dictionary, cube, cell, method
            ).magnitude_map
            for method in methods
        }
        result = angle_scan(outputs, dictionary, doppler_bin, spatial_bin)
        _write_text(out_dir / "angle_scan.csv", result.to_csv())
    else:
        result = range_scan(cube, methods, cell, dictionary)
        _write_text(out_dir / "range_scan.csv", result.to_csv())
    _write_manifest(args, out_dir)
    print(f"wrote {args.scan} scan with methods: {', '.join(result.method_labels)}")
    return EXIT_OK


def _cmd_compare(args, out_dir: Path) -> int:
    scenario, cube, dictionary = _prepare(args)
    cell = _test_cell(args, scenario)
    cs = _filter_method(args, "annihilate-multi", name="cs")
    smi = _filter_method(args, "smi", name="smi")
    spatial_bin, doppler_bin = _target_bins(scenario, dictionary.grid)
    outputs = {}
    for method in (cs, smi):
        output = apply_filter_method(dictionary, cube, cell, method)
        outputs[method.name] = output.magnitude_map
        _write_text(
            out_dir / f"map_{method.name}.csv",
            filter_output_to_csv(output, dictionary.grid),
        )
        (out_dir / f"map_{method.name}.pgm").write_bytes(
            magnitude_map_to_pgm(output.magnitude_map, dictionary.grid)
        )
    result = angle_scan(outputs, dictionary, doppler_bin, spatial_bin)
    _write_text(out_dir / "angle_scan.csv", result.to_csv())
    lines = [f"cs-stap {__version__} comparison, cell {cell}"]
    for name, magnitude_map in outputs.items():
        peak = int(np.argmax(magnitude_map))
        m, n = dictionary.grid.unflatten(peak)
        hit = (m, n) == (spatial_bin, doppler_bin)
        lines.append(
            f"{name}: argmax=({m},{n}) target=({spatial_bin},{doppler_bin}) "
            f"{'HIT' if hit else 'MISS'}"
        )
    _write_text(out_dir / "report.txt", "\n".join(lines) + "\n")
    _write_manifest(args, out_dir)
    print("\n".join(lines))
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "filter": _cmd_filter,
    "scan": _cmd_scan,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        if args.manifest is not None:
            if args.out is None:
                raise _ConfigError("--manifest requires --out")
            manifest_path = Path(args.manifest)
            if not manifest_path.exists():
                raise _ConfigError(f"manifest file not found: {manifest_path}")
            try:
                manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise _ConfigError(
                    f"{manifest_path}: invalid JSON at line {exc.lineno} "
                    f"column {exc.colno}: {exc.msg}"
                ) from None
            args = _manifest_to_args(manifest, args.out, parser)
        elif args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG

        args.scenario_resolved = _load_scenario(args)
    except _ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"i/o error: cannot create {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        return _COMMANDS[args.command](args, out_dir)
    except _ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, DictionaryMemoryError) as exc:
        # Bad shapes/parameters discovered while reading inputs are
        # configuration problems; numerical failures are raised as the
        # library's runtime error types below.
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, RuntimeError) as exc:
        print(f"filter error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
