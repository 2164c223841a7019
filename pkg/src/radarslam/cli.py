"""Command-line interface.

Subcommands:

* ``simulate`` — render a scenario into an I/Q frame stream plus the
  ground-truth trajectory.
* ``run`` — process a frame stream into a trajectory estimate, scans,
  and (in slam mode) a global occupancy map, with a per-stage timing
  report.
* ``eval`` — compare an estimated trajectory CSV against a reference,
  optionally gating on metric thresholds.
* ``export`` — render heatmap dumps to PGM or CSV for inspection.

Exit codes: 0 success, 1 gate failure, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RadarConfig, default_config, load_config
from .evaluation import (EvaluationError, metrics_report, read_trajectory_csv,
                         write_trajectory_csv, TrajectoryFile)
from .formats import (FormatError, IqStreamWriter, RunManifest, check_gates,
                      dump_frame_heatmaps, read_gate_file, read_heatmap,
                      read_iq_stream, write_heatmap_pgm, write_odometry_csv,
                      write_pgm, write_scan_csv)
from .pipeline import run_pipeline
from .posegraph import export_edge_list
from .scenario import ScenarioError, load_scenario
from .sim import synthesize_trajectory


class CliError(Exception):
    """User-facing command failure (exit code 2)."""


def _load_config_arg(path) -> RadarConfig:
    if path is None:
        return default_config()
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {p}")
    return load_config(p)


def _resolve_frames_path(path) -> Path:
    p = Path(path)
    if p.is_dir():
        candidate = p / "frames.riq"
        if not candidate.exists():
            raise CliError(f"no frames.riq inside directory: {p}")
        return candidate
    if not p.exists():
        raise CliError(f"frame stream not found: {p}")
    return p


def cmd_simulate(args) -> int:
    cfg = _load_config_arg(args.config)
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        raise CliError(f"scenario file not found: {scenario_path}")
    world, trajectory = load_scenario(scenario_path, cfg.frame_rate_hz)
    if args.seed is not None:
        world.rng_seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    speeds = trajectory.speed()
    if speeds.size and speeds.max() > cfg.v_max:
        raise CliError(
            f"trajectory speed {speeds.max():.3f} m/s exceeds the "
            f"unambiguous limit {cfg.v_max:.3f} m/s")

    frames_path = out / "frames.riq"
    with IqStreamWriter(frames_path, cfg.num_chirps, cfg.array.num_elements,
                        cfg.num_fast_samples) as writer:
        for _, frame in synthesize_trajectory(world, trajectory, cfg):
            writer.write(frame)
    truth = TrajectoryFile(trajectory.t, trajectory.x, trajectory.y,
                           trajectory.yaw)
    truth_path = out / "ground_truth.csv"
    write_trajectory_csv(truth, truth_path)
    manifest = RunManifest(
        command="simulate",
        config_path=str(args.config or "<default>"),
        scenario_path=str(scenario_path),
        output_dir=str(out),
        seed=int(world.rng_seed),
        frame_count=len(trajectory),
        outputs={"frames": str(frames_path), "ground_truth": str(truth_path)},
    )
    manifest.write(out / "manifest.json")
    print(f"simulated {len(trajectory)} frames -> {frames_path}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_config_arg(args.config)
    frames_path = _resolve_frames_path(args.frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_dir = None
    if args.dump_heatmaps:
        dump_dir = out / "heatmaps"
        dump_dir.mkdir(exist_ok=True)

    try:
        result = run_pipeline(read_iq_stream(frames_path), cfg,
                              mode=args.mode, dump_dir=dump_dir)
    except (ValueError, FormatError) as exc:
        raise CliError(str(exc))
    if result.frame_count == 0:
        raise CliError(f"frame stream is empty: {frames_path}")

    outputs = {}
    traj_path = out / "trajectory.csv"
    write_trajectory_csv(result.trajectory(), traj_path)
    outputs["trajectory"] = str(traj_path)
    odom_path = out / "odometry.csv"
    write_odometry_csv(result.records, odom_path)
    outputs["odometry"] = str(odom_path)
    scan_path = out / "scans.csv"
    write_scan_csv(result.scans, scan_path)
    outputs["scans"] = str(scan_path)

    if args.mode == "slam":
        grid, origin, resolution = result.backend.render_map()
        map_path = out / "map.pgm"
        write_pgm(map_path, grid, origin, resolution)
        outputs["map"] = str(map_path)
        graph_path = out / "posegraph.txt"
        export_edge_list(result.backend.graph, graph_path)
        outputs["posegraph"] = str(graph_path)

    timing = result.timer.report()
    timing_path = out / "timing.json"
    with open(timing_path, "w") as fh:
        json.dump(timing, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs["timing"] = str(timing_path)

    manifest = RunManifest(
        command="run",
        config_path=str(args.config or "<default>"),
        output_dir=str(out),
        mode=args.mode,
        frame_count=result.frame_count,
        stage_timing_ms=timing["stage_mean_ms"],
        outputs=outputs,
    )
    manifest.write(out / "manifest.json")

    for stage, mean in sorted(timing["stage_mean_ms"].items()):
        print(f"{stage}: {mean:.2f} ms")
    print(f"longest-path total: {timing['longest_path_ms']:.2f} ms over "
          f"{result.frame_count} frames")
    return 0


def cmd_eval(args) -> int:
    try:
        est = read_trajectory_csv(args.est)
        ref = read_trajectory_csv(args.ref)
        metrics = metrics_report(est, ref, delta_m=args.delta,
                                 max_dt=args.max_dt)
    except EvaluationError as exc:
        raise CliError(str(exc))
    for key in sorted(metrics):
        print(f"{key} = {metrics[key]:.6f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "metrics.json", "w") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.gate:
        gate_path = Path(args.gate)
        if not gate_path.exists():
            raise CliError(f"gate file not found: {gate_path}")
        failures = check_gates(metrics, read_gate_file(gate_path))
        if failures:
            for failure in failures:
                print(f"gate violated: {failure}", file=sys.stderr)
            return 1
        print(f"all {len(read_gate_file(gate_path))} gates passed")
    return 0


def cmd_export(args) -> int:
    src = Path(args.input)
    if not src.exists():
        raise CliError(f"heatmap dump not found: {src}")
    try:
        mags, variant = read_heatmap(src)
    except FormatError as exc:
        raise CliError(str(exc))
    wrote = []
    if args.pgm:
        write_heatmap_pgm(args.pgm, mags)
        wrote.append(args.pgm)
    if args.csv:
        np.savetxt(args.csv, mags, fmt="%.8g", delimiter=",")
        wrote.append(args.csv)
    if not wrote:
        raise CliError("export requires --pgm and/or --csv")
    print(f"exported {variant} heatmap {mags.shape[0]}x{mags.shape[1]} -> "
          + ", ".join(str(w) for w in wrote))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarslam",
        description="Radar-native 2D SLAM toolkit: simulate, run, evaluate.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a scenario to an I/Q stream")
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.add_argument("--config", help="radar config file (defaults built in)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="process a frame stream")
    p.add_argument("--frames", required=True,
                   help=".riq stream file or simulate output directory")
    p.add_argument("--config", help="radar config file (defaults built in)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=("odom", "slam"), default="slam")
    p.add_argument("--dump-heatmaps", action="store_true",
                   help="write per-frame RHM1 heatmap dumps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="compare trajectory CSVs")
    p.add_argument("--est", required=True, help="estimated trajectory CSV")
    p.add_argument("--ref", required=True, help="reference trajectory CSV")
    p.add_argument("--gate", help="YAML file of metric upper bounds")
    p.add_argument("--out", help="directory for metrics.json")
    p.add_argument("--delta", type=float, default=1.0,
                   help="relative-error chunk length in meters")
    p.add_argument("--max-dt", type=float, default=0.02,
                   help="association time tolerance in seconds")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="convert a heatmap dump")
    p.add_argument("input", help="RHM1 heatmap dump path")
    p.add_argument("--pgm", help="write a PGM rendering here")
    p.add_argument("--csv", help="write CSV magnitudes here")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, ScenarioError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
