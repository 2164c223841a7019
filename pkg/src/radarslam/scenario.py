"""Human-readable scenario files: a world plus a trajectory recipe.

Scenarios are YAML documents with two top-level sections::

    world:
      walls: [[x1, y1, x2, y2], ...]
      points: [[x, y, z, reflectivity], ...]
      multipath: false
      out_of_plane: false
      seed: 0
      snr_db: 20.0
      # optional: scatterer_spacing, multipath_attenuation, ceiling_z, ...
    trajectory:
      kind: straight | spin | circle | rounded_rect | samples
      ... generator parameters ...

Validation errors name the offending field; YAML syntax errors carry the
line from the parser.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .geometry import Pose2
from .sim import (ScenarioError, Trajectory, World, circle_trajectory,
                  rounded_rect_trajectory, spin_trajectory,
                  straight_trajectory)

_WORLD_SCALARS = {
    "seed": ("rng_seed", int),
    "snr_db": ("snr_db", float),
    "scatterer_spacing": ("scatterer_spacing_m", float),
    "reflectivity_jitter": ("reflectivity_jitter", float),
    "multipath_attenuation": ("multipath_attenuation", float),
    "multipath_max_distance": ("multipath_max_distance_m", float),
    "ceiling_z": ("ceiling_z_m", float),
    "ceiling_z_band": ("ceiling_z_band_m", float),
    "ceiling_density": ("ceiling_density_per_m2", float),
}


def _require(mapping, key, context):
    if key not in mapping:
        raise ScenarioError(f"missing field '{context}.{key}'")
    return mapping[key]


def _as_float(value, context):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"field '{context}' must be a number, got {value!r}")


def parse_world(data: dict) -> World:
    if not isinstance(data, dict):
        raise ScenarioError("field 'world' must be a mapping")
    kwargs = {}
    walls = data.get("walls", [])
    try:
        kwargs["segments"] = np.asarray(walls, dtype=float).reshape(-1, 4)
    except (TypeError, ValueError):
        raise ScenarioError("field 'world.walls' must be rows of [x1, y1, x2, y2]")
    points = data.get("points", [])
    try:
        kwargs["point_reflectors"] = np.asarray(points, dtype=float).reshape(-1, 4)
    except (TypeError, ValueError):
        raise ScenarioError(
            "field 'world.points' must be rows of [x, y, z, reflectivity]")
    kwargs["enable_multipath"] = bool(data.get("multipath", False))
    kwargs["enable_out_of_plane"] = bool(data.get("out_of_plane", False))
    for key, (attr, cast) in _WORLD_SCALARS.items():
        if key in data:
            try:
                kwargs[attr] = cast(data[key])
            except (TypeError, ValueError):
                raise ScenarioError(f"field 'world.{key}' must be {cast.__name__}")
    known = set(_WORLD_SCALARS) | {"walls", "points", "multipath", "out_of_plane"}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown field 'world.{sorted(unknown)[0]}'")
    return World(**kwargs)


def _parse_pose(value, context) -> Pose2:
    try:
        x, y, yaw = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ScenarioError(f"field '{context}' must be [x, y, yaw_rad]")
    return Pose2(x, y, yaw)


def parse_trajectory(data: dict, frame_rate_hz: float) -> Trajectory:
    if not isinstance(data, dict):
        raise ScenarioError("field 'trajectory' must be a mapping")
    kind = _require(data, "kind", "trajectory")
    ctx = "trajectory"
    if kind == "straight":
        start = _parse_pose(data.get("start", [0.0, 0.0, 0.0]), f"{ctx}.start")
        speed = _as_float(_require(data, "speed", ctx), f"{ctx}.speed")
        duration = _as_float(_require(data, "duration", ctx), f"{ctx}.duration")
        return straight_trajectory(start, speed, duration, frame_rate_hz)
    if kind == "spin":
        pose = _parse_pose(data.get("pose", [0.0, 0.0, 0.0]), f"{ctx}.pose")
        rate = _as_float(_require(data, "yaw_rate", ctx), f"{ctx}.yaw_rate")
        duration = _as_float(_require(data, "duration", ctx), f"{ctx}.duration")
        return spin_trajectory(pose, rate, duration, frame_rate_hz)
    if kind == "circle":
        center = data.get("center", [0.0, 0.0])
        try:
            center = (float(center[0]), float(center[1]))
        except (TypeError, ValueError, IndexError):
            raise ScenarioError(f"field '{ctx}.center' must be [x, y]")
        radius = _as_float(_require(data, "radius", ctx), f"{ctx}.radius")
        speed = _as_float(_require(data, "speed", ctx), f"{ctx}.speed")
        duration = _as_float(_require(data, "duration", ctx), f"{ctx}.duration")
        return circle_trajectory(center, radius, speed, duration, frame_rate_hz)
    if kind == "rounded_rect":
        width = _as_float(_require(data, "width", ctx), f"{ctx}.width")
        height = _as_float(_require(data, "height", ctx), f"{ctx}.height")
        radius = _as_float(data.get("corner_radius", 1.0), f"{ctx}.corner_radius")
        speed = _as_float(_require(data, "speed", ctx), f"{ctx}.speed")
        laps = _as_float(data.get("laps", 1.0), f"{ctx}.laps")
        return rounded_rect_trajectory(width, height, radius, speed,
                                       frame_rate_hz, laps)
    if kind == "samples":
        rows = _require(data, "rows", ctx)
        try:
            arr = np.asarray(rows, dtype=float).reshape(-1, 7)
        except (TypeError, ValueError):
            raise ScenarioError(
                f"field '{ctx}.rows' must be rows of [t, x, y, yaw, vx, vy, yaw_rate]")
        return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3],
                          arr[:, 4], arr[:, 5], arr[:, 6])
    raise ScenarioError(f"unknown trajectory kind '{kind}'")


def load_scenario(path, frame_rate_hz: float = 30.0):
    """Load a scenario file; returns (world, trajectory)."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" (line {mark.line + 1})" if mark else ""
        raise ScenarioError(f"{path}: YAML parse error{line}: {exc}")
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: scenario must be a mapping")
    unknown = set(data) - {"world", "trajectory"}
    if unknown:
        raise ScenarioError(f"{path}: unknown field '{sorted(unknown)[0]}'")
    world = parse_world(_require(data, "world", "scenario"))
    trajectory = parse_trajectory(_require(data, "trajectory", "scenario"),
                                  frame_rate_hz)
    return world, trajectory


def save_scenario(world: World, trajectory: Trajectory, path) -> None:
    """Serialize a world plus explicit trajectory samples."""
    doc = {
        "world": {
            "walls": [[float(v) for v in row] for row in world.segments],
            "points": [[float(v) for v in row] for row in world.point_reflectors],
            "multipath": bool(world.enable_multipath),
            "out_of_plane": bool(world.enable_out_of_plane),
            "seed": int(world.rng_seed),
            "snr_db": float(world.snr_db),
            "scatterer_spacing": float(world.scatterer_spacing_m),
            "reflectivity_jitter": float(world.reflectivity_jitter),
            "multipath_attenuation": float(world.multipath_attenuation),
            "multipath_max_distance": float(world.multipath_max_distance_m),
            "ceiling_z": float(world.ceiling_z_m),
            "ceiling_z_band": float(world.ceiling_z_band_m),
            "ceiling_density": float(world.ceiling_density_per_m2),
        },
        "trajectory": {
            "kind": "samples",
            "rows": [
                [float(trajectory.t[i]), float(trajectory.x[i]),
                 float(trajectory.y[i]), float(trajectory.yaw[i]),
                 float(trajectory.vx[i]), float(trajectory.vy[i]),
                 float(trajectory.yaw_rate[i])]
                for i in range(len(trajectory))
            ],
        },
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
