"""Binary and text artifact formats.

* Heatmap dump (``.rhm``): 16-byte little-endian header (magic ``RHM1``,
  u32 rows, u32 cols, u32 variant) followed by row-major float32.
* I/Q frame stream (``.riq``): 20-byte header (magic ``RIQS``, u32
  version, u32 chirps, u32 antennas, u32 fast samples), then per frame a
  float64 timestamp and the complex64 cube.
* Global map: binary PGM (P5) plus a ``.meta`` sidecar with resolution
  and origin.
* Odometry / scan CSVs, evaluation gate files, and run manifests.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dsp import (VARIANT_AZIMUTH, VARIANT_ELEVATION, DopplerAzimuthHeatmap,
                  IqCube, RangeAzimuthHeatmap)

HEATMAP_MAGIC = b"RHM1"
STREAM_MAGIC = b"RIQS"
STREAM_VERSION = 1

VARIANT_CODES = {VARIANT_AZIMUTH: 0, VARIANT_ELEVATION: 1, "doppler": 2}
VARIANT_NAMES = {v: k for k, v in VARIANT_CODES.items()}


class FormatError(ValueError):
    """Malformed artifact file."""


# ---------------------------------------------------------------------------
# heatmap dumps

def write_heatmap(path, magnitudes: np.ndarray, variant: str) -> None:
    if variant not in VARIANT_CODES:
        raise FormatError(f"unknown heatmap variant '{variant}'")
    mags = np.ascontiguousarray(magnitudes, dtype="<f4")
    if mags.ndim != 2:
        raise FormatError("heatmap must be 2-D")
    header = HEATMAP_MAGIC + struct.pack(
        "<III", mags.shape[0], mags.shape[1], VARIANT_CODES[variant])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(mags.tobytes())


def read_heatmap(path):
    """Read an ``.rhm`` dump; returns (magnitudes, variant name)."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != HEATMAP_MAGIC:
            raise FormatError(f"{path}: not a heatmap dump (bad magic)")
        rows, cols, code = struct.unpack("<III", header[4:])
        if code not in VARIANT_NAMES:
            raise FormatError(f"{path}: unknown variant code {code}")
        data = np.frombuffer(fh.read(rows * cols * 4), dtype="<f4")
        if data.size != rows * cols:
            raise FormatError(f"{path}: truncated heatmap payload")
    return data.reshape(rows, cols).copy(), VARIANT_NAMES[code]


def dump_frame_heatmaps(out_dir, frame_index: int,
                        ra_az: RangeAzimuthHeatmap,
                        ra_el: RangeAzimuthHeatmap,
                        da: DopplerAzimuthHeatmap) -> None:
    out = Path(out_dir)
    write_heatmap(out / f"frame_{frame_index:06d}_ra.rhm",
                  ra_az.magnitudes, VARIANT_AZIMUTH)
    write_heatmap(out / f"frame_{frame_index:06d}_el.rhm",
                  ra_el.magnitudes, VARIANT_ELEVATION)
    write_heatmap(out / f"frame_{frame_index:06d}_da.rhm",
                  da.magnitudes, "doppler")


# ---------------------------------------------------------------------------
# I/Q frame streams

class IqStreamWriter:
    """Appends frames to a ``.riq`` stream file."""

    def __init__(self, path, num_chirps: int, num_antennas: int,
                 num_fast_samples: int):
        self.shape = (num_chirps, num_antennas, num_fast_samples)
        self._fh = open(path, "wb")
        self._fh.write(STREAM_MAGIC + struct.pack(
            "<IIII", STREAM_VERSION, *self.shape))

    def write(self, frame: IqCube) -> None:
        if frame.data.shape != self.shape:
            raise FormatError(
                f"frame shape {frame.data.shape} does not match stream {self.shape}")
        self._fh.write(struct.pack("<d", float(frame.timestamp)))
        self._fh.write(np.ascontiguousarray(frame.data, dtype="<c8").tobytes())

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_iq_stream(path):
    """Yield :class:`IqCube` frames from a ``.riq`` stream."""
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.read(20)
        if len(header) != 20 or header[:4] != STREAM_MAGIC:
            raise FormatError(f"{path}: not an I/Q stream (bad magic)")
        version, nc, na, ns = struct.unpack("<IIII", header[4:])
        if version != STREAM_VERSION:
            raise FormatError(f"{path}: unsupported stream version {version}")
        frame_bytes = nc * na * ns * 8
        while True:
            stamp = fh.read(8)
            if not stamp:
                return
            if len(stamp) != 8:
                raise FormatError(f"{path}: truncated frame timestamp")
            payload = fh.read(frame_bytes)
            if len(payload) != frame_bytes:
                raise FormatError(f"{path}: truncated frame payload")
            data = np.frombuffer(payload, dtype="<c8").reshape(nc, na, ns)
            yield IqCube(data.copy(), struct.unpack("<d", stamp)[0])


def stream_shape(path):
    """(num_chirps, num_antennas, num_fast_samples) of a stream file."""
    with open(path, "rb") as fh:
        header = fh.read(20)
    if len(header) != 20 or header[:4] != STREAM_MAGIC:
        raise FormatError(f"{path}: not an I/Q stream (bad magic)")
    _, nc, na, ns = struct.unpack("<IIII", header[4:])
    return nc, na, ns


# ---------------------------------------------------------------------------
# occupancy map export

def write_pgm(path, logodds: np.ndarray, origin_xy, resolution_m: float) -> None:
    """Binary PGM of occupancy (black occupied, white free) plus sidecar.

    Row 0 of the PGM is the top of the image, which corresponds to the
    maximum world y; the sidecar records the world pose of the bottom-left
    cell center and the resolution.
    """
    prob = 1.0 / (1.0 + np.exp(-np.asarray(logodds, dtype=np.float64)))
    gray = np.round(255.0 * (1.0 - prob)).astype(np.uint8)
    gray = gray[::-1, :]  # world +y up -> image row 0 at top
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (gray.shape[1], gray.shape[0]))
        fh.write(gray.tobytes())
    meta = {
        "resolution_m": float(resolution_m),
        "origin_x_m": float(origin_xy[0]),
        "origin_y_m": float(origin_xy[1]),
        "origin_yaw_rad": 0.0,
        "rows": int(logodds.shape[0]),
        "cols": int(logodds.shape[1]),
    }
    with open(str(path) + ".meta", "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key} = {value!r}\n")


def write_heatmap_pgm(path, magnitudes: np.ndarray) -> None:
    """Render a heatmap dump to an 8-bit PGM (for the export command)."""
    mags = np.asarray(magnitudes, dtype=np.float64)
    top = mags.max()
    scaled = mags / top if top > 0 else mags
    gray = np.round(255.0 * scaled).astype(np.uint8)[::-1, :]
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (gray.shape[1], gray.shape[0]))
        fh.write(gray.tobytes())


# ---------------------------------------------------------------------------
# CSV records

ODOMETRY_HEADER = ["t", "x", "y", "yaw", "v", "theta", "dyaw",
                   "vel_ok", "rot_ok"]


def write_odometry_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ODOMETRY_HEADER)
        for r in records:
            writer.writerow([
                repr(float(r.t)), repr(float(r.pose.x)), repr(float(r.pose.y)),
                repr(float(r.pose.yaw)), repr(float(r.velocity.speed_mps)),
                repr(float(r.velocity.heading_rad)), repr(float(r.delta_yaw_rad)),
                int(r.velocity_valid), int(r.rotation_valid)])


def write_scan_csv(scans, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "range_m", "azimuth_rad", "strength"])
        for scan in scans:
            for i in range(len(scan)):
                writer.writerow([
                    repr(float(scan.timestamp)), repr(float(scan.ranges_m[i])),
                    repr(float(scan.azimuths_rad[i])),
                    repr(float(scan.strengths[i]))])


# ---------------------------------------------------------------------------
# gate files and manifests

def read_gate_file(path) -> dict:
    """Metric upper bounds: a YAML mapping of metric name to max value."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: invalid gate file: {exc}")
    if not isinstance(data, dict):
        raise FormatError(f"{path}: gate file must be a mapping")
    gates = {}
    for key, value in data.items():
        try:
            gates[str(key)] = float(value)
        except (TypeError, ValueError):
            raise FormatError(f"{path}: gate '{key}' must be numeric")
    return gates


def check_gates(metrics: dict, gates: dict):
    """Violated gate descriptions (empty when all pass)."""
    failures = []
    for key, limit in gates.items():
        if key not in metrics:
            failures.append(f"{key}: metric missing from report")
        elif not metrics[key] <= limit:
            failures.append(f"{key}: {metrics[key]:.6g} > {limit:.6g}")
    return failures


@dataclass
class RunManifest:
    """Provenance record written next to every simulate/run output."""

    command: str
    config_path: str = ""
    scenario_path: str = ""
    output_dir: str = ""
    mode: str = ""
    seed: int = 0
    frame_count: int = 0
    stage_timing_ms: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
