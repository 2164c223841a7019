"""Radar chirp, array-geometry, and heatmap-dimension configuration.

Defaults model a single-chip 77 GHz sensor with a 12-element virtual
array: 8 in-plane elements at half-wavelength pitch for azimuth
beamforming plus a 4-element row offset half a wavelength in elevation
for elevation-aware beamforming.

Angle grids: the range-azimuth axis covers [fov_min, fov_max) degrees in
uniform steps (default -44..+43 inclusive, 1 deg); the doppler-azimuth
axis covers [-90, +90) the same way.  Azimuth is positive to the right
of boresight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Invalid or inconsistent radar configuration."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Virtual antenna layout in half-wavelength units.

    ``element_positions`` holds (y, z) offsets with y measured to the
    sensor's right and z upward.  ``azimuth_subarray`` indexes the
    in-plane (z = 0) uniform line used for azimuth-only beamforming;
    ``elevation_subarray`` indexes elements spanning two z rows used for
    elevation-aware beamforming.
    """

    element_positions: tuple
    azimuth_subarray: tuple
    elevation_subarray: tuple

    def __post_init__(self):
        pos = self.element_positions
        n = len(pos)
        for sub in (self.azimuth_subarray, self.elevation_subarray):
            if any(i < 0 or i >= n for i in sub):
                raise ConfigError("subarray index out of range")
        az = [pos[i] for i in self.azimuth_subarray]
        if any(z != 0.0 for _, z in az):
            raise ConfigError("azimuth subarray must lie at z = 0")
        ys = sorted(y for y, _ in az)
        steps = {round(b - a, 9) for a, b in zip(ys, ys[1:])}
        if len(steps) != 1:
            raise ConfigError("azimuth subarray must be uniformly spaced")
        zs = sorted({z for _, z in (pos[i] for i in self.elevation_subarray)})
        if len(zs) != 2 or round(zs[1] - zs[0], 9) != 1.0:
            raise ConfigError(
                "elevation subarray must span two z rows half a wavelength apart")

    @property
    def num_elements(self) -> int:
        return len(self.element_positions)

    def positions(self, indices) -> np.ndarray:
        """(n, 2) array of (y, z) offsets for the given element indices."""
        return np.array([self.element_positions[i] for i in indices], dtype=float)

    @classmethod
    def three_tx_four_rx(cls, elevation_row_y_offset: int = 2) -> "ArrayGeometry":
        """Standard 3TX/4RX virtual array: 8-element azimuth line plus an
        elevated 4-element row starting at ``elevation_row_y_offset``."""
        off = int(elevation_row_y_offset)
        if not 0 <= off <= 4:
            raise ConfigError("elevation_row_y_offset must be in [0, 4]")
        low = [(float(y), 0.0) for y in range(8)]
        high = [(float(y + off), 1.0) for y in range(4)]
        positions = tuple(low + high)
        azimuth = tuple(range(8))
        elevation = tuple(range(off, off + 4)) + tuple(range(8, 12))
        return cls(positions, azimuth, elevation)


class DerivedLimits(NamedTuple):
    v_max: float
    v_res: float
    max_range: float


@dataclass(frozen=True)
class RadarConfig:
    """Chirp timing, sampling, and heatmap-axis parameters."""

    carrier_wavelength_m: float = 3.90e-3
    chirp_interval_s: float = 516e-6
    num_chirps: int = 96
    num_fast_samples: int = 96
    range_bin_m: float = 0.044625
    num_range_bins: int = 96
    azimuth_bins_ra: int = 88
    ra_fov_deg: tuple = (-44.0, 44.0)
    azimuth_bins_da: int = 180
    da_fov_deg: tuple = (-90.0, 90.0)
    frame_rate_hz: float = 30.0
    array: ArrayGeometry = field(default_factory=ArrayGeometry.three_tx_four_rx)

    def __post_init__(self):
        positive = [
            "carrier_wavelength_m", "chirp_interval_s", "num_chirps",
            "num_fast_samples", "range_bin_m", "num_range_bins",
            "azimuth_bins_ra", "azimuth_bins_da", "frame_rate_hz",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("ra_fov_deg", "da_fov_deg"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(f"{name} must be an increasing interval")

    @property
    def v_max(self) -> float:
        """Maximum unambiguous radial velocity, lambda / (4 Tc)."""
        return self.carrier_wavelength_m / (4.0 * self.chirp_interval_s)

    @property
    def v_res(self) -> float:
        """Radial velocity resolution, lambda / (2 Nc Tc)."""
        return self.carrier_wavelength_m / (
            2.0 * self.num_chirps * self.chirp_interval_s)

    @property
    def max_range(self) -> float:
        return self.num_range_bins * self.range_bin_m

    @property
    def frame_interval_s(self) -> float:
        return 1.0 / self.frame_rate_hz

    def ra_axis_rad(self) -> np.ndarray:
        """Range-azimuth column angles [fov_min, fov_max) in radians."""
        lo, hi = self.ra_fov_deg
        step = (hi - lo) / self.azimuth_bins_ra
        return np.deg2rad(lo + step * np.arange(self.azimuth_bins_ra))

    def da_axis_rad(self) -> np.ndarray:
        """Doppler-azimuth column angles [fov_min, fov_max) in radians."""
        lo, hi = self.da_fov_deg
        step = (hi - lo) / self.azimuth_bins_da
        return np.deg2rad(lo + step * np.arange(self.azimuth_bins_da))

    def doppler_axis_mps(self) -> np.ndarray:
        """Doppler-bin radial velocities, zero at index num_chirps // 2."""
        return (np.arange(self.num_chirps) - self.num_chirps // 2) * self.v_res

    def range_axis_m(self) -> np.ndarray:
        return np.arange(self.num_range_bins) * self.range_bin_m


def derived_limits(cfg: RadarConfig) -> DerivedLimits:
    """Velocity limits and maximum range implied by the chirp parameters."""
    return DerivedLimits(cfg.v_max, cfg.v_res, cfg.max_range)


_SCALAR_KEYS = {
    "carrier_wavelength_m": float,
    "chirp_interval_s": float,
    "num_chirps": int,
    "num_fast_samples": int,
    "range_bin_m": float,
    "num_range_bins": int,
    "azimuth_bins_ra": int,
    "azimuth_bins_da": int,
    "frame_rate_hz": float,
}
_PAIR_KEYS = {"ra_fov_deg", "da_fov_deg"}
_ARRAY_KEYS = {"elevation_row_y_offset": int}


def parse_config(text: str, source: str = "<string>") -> RadarConfig:
    """Parse ``key = value`` configuration text.

    Blank lines and ``#`` comments are ignored; unknown keys are rejected.
    """
    values = {}
    array_kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        try:
            if key in _SCALAR_KEYS:
                values[key] = _SCALAR_KEYS[key](val)
            elif key in _PAIR_KEYS:
                parts = [float(p) for p in val.replace(",", " ").split()]
                if len(parts) != 2:
                    raise ValueError("expected two numbers")
                values[key] = tuple(parts)
            elif key in _ARRAY_KEYS:
                array_kwargs["elevation_row_y_offset"] = _ARRAY_KEYS[key](val)
            else:
                raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for '{key}': {exc}")
    if array_kwargs:
        values["array"] = ArrayGeometry.three_tx_four_rx(**array_kwargs)
    return RadarConfig(**values)


def load_config(path) -> RadarConfig:
    """Load a :class:`RadarConfig` from a key-value file."""
    p = Path(path)
    return parse_config(p.read_text(), source=str(p))


def write_config(cfg: RadarConfig, path) -> None:
    """Write a config file that :func:`load_config` reads back."""
    lines = []
    for f in fields(cfg):
        if f.name == "array":
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = f"{v[0]!r}, {v[1]!r}"
        else:
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    elev = cfg.array.positions(cfg.array.elevation_subarray)
    offset = int(min(y for y, z in elev if z == 1.0))
    lines.append(f"elevation_row_y_offset = {offset}")
    Path(path).write_text("\n".join(lines) + "\n")


def default_config() -> RadarConfig:
    return RadarConfig()


def two_row_array_factor(elevation_rad, row_separation_half_wavelengths: float = 1.0):
    """Magnitude response of a two-row array steered to zero elevation.

    For rows separated by ``d`` half-wavelengths the response to a source
    at elevation ``e`` is |cos(pi * d * sin(e) / 2)|; this is the analytic
    attenuation an elevation-aware beamformer applies to out-of-plane
    reflectors relative to in-plane ones.
    """
    e = np.asarray(elevation_rad, dtype=float)
    return np.abs(np.cos(0.5 * math.pi * row_separation_half_wavelengths * np.sin(e)))
