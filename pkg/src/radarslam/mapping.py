"""Artifact-suppressed range scans from range-azimuth heatmap pairs.

Pipeline per frame: cell-averaging CFAR detection on the azimuth-only
heatmap, an elevation consistency test against the elevation-aware
heatmap to drop floor/ceiling reflections, then echo suppression keeping
only the first (nearest) detection along each bearing to remove
multipath phantoms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .config import RadarConfig
from .dsp import VARIANT_AZIMUTH, VARIANT_ELEVATION, RangeAzimuthHeatmap

DEFAULT_CFAR_TRAIN = 8
DEFAULT_CFAR_GUARD = 2
DEFAULT_CFAR_SCALE = 4.0
DEFAULT_CONSISTENCY_RATIO = 0.5


@dataclass
class Scan:
    """Sensor-local polar scan: at most one point per azimuth column.

    ``azimuths_rad`` follows the sensor convention (positive right of
    boresight); ranges are meters, strengths are heatmap magnitudes.
    """

    timestamp: float
    ranges_m: np.ndarray
    azimuths_rad: np.ndarray
    strengths: np.ndarray

    def __len__(self) -> int:
        return len(self.ranges_m)

    def to_xy(self) -> np.ndarray:
        """Sensor-frame cartesian points (N, 2) as (forward, left)."""
        x = self.ranges_m * np.cos(self.azimuths_rad)
        y = -self.ranges_m * np.sin(self.azimuths_rad)
        return np.column_stack([x, y])


def detect(ra: RangeAzimuthHeatmap,
           train_cells: int = DEFAULT_CFAR_TRAIN,
           guard_cells: int = DEFAULT_CFAR_GUARD,
           scale: float = DEFAULT_CFAR_SCALE) -> np.ndarray:
    """Cell-averaging CFAR along range, independently per azimuth column.

    A cell is flagged when its magnitude exceeds ``scale`` times the mean
    of the training cells (``train_cells`` each side, separated by
    ``guard_cells`` guard cells).  Near the range edges the available
    training cells are used.
    """
    if ra.variant != VARIANT_AZIMUTH:
        raise ValueError("detection runs on the azimuth-only heatmap")
    mags = ra.magnitudes.astype(np.float64)
    half = train_cells + guard_cells
    kernel = np.ones(2 * half + 1)
    kernel[half - guard_cells: half + guard_cells + 1] = 0.0
    train_sum = convolve1d(mags, kernel, axis=0, mode="constant", cval=0.0)
    train_count = convolve1d(np.ones_like(mags), kernel, axis=0,
                             mode="constant", cval=0.0)
    noise_mean = train_sum / np.maximum(train_count, 1.0)
    return (mags > scale * noise_mean) & (mags > 0.0)


def elevation_filter(detections: np.ndarray,
                     ra_azimuth: RangeAzimuthHeatmap,
                     ra_elevation: RangeAzimuthHeatmap,
                     consistency_ratio: float = DEFAULT_CONSISTENCY_RATIO) -> np.ndarray:
    """Keep detections consistent across azimuth-only and elevation-aware maps.

    Both maps are max-normalized; a detection survives when its
    elevation-aware magnitude is at least ``consistency_ratio`` times its
    azimuth-only magnitude.  In-plane reflectors score near 1, ceiling and
    floor reflectors are attenuated by the two-row array factor.
    """
    if ra_azimuth.variant != VARIANT_AZIMUTH or ra_elevation.variant != VARIANT_ELEVATION:
        raise ValueError("expected (azimuth-only, elevation-aware) heatmap pair")
    if ra_azimuth.magnitudes.shape != ra_elevation.magnitudes.shape:
        raise ValueError("heatmap dimensions differ")
    az = ra_azimuth.magnitudes.astype(np.float64)
    el = ra_elevation.magnitudes.astype(np.float64)
    az_n = az / az.max() if az.max() > 0 else az
    el_n = el / el.max() if el.max() > 0 else el
    return detections & (el_n >= consistency_ratio * az_n)


def echo_suppress(detections: np.ndarray, ra: RangeAzimuthHeatmap,
                  cfg: RadarConfig) -> Scan:
    """Keep only the nearest detection per azimuth column.

    All farther detections along a bearing are treated as echoes
    (multipath travels a longer path than the first surface).  Range bin 0
    is excluded (zero range is outside the valid scan domain).
    """
    det = detections.copy()
    det[0, :] = False
    first = np.where(det.any(axis=0), det.argmax(axis=0), -1)
    cols = np.nonzero(first >= 0)[0]
    rows = first[cols]
    return Scan(
        timestamp=ra.timestamp,
        ranges_m=rows.astype(float) * cfg.range_bin_m,
        azimuths_rad=cfg.ra_axis_rad()[cols],
        strengths=ra.magnitudes[rows, cols].astype(float),
    )


def build_scan(ra_azimuth: RangeAzimuthHeatmap,
               ra_elevation: RangeAzimuthHeatmap, cfg: RadarConfig,
               train_cells: int = DEFAULT_CFAR_TRAIN,
               guard_cells: int = DEFAULT_CFAR_GUARD,
               scale: float = DEFAULT_CFAR_SCALE,
               consistency_ratio: float = DEFAULT_CONSISTENCY_RATIO) -> Scan:
    """Full mapping chain: detect, elevation-filter, echo-suppress."""
    det = detect(ra_azimuth, train_cells, guard_cells, scale)
    det = elevation_filter(det, ra_azimuth, ra_elevation, consistency_ratio)
    return echo_suppress(det, ra_azimuth, cfg)
