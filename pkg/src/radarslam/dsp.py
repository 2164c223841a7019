"""I/Q cube to heatmap conversion: range FFT, doppler FFT, beamforming.

Produces the two dense representations used downstream:

* range-azimuth heatmaps (azimuth-only and elevation-aware variants),
* doppler-azimuth heatmaps.

All beamforming is delay-and-sum with weights normalized by element
count, so heatmap magnitudes are comparable across subarray variants.
FFTs are orthonormal (``norm="ortho"``) so windowed input power is
preserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import RadarConfig

VARIANT_AZIMUTH = "azimuth"
VARIANT_ELEVATION = "elevation"


@dataclass
class IqCube:
    """One radar frame of complex baseband samples.

    ``data`` is indexed [chirp, virtual antenna, fast-time sample].
    """

    data: np.ndarray
    timestamp: float = 0.0

    @property
    def num_chirps(self) -> int:
        return self.data.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.data.shape[1]

    @property
    def num_fast_samples(self) -> int:
        return self.data.shape[2]


@dataclass
class RangeAzimuthHeatmap:
    """Magnitude grid [range bin, azimuth column]."""

    magnitudes: np.ndarray
    variant: str = VARIANT_AZIMUTH
    timestamp: float = 0.0


@dataclass
class DopplerAzimuthHeatmap:
    """Magnitude grid [doppler bin, azimuth column], zero velocity at
    row ``num_chirps // 2``."""

    magnitudes: np.ndarray
    timestamp: float = 0.0


def check_frame(frame: IqCube, cfg: RadarConfig) -> None:
    expected = (cfg.num_chirps, cfg.array.num_elements, cfg.num_fast_samples)
    if frame.data.shape != expected:
        raise ValueError(
            f"frame dimensions {frame.data.shape} do not match "
            f"config {expected}")


@lru_cache(maxsize=8)
def _hann(n: int) -> np.ndarray:
    return np.hanning(n).astype(np.float32)


@lru_cache(maxsize=16)
def _steering_weights(cfg: RadarConfig, variant: str):
    """(element indices, conjugate steering matrix [n_elements, n_angles]).

    Weights steer to each azimuth column at zero elevation; an element at
    (y, z) half-wavelength offsets sees phase pi * sin(azimuth) * y from an
    in-plane source, so the matched weight is its conjugate divided by the
    element count.
    """
    if variant == VARIANT_AZIMUTH:
        indices = cfg.array.azimuth_subarray
        angles = cfg.ra_axis_rad()
    elif variant == VARIANT_ELEVATION:
        indices = cfg.array.elevation_subarray
        angles = cfg.ra_axis_rad()
    elif variant == "doppler":
        indices = cfg.array.azimuth_subarray
        angles = cfg.da_axis_rad()
    else:
        raise ValueError(f"unknown beamforming variant '{variant}'")
    y = cfg.array.positions(indices)[:, 0]
    phase = np.pi * np.outer(y, np.sin(angles))
    weights = np.exp(-1j * phase).astype(np.complex64) / np.float32(len(indices))
    return indices, weights


def range_fft(frame: IqCube, cfg: RadarConfig) -> np.ndarray:
    """Windowed FFT along fast time.

    Returns a complex cube [chirp, antenna, range bin]; bin ``b``
    corresponds to range ``b * cfg.range_bin_m``.
    """
    check_frame(frame, cfg)
    windowed = frame.data.astype(np.complex64) * _hann(cfg.num_fast_samples)
    spectrum = np.fft.fft(windowed, axis=2, norm="ortho")
    return spectrum[:, :, : cfg.num_range_bins].astype(np.complex64)


def doppler_fft(range_profiled: np.ndarray, cfg: RadarConfig) -> np.ndarray:
    """Windowed, shifted FFT across chirps.

    Returns [doppler bin, antenna, range bin] with zero velocity at index
    ``num_chirps // 2`` and doppler bin spacing ``cfg.v_res``.
    """
    windowed = range_profiled * _hann(cfg.num_chirps)[:, None, None]
    spectrum = np.fft.fft(windowed, axis=0, norm="ortho")
    return np.fft.fftshift(spectrum, axes=0).astype(np.complex64)


def doppler_azimuth_complex(range_profiled: np.ndarray, cfg: RadarConfig) -> np.ndarray:
    """Complex beamformed doppler-azimuth cube [doppler, range, angle]."""
    indices, weights = _steering_weights(cfg, "doppler")
    dopp = doppler_fft(range_profiled, cfg)[:, indices, :]
    # [doppler, el, range] -> [doppler, range, el] @ [el, angle]
    flat = np.ascontiguousarray(dopp.transpose(0, 2, 1)).reshape(-1, len(indices))
    beams = flat @ weights
    return beams.reshape(cfg.num_chirps, cfg.num_range_bins, -1)


def doppler_azimuth(range_profiled: np.ndarray, cfg: RadarConfig,
                    timestamp: float = 0.0) -> DopplerAzimuthHeatmap:
    """Doppler-azimuth heatmap: magnitudes summed over range bins."""
    beams = doppler_azimuth_complex(range_profiled, cfg)
    mags = np.abs(beams).sum(axis=1)
    return DopplerAzimuthHeatmap(mags.astype(np.float32), timestamp)


def range_azimuth_complex(range_profiled: np.ndarray, cfg: RadarConfig,
                          variant: str = VARIANT_AZIMUTH) -> np.ndarray:
    """Complex beamformed range-azimuth cube [chirp, range, angle]."""
    indices, weights = _steering_weights(cfg, variant)
    sub = range_profiled[:, indices, :]
    flat = np.ascontiguousarray(sub.transpose(0, 2, 1)).reshape(-1, len(indices))
    beams = flat @ weights
    return beams.reshape(cfg.num_chirps, cfg.num_range_bins, -1)


def range_azimuth(range_profiled: np.ndarray, cfg: RadarConfig,
                  variant: str = VARIANT_AZIMUTH,
                  timestamp: float = 0.0) -> RangeAzimuthHeatmap:
    """Range-azimuth heatmap: chirp-averaged beamformed magnitudes.

    ``variant="azimuth"`` uses the 8-element in-plane subarray;
    ``variant="elevation"`` uses the two-row subarray steered straight
    ahead in elevation, which attenuates out-of-plane reflectors.
    """
    if variant not in (VARIANT_AZIMUTH, VARIANT_ELEVATION):
        raise ValueError(f"unknown range-azimuth variant '{variant}'")
    beams = range_azimuth_complex(range_profiled, cfg, variant)
    mags = np.abs(beams).mean(axis=0)
    return RangeAzimuthHeatmap(mags.astype(np.float32), variant, timestamp)


def preprocess_frame(frame: IqCube, cfg: RadarConfig):
    """Full preprocessing of one frame.

    Returns (azimuth-only RA map, elevation-aware RA map, DA map).
    """
    rp = range_fft(frame, cfg)
    ra_az = range_azimuth(rp, cfg, VARIANT_AZIMUTH, frame.timestamp)
    ra_el = range_azimuth(rp, cfg, VARIANT_ELEVATION, frame.timestamp)
    da = doppler_azimuth(rp, cfg, frame.timestamp)
    return ra_az, ra_el, da
