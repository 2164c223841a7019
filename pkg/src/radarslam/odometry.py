"""Egomotion estimation from heatmaps.

Translation: a moving radar sees static reflectors at radial velocity
v * cos(theta + phi) for motion (v, theta) and reflector azimuth phi (all
angles positive to the right of boresight).  The per-column doppler peaks
of a doppler-azimuth heatmap trace this curve; a robust sinusoid fit
recovers (v, theta).

Rotation: pure rotation shifts range-azimuth heatmap content coherently
along the azimuth axis (ranges are unchanged, bearings all change by the
same amount), so the shift maximizing normalized cross-correlation of two
heatmaps measures the yaw change.  Estimates are averaged over forward
and reverse orderings, which are antisymmetric by construction.

Both estimators share their operation signatures with any drop-in
replacement (e.g. learned models) that maps the same inputs to the same
estimate types.
"""

from __future__ import annotations

import math
from collections import deque
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from .config import RadarConfig
from .dsp import VARIANT_AZIMUTH, DopplerAzimuthHeatmap, RangeAzimuthHeatmap
from .geometry import Pose2, VelocityEstimate, compose, wrap_angle

DEFAULT_NOISE_FLOOR_FACTOR = 3.0
DEFAULT_MIN_INLIERS = 12
DEFAULT_MAX_SHIFT_BINS = 30
DEFAULT_MIN_CORRELATION = 0.2


class VelocityUnobservableError(RuntimeError):
    """Raised when too few ridge samples support a velocity fit."""


def _null_timer(name):
    return nullcontext()


@dataclass(frozen=True)
class RidgeSample:
    """Per-azimuth doppler peak: bearing, radial velocity, magnitude."""

    azimuth_rad: float
    radial_velocity_mps: float
    weight: float


@dataclass(frozen=True)
class RotationEstimate:
    """Yaw change over ``k_frames`` frames (counterclockwise positive)."""

    delta_yaw_rad: float
    k_frames: int = 1
    peak_correlation: float = 0.0


def extract_ridge(heatmap: DopplerAzimuthHeatmap, cfg: RadarConfig,
                  noise_floor_factor: float = DEFAULT_NOISE_FLOOR_FACTOR):
    """Per-column doppler peaks exceeding the column-median noise floor.

    Columns whose peak magnitude is not above ``noise_floor_factor`` times
    the column median are omitted.
    """
    mags = heatmap.magnitudes
    peaks = mags.argmax(axis=0)
    peak_mag = mags.max(axis=0)
    medians = np.median(mags, axis=0)
    keep = peak_mag > noise_floor_factor * medians
    keep &= peak_mag > 0.0
    velocities = cfg.doppler_axis_mps()[peaks]
    azimuths = cfg.da_axis_rad()
    return [
        RidgeSample(float(azimuths[i]), float(velocities[i]), float(peak_mag[i]))
        for i in np.nonzero(keep)[0]
    ]


def fit_translation(samples, cfg: RadarConfig,
                    min_inliers: int = DEFAULT_MIN_INLIERS,
                    huber_scale: float | None = None,
                    max_iterations: int = 25) -> VelocityEstimate:
    """Robust fit of (speed, heading) to ridge samples.

    Solves d(phi) = a cos(phi) - b sin(phi) by iteratively reweighted
    least squares with a Huber weight at ``huber_scale`` (defaults to the
    doppler resolution), then maps (a, b) to speed sqrt(a^2 + b^2) and
    heading atan2(-b, a).

    Raises :class:`VelocityUnobservableError` below ``min_inliers``
    samples or on a degenerate bearing distribution.
    """
    if len(samples) < min_inliers:
        raise VelocityUnobservableError(
            f"{len(samples)} ridge samples < {min_inliers} required")
    scale = cfg.v_res if huber_scale is None else huber_scale
    phi = np.array([s.azimuth_rad for s in samples])
    d = np.array([s.radial_velocity_mps for s in samples])
    w0 = np.array([s.weight for s in samples])
    w0 = np.maximum(w0, 0.0)
    if w0.max() > 0:
        w0 = w0 / w0.max()
    else:
        w0 = np.ones_like(w0)

    design = np.column_stack([np.cos(phi), -np.sin(phi)])
    weights = w0.copy()
    params = np.zeros(2)
    for _ in range(max_iterations):
        wd = weights[:, None] * design
        normal = design.T @ wd
        if np.linalg.cond(normal) > 1e8:
            raise VelocityUnobservableError("degenerate bearing distribution")
        new_params = np.linalg.solve(normal, wd.T @ d)
        residuals = d - design @ new_params
        absr = np.abs(residuals) / scale
        weights = w0 * np.where(absr <= 1.0, 1.0, 1.0 / absr)
        if np.all(np.abs(new_params - params) < 1e-12):
            params = new_params
            break
        params = new_params

    residuals = d - design @ params
    inliers = np.abs(residuals) <= 3.0 * scale
    inlier_count = int(inliers.sum())
    rms_pool = residuals[inliers] if inlier_count else residuals
    residual_rms = float(np.sqrt(np.mean(rms_pool**2)))
    a, b = params
    return VelocityEstimate(
        speed_mps=float(math.hypot(a, b)),
        heading_rad=wrap_angle(math.atan2(-b, a)),
        residual_rms=residual_rms,
        inlier_count=inlier_count,
    )


def _column_energy_normalize(mags: np.ndarray) -> np.ndarray:
    norms = np.sqrt((mags.astype(np.float64)**2).sum(axis=0))
    norms[norms == 0.0] = 1.0
    return mags / norms


def _shift_correlations(a: np.ndarray, b: np.ndarray, max_shift: int):
    """NCC of b against a over integer azimuth shifts.

    ``corr[s + max_shift]`` correlates a[:, j] with b[:, j + s] over the
    overlapping columns; a positive best shift means b's content sits at
    higher azimuth columns than a's.
    """
    n_cols = a.shape[1]
    shifts = np.arange(-max_shift, max_shift + 1)
    corr = np.full(len(shifts), -1.0)
    for idx, s in enumerate(shifts):
        if s >= 0:
            av = a[:, : n_cols - s] if s else a
            bv = b[:, s:]
        else:
            av = a[:, -s:]
            bv = b[:, :s]
        if av.shape[1] < 4:
            continue
        num = float((av * bv).sum())
        den = math.sqrt(float((av**2).sum()) * float((bv**2).sum()))
        if den > 0.0:
            corr[idx] = num / den
    return shifts, corr


def _refine_peak(shifts, corr) -> tuple[float, float]:
    best = int(np.argmax(corr))
    peak = float(corr[best])
    if 0 < best < len(shifts) - 1:
        c_m, c_0, c_p = corr[best - 1], corr[best], corr[best + 1]
        denom = c_m - 2.0 * c_0 + c_p
        if denom < -1e-12:
            delta = 0.5 * (c_m - c_p) / denom
            delta = float(np.clip(delta, -0.5, 0.5))
            return float(shifts[best]) + delta, peak
    return float(shifts[best]), peak


def estimate_rotation(h_prev: RangeAzimuthHeatmap, h_curr: RangeAzimuthHeatmap,
                      k: int = 1,
                      max_shift_bins: int = DEFAULT_MAX_SHIFT_BINS,
                      bin_width_deg: float = 1.0) -> RotationEstimate:
    """Yaw change between two azimuth-only range-azimuth heatmaps.

    Correlates column-energy-normalized maps over integer azimuth shifts
    with parabolic sub-bin refinement.  A counterclockwise rotation moves
    reflectors toward higher azimuth columns (rightward of boresight), so
    the yaw estimate equals the best shift times the column spacing.  The
    forward and reverse orderings are estimated and averaged; callers
    should treat results with low ``peak_correlation`` (below
    ``DEFAULT_MIN_CORRELATION``) as unreliable and fall back to a
    zero-rotation prior.
    """
    for h in (h_prev, h_curr):
        if h.variant != VARIANT_AZIMUTH:
            raise ValueError("rotation estimation requires azimuth-only maps")
    if h_prev.magnitudes.shape != h_curr.magnitudes.shape:
        raise ValueError("heatmap dimensions differ")
    a = _column_energy_normalize(h_prev.magnitudes)
    b = _column_energy_normalize(h_curr.magnitudes)
    shifts, corr_f = _shift_correlations(a, b, max_shift_bins)
    shift_f, peak_f = _refine_peak(shifts, corr_f)
    _, corr_r = _shift_correlations(b, a, max_shift_bins)
    shift_r, peak_r = _refine_peak(shifts, corr_r)
    bin_width_rad = math.radians(bin_width_deg)
    fwd = shift_f * bin_width_rad
    rev = shift_r * bin_width_rad
    delta = 0.5 * (fwd - rev)
    return RotationEstimate(
        delta_yaw_rad=float(delta),
        k_frames=int(k),
        peak_correlation=float(min(peak_f, peak_r)),
    )


def integrate(prev: Pose2, vel: VelocityEstimate, rot: RotationEstimate,
              dt: float) -> Pose2:
    """Midpoint integration of one frame of velocity and rotation."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    dyaw = rot.delta_yaw_rad
    fwd, left = vel.body_velocity()
    mid = prev.yaw + 0.5 * dyaw
    c, s = math.cos(mid), math.sin(mid)
    dx = (c * fwd - s * left) * dt
    dy = (s * fwd + c * left) * dt
    return Pose2(prev.x + dx, prev.y + dy, prev.yaw + dyaw)


@dataclass
class OdometryRecord:
    """Per-frame odometry output row."""

    t: float
    pose: Pose2
    velocity: VelocityEstimate
    delta_yaw_rad: float
    velocity_valid: bool
    rotation_valid: bool


class OdometryTracker:
    """Folds per-frame estimates into a trajectory.

    Velocity failures reuse the previous estimate with inflated
    uncertainty; rotation estimates below the correlation threshold fall
    back to a zero-rotation prior.  Rotation fuses per-frame estimates
    from frame spacings ``k_set`` when each is confident.
    """

    def __init__(self, cfg: RadarConfig, start: Pose2 | None = None,
                 k_set=(1, 3),
                 noise_floor_factor: float = DEFAULT_NOISE_FLOOR_FACTOR,
                 min_inliers: int = DEFAULT_MIN_INLIERS,
                 min_correlation: float = DEFAULT_MIN_CORRELATION,
                 max_shift_bins: int = DEFAULT_MAX_SHIFT_BINS):
        self.cfg = cfg
        self.pose = start if start is not None else Pose2()
        self.k_set = tuple(sorted(k_set))
        self.noise_floor_factor = noise_floor_factor
        self.min_inliers = min_inliers
        self.min_correlation = min_correlation
        self.max_shift_bins = max_shift_bins
        self._history = deque(maxlen=max(self.k_set))
        self._last_velocity: VelocityEstimate | None = None
        self._last_t: float | None = None

    def _estimate_velocity(self, da: DopplerAzimuthHeatmap):
        samples = extract_ridge(da, self.cfg, self.noise_floor_factor)
        try:
            return fit_translation(samples, self.cfg, self.min_inliers), True
        except VelocityUnobservableError:
            if self._last_velocity is not None:
                prev = self._last_velocity
                inflated = VelocityEstimate(
                    prev.speed_mps, prev.heading_rad,
                    residual_rms=max(prev.residual_rms * 3.0, self.cfg.v_res),
                    inlier_count=0)
                return inflated, False
            return VelocityEstimate(0.0, 0.0, self.cfg.v_max, 0), False

    def _estimate_rotation(self, ra: RangeAzimuthHeatmap):
        per_frame = []
        confidences = []
        for k in self.k_set:
            if len(self._history) < k:
                continue
            est = estimate_rotation(self._history[-k], ra, k,
                                    self.max_shift_bins)
            if est.peak_correlation >= self.min_correlation:
                per_frame.append(est.delta_yaw_rad / k)
                confidences.append(est.peak_correlation)
        if not per_frame:
            return RotationEstimate(0.0, 1, 0.0), False
        return RotationEstimate(
            float(np.mean(per_frame)), 1, float(min(confidences))), True

    def update(self, ra_az: RangeAzimuthHeatmap, da: DopplerAzimuthHeatmap,
               timestamp: float, timer=None) -> OdometryRecord:
        time = timer.time if timer is not None else _null_timer
        with time("translation"):
            velocity, vel_ok = self._estimate_velocity(da)
        if self._last_t is None:
            rotation, rot_ok = RotationEstimate(0.0, 1, 1.0), True
        else:
            with time("rotation"):
                rotation, rot_ok = self._estimate_rotation(ra_az)
            dt = timestamp - self._last_t
            self.pose = integrate(self.pose, velocity, rotation, dt)
        self._history.append(ra_az)
        self._last_velocity = velocity
        self._last_t = timestamp
        return OdometryRecord(
            t=timestamp, pose=self.pose, velocity=velocity,
            delta_yaw_rad=rotation.delta_yaw_rad,
            velocity_valid=vel_ok, rotation_valid=rot_ok)
