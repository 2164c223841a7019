"""SE(2) poses and planar velocity estimates.

Frame conventions used throughout the package:

* World frame: right-handed, ``yaw`` counterclockwise, normalized to
  (-pi, pi].
* Sensor frame: +x along boresight, +y to the left of the sensor.
* Sensor azimuth: measured from boresight, positive to the RIGHT
  (clockwise seen from above).  ``azimuth_from_local`` converts
  sensor-frame coordinates to this convention.

Velocity headings (``VelocityEstimate.heading_rad``) use the sensor
azimuth convention; pose yaws use the world convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, _TWO_PI)
    if a <= 0.0:
        a += _TWO_PI
    return a - math.pi


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorized :func:`wrap_angle`."""
    a = np.mod(np.asarray(angles, dtype=float) + np.pi, _TWO_PI)
    a = np.where(a <= 0.0, a + _TWO_PI, a)
    return a - np.pi


@dataclass(frozen=True)
class Pose2:
    """Planar pose (x, y, yaw) with yaw normalized to (-pi, pi]."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def rotation(self) -> np.ndarray:
        """2x2 world-from-body rotation matrix."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map sensor-frame points (N,2) into the world frame."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation().T + np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])


def identity() -> Pose2:
    return Pose2(0.0, 0.0, 0.0)


def compose(a: Pose2, b: Pose2) -> Pose2:
    """SE(2) group composition a * b (apply b in a's frame)."""
    c, s = math.cos(a.yaw), math.sin(a.yaw)
    return Pose2(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.yaw + b.yaw,
    )


def between(a: Pose2, b: Pose2) -> Pose2:
    """Relative transform d with compose(a, d) == b."""
    c, s = math.cos(a.yaw), math.sin(a.yaw)
    dx, dy = b.x - a.x, b.y - a.y
    return Pose2(c * dx + s * dy, -s * dx + c * dy, b.yaw - a.yaw)


def invert(a: Pose2) -> Pose2:
    """Inverse element: compose(a, invert(a)) == identity."""
    c, s = math.cos(a.yaw), math.sin(a.yaw)
    return Pose2(-(c * a.x + s * a.y), -(-s * a.x + c * a.y), -a.yaw)


def azimuth_from_local(x_forward, y_left):
    """Sensor azimuth (positive right of boresight) of local coordinates."""
    return np.arctan2(-np.asarray(y_left, dtype=float),
                      np.asarray(x_forward, dtype=float))


def local_from_azimuth(azimuth_rad, distance):
    """Inverse of :func:`azimuth_from_local`: (x_forward, y_left) pairs."""
    az = np.asarray(azimuth_rad, dtype=float)
    d = np.asarray(distance, dtype=float)
    return d * np.cos(az), -d * np.sin(az)


def velocity_sensor_to_body(speed_mps: float, heading_rad: float):
    """Convert (speed, sensor-azimuth heading) to body (forward, left)."""
    return speed_mps * math.cos(heading_rad), -speed_mps * math.sin(heading_rad)


@dataclass(frozen=True)
class VelocityEstimate:
    """Planar velocity in the sensor frame: speed plus azimuth heading.

    ``heading_rad`` follows the sensor azimuth convention (positive to the
    right of boresight); ``residual_rms`` is the RMS radial-velocity misfit
    of the estimate and acts as a covariance proxy downstream.
    """

    speed_mps: float
    heading_rad: float
    residual_rms: float = 0.0
    inlier_count: int = 0

    def __post_init__(self):
        if self.speed_mps < 0.0:
            raise ValueError("speed_mps must be >= 0")
        if self.residual_rms < 0.0:
            raise ValueError("residual_rms must be >= 0")
        object.__setattr__(self, "heading_rad", wrap_angle(self.heading_rad))

    def body_velocity(self):
        """Velocity as (forward, left) body-frame components."""
        return velocity_sensor_to_body(self.speed_mps, self.heading_rad)
