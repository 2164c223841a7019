"""Radar-native 2D SLAM toolkit.

Simulates single-chip FMCW radar returns in synthetic indoor worlds and
recovers trajectory and map via doppler-based translation estimation,
azimuth-correlation rotation estimation, artifact-suppressed scan
extraction, and a submap pose-graph backend.
"""

__version__ = "0.1.0"

from .config import (ArrayGeometry, ConfigError, RadarConfig, default_config,
                     derived_limits, load_config, two_row_array_factor)
from .geometry import (Pose2, VelocityEstimate, between, compose, invert,
                       wrap_angle)
from .dsp import (DopplerAzimuthHeatmap, IqCube, RangeAzimuthHeatmap,
                  doppler_azimuth, preprocess_frame, range_azimuth, range_fft)
from .sim import (Trajectory, World, build_scatterers, discretize_world,
                  inject_multipath, inject_out_of_plane, synthesize_frame)
from .odometry import (OdometryTracker, RidgeSample, RotationEstimate,
                       VelocityUnobservableError, estimate_rotation,
                       extract_ridge, fit_translation, integrate)
from .mapping import Scan, build_scan, detect, echo_suppress, elevation_filter
from .slam import (BackendParams, MatchWindow, SlamBackend, Submap,
                   SubmapParams, detect_loop, insert_scan, match_scan,
                   render_global_map)
from .posegraph import PoseGraph, optimize
from .evaluation import TrajectoryFile, ate, relative_error
