"""Synthetic worlds, trajectories, and raw I/Q frame synthesis.

Worlds are 2D wall segments plus optional point reflectors.  Walls are
discretized into point scatterers (smooth surfaces still scatter at
mmWave scales), optionally augmented with first-order multipath ghosts
mirrored behind walls and with out-of-plane ceiling reflectors that
project into the horizontal plane at their slant range.

Frame synthesis is stop-and-hop: ranges are frozen at the frame
timestamp and doppler comes from the instantaneous platform velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RadarConfig
from .dsp import IqCube
from .geometry import Pose2, wrap_angle

# scatterer array columns
COL_X, COL_Y, COL_Z, COL_REFL = 0, 1, 2, 3

# labels assigned by build_scatterers
LABEL_WALL = 0
LABEL_POINT = 1
LABEL_GHOST = 2
LABEL_OUT_OF_PLANE = 3


class ScenarioError(ValueError):
    """Invalid world or trajectory description."""


@dataclass
class World:
    """Reflector world: wall segments, point reflectors, artifact toggles.

    ``segments`` is an (M, 4) array of wall endpoints (x1, y1, x2, y2);
    ``point_reflectors`` is an (K, 4) array of (x, y, z, reflectivity).
    """

    segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    point_reflectors: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    enable_multipath: bool = False
    enable_out_of_plane: bool = False
    rng_seed: int = 0
    snr_db: float = 20.0
    scatterer_spacing_m: float = 0.1
    reflectivity_jitter: float = 0.3
    multipath_attenuation: float = 0.3
    multipath_max_distance_m: float = 3.0
    ceiling_z_m: float = 1.5
    ceiling_z_band_m: float = 0.3
    ceiling_density_per_m2: float = 0.2

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        self.point_reflectors = np.asarray(
            self.point_reflectors, dtype=float).reshape(-1, 4)
        lengths = np.hypot(self.segments[:, 2] - self.segments[:, 0],
                           self.segments[:, 3] - self.segments[:, 1])
        if np.any(lengths <= 0.0):
            raise ScenarioError("degenerate wall segment (zero length)")
        if np.any(self.point_reflectors[:, COL_REFL] <= 0.0):
            raise ScenarioError("point reflectivity must be positive")


@dataclass
class Trajectory:
    """Time-ordered platform states sampled at the radar frame rate."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    yaw_rate: np.ndarray

    def __post_init__(self):
        arrays = [self.t, self.x, self.y, self.yaw,
                  self.vx, self.vy, self.yaw_rate]
        n = len(self.t)
        if any(len(a) != n for a in arrays):
            raise ScenarioError("trajectory arrays must have equal length")
        if n and np.any(np.diff(self.t) <= 0.0):
            raise ScenarioError("trajectory timestamps must strictly increase")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ScenarioError("trajectory contains non-finite values")

    def __len__(self) -> int:
        return len(self.t)

    def pose(self, i: int) -> Pose2:
        return Pose2(float(self.x[i]), float(self.y[i]), float(self.yaw[i]))

    def speed(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)

    def path_length(self) -> float:
        return float(np.hypot(np.diff(self.x), np.diff(self.y)).sum())


def discretize_world(world: World, spacing: float) -> np.ndarray:
    """Replace wall segments by point scatterers at <= ``spacing`` intervals.

    Per-point reflectivity jitter is drawn from the world seed, so the
    scatterer set is deterministic per world; point reflectors pass
    through unchanged.  Returns an (N, 4) array of (x, y, z, reflectivity).
    """
    if spacing <= 0.0:
        raise ScenarioError("spacing must be positive")
    rng = np.random.default_rng(world.rng_seed)
    chunks = []
    for x1, y1, x2, y2 in world.segments:
        length = math.hypot(x2 - x1, y2 - y1)
        n = max(2, int(math.ceil(length / spacing)) + 1)
        s = np.linspace(0.0, 1.0, n)
        refl = 1.0 + world.reflectivity_jitter * rng.uniform(-1.0, 1.0, n)
        pts = np.column_stack([
            x1 + s * (x2 - x1),
            y1 + s * (y2 - y1),
            np.zeros(n),
            refl,
        ])
        chunks.append(pts)
    if world.point_reflectors.size:
        chunks.append(world.point_reflectors)
    if not chunks:
        return np.zeros((0, 4))
    return np.vstack(chunks)


def inject_multipath(scatterers: np.ndarray, segments: np.ndarray,
                     attenuation: float = 0.3,
                     max_distance_m: float = 3.0) -> np.ndarray:
    """Append first-order multipath ghosts mirrored across walls.

    A (scatterer, wall) pair produces a ghost when the scatterer lies
    within ``max_distance_m`` of the wall line and its perpendicular foot
    falls inside the segment; the ghost sits at the mirror image with
    reflectivity scaled by ``attenuation``.  Mirror geometry guarantees
    the ghost path exceeds the direct path to the wall along the same
    bearing.
    """
    scatterers = np.asarray(scatterers, dtype=float).reshape(-1, 4)
    segments = np.asarray(segments, dtype=float).reshape(-1, 4)
    if not scatterers.size or not segments.size:
        return scatterers.copy()
    ghosts = []
    p = scatterers[:, :2]
    for x1, y1, x2, y2 in segments:
        a = np.array([x1, y1])
        d = np.array([x2 - x1, y2 - y1])
        length = math.hypot(*d)
        u = d / length
        rel = p - a
        along = rel @ u
        perp = rel[:, 0] * (-u[1]) + rel[:, 1] * u[0]
        keep = ((np.abs(perp) > 0.05) & (np.abs(perp) <= max_distance_m)
                & (along >= 0.0) & (along <= length))
        if not np.any(keep):
            continue
        foot = a + np.outer(along[keep], u)
        mirrored = 2.0 * foot - p[keep]
        g = scatterers[keep].copy()
        g[:, :2] = mirrored
        g[:, COL_REFL] *= attenuation
        ghosts.append(g)
    if not ghosts:
        return scatterers.copy()
    return np.vstack([scatterers] + ghosts)


def inject_out_of_plane(scatterers: np.ndarray, region,
                        z_m: float = 1.5, z_band_m: float = 0.3,
                        density_per_m2: float = 0.2,
                        seed: int = 0) -> np.ndarray:
    """Append ceiling reflectors at |z| > 0 scattered over ``region``.

    ``region`` is (xmin, xmax, ymin, ymax); the count is the region area
    times ``density_per_m2``.  These project into horizontal heatmaps at
    their slant range.
    """
    scatterers = np.asarray(scatterers, dtype=float).reshape(-1, 4)
    xmin, xmax, ymin, ymax = region
    area = max(0.0, xmax - xmin) * max(0.0, ymax - ymin)
    count = int(round(area * density_per_m2))
    if count == 0:
        return scatterers.copy()
    rng = np.random.default_rng(seed)
    pts = np.column_stack([
        rng.uniform(xmin, xmax, count),
        rng.uniform(ymin, ymax, count),
        z_m + rng.uniform(-0.5, 0.5, count) * z_band_m,
        rng.uniform(0.8, 1.6, count),
    ])
    return np.vstack([scatterers, pts]) if scatterers.size else pts


def world_bounds(world: World, margin: float = 0.0):
    """Bounding box (xmin, xmax, ymin, ymax) of walls and points."""
    xs, ys = [], []
    if world.segments.size:
        xs += [world.segments[:, 0], world.segments[:, 2]]
        ys += [world.segments[:, 1], world.segments[:, 3]]
    if world.point_reflectors.size:
        xs.append(world.point_reflectors[:, 0])
        ys.append(world.point_reflectors[:, 1])
    if not xs:
        return (-margin, margin, -margin, margin)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    return (float(x.min()) - margin, float(x.max()) + margin,
            float(y.min()) - margin, float(y.max()) + margin)


def build_scatterers(world: World, spacing: float | None = None):
    """Discretize a world and apply enabled artifact injections.

    Returns (scatterers, labels) where labels tag each row as wall,
    point, multipath ghost, or out-of-plane reflector.
    """
    spacing = world.scatterer_spacing_m if spacing is None else spacing
    base = discretize_world(world, spacing)
    n_walls = len(base) - len(world.point_reflectors)
    labels = np.full(len(base), LABEL_WALL, dtype=np.int8)
    labels[n_walls:] = LABEL_POINT
    out = base
    if world.enable_multipath:
        out = inject_multipath(out, world.segments,
                               world.multipath_attenuation,
                               world.multipath_max_distance_m)
        labels = np.concatenate([
            labels, np.full(len(out) - len(labels), LABEL_GHOST, dtype=np.int8)])
    if world.enable_out_of_plane:
        out = inject_out_of_plane(out, world_bounds(world),
                                  world.ceiling_z_m, world.ceiling_z_band_m,
                                  world.ceiling_density_per_m2,
                                  seed=world.rng_seed + 1)
        labels = np.concatenate([
            labels,
            np.full(len(out) - len(labels), LABEL_OUT_OF_PLANE, dtype=np.int8)])
    return out, labels


def synthesize_frame(scatterers: np.ndarray, pose: Pose2, velocity,
                     yaw_rate: float, cfg: RadarConfig,
                     snr_db: float = 20.0, noise_seed: int = 0,
                     timestamp: float = 0.0) -> IqCube:
    """Synthesize one I/Q cube from point scatterers.

    Each scatterer within range and in front of the array contributes a
    fast-time tone at its slant range, a per-chirp doppler phase from the
    closing velocity, and per-antenna phases from its direction sines,
    scaled by reflectivity over range squared.  Seeded complex Gaussian
    noise is added at ``snr_db`` relative to a unit reflector at 1 m.

    ``velocity`` is the world-frame (vx, vy) of the platform; ``yaw_rate``
    does not enter the stop-and-hop model (pure rotation has zero radial
    velocity) but is part of the trajectory contract.
    """
    del yaw_rate
    nc, ns = cfg.num_chirps, cfg.num_fast_samples
    na = cfg.array.num_elements
    cube = np.zeros((nc, na, ns), dtype=np.complex64)

    sc = np.asarray(scatterers, dtype=float).reshape(-1, 4)
    if sc.size:
        dxw = sc[:, COL_X] - pose.x
        dyw = sc[:, COL_Y] - pose.y
        z = sc[:, COL_Z]
        c, s = math.cos(pose.yaw), math.sin(pose.yaw)
        fwd = c * dxw + s * dyw
        left = -s * dxw + c * dyw
        horiz = np.hypot(fwd, left)
        slant = np.hypot(horiz, z)
        visible = (slant < cfg.max_range) & (slant > 0.15) & (fwd > 0.02)
        if np.any(visible):
            dxw, dyw, z = dxw[visible], dyw[visible], z[visible]
            fwd, left, slant = fwd[visible], left[visible], slant[visible]
            refl = sc[visible, COL_REFL]
            vx, vy = velocity
            v_rad = (vx * dxw + vy * dyw) / slant  # closing speed, positive
            u = -left / slant                      # direction sine, y right
            w = z / slant
            amp = (refl / slant**2).astype(np.float32)

            y_a = cfg.array.positions(range(na))[:, 0]
            z_a = cfg.array.positions(range(na))[:, 1]
            fast = np.exp((2j * np.pi / (cfg.range_bin_m * ns))
                          * np.outer(slant, np.arange(ns))).astype(np.complex64)
            dopp = np.exp((2j * np.pi * 2.0 * cfg.chirp_interval_s
                           / cfg.carrier_wavelength_m)
                          * np.outer(v_rad, np.arange(nc))).astype(np.complex64)
            ant = np.exp(1j * np.pi
                         * (np.outer(u, y_a) + np.outer(w, z_a))).astype(np.complex64)

            # cube[c, a, s] = sum_i amp_i * dopp[i, c] * ant[i, a] * fast[i, s]
            per_chirp_fast = (dopp[:, :, None] * fast[:, None, :]).reshape(len(slant), -1)
            per_chirp_fast *= amp[:, None]
            mixed = (ant.T.astype(np.complex64) @ per_chirp_fast).reshape(na, nc, ns)
            cube += mixed.transpose(1, 0, 2)

    sigma = 10.0 ** (-snr_db / 20.0)
    rng = np.random.default_rng(noise_seed)
    noise = rng.standard_normal((nc, na, ns, 2), dtype=np.float32)
    cube += (sigma / math.sqrt(2.0)) * (noise[..., 0] + 1j * noise[..., 1])
    return IqCube(cube, timestamp)


def frame_noise_seed(base_seed: int, frame_index: int) -> int:
    """Deterministic per-frame noise seed, stable under parallel synthesis."""
    return int(np.random.SeedSequence([base_seed, frame_index]).generate_state(1)[0])


def synthesize_trajectory(world: World, trajectory: Trajectory,
                          cfg: RadarConfig, spacing: float | None = None):
    """Yield (index, IqCube) for every trajectory sample."""
    scatterers, _ = build_scatterers(world, spacing)
    for i in range(len(trajectory)):
        frame = synthesize_frame(
            scatterers, trajectory.pose(i),
            (float(trajectory.vx[i]), float(trajectory.vy[i])),
            float(trajectory.yaw_rate[i]), cfg,
            snr_db=world.snr_db,
            noise_seed=frame_noise_seed(world.rng_seed, i),
            timestamp=float(trajectory.t[i]))
        yield i, frame


def raycast(segments: np.ndarray, pose: Pose2, azimuths_rad: np.ndarray,
            max_range: float) -> np.ndarray:
    """First wall intersection per bearing; inf where nothing is hit.

    ``azimuths_rad`` uses the sensor convention (positive right of
    boresight).  Used for ground-truth scans and visibility checks.
    """
    segments = np.asarray(segments, dtype=float).reshape(-1, 4)
    az = np.asarray(azimuths_rad, dtype=float)
    dirs_world = np.column_stack([
        np.cos(pose.yaw - az), np.sin(pose.yaw - az)])
    best = np.full(len(az), np.inf)
    origin = np.array([pose.x, pose.y])
    for x1, y1, x2, y2 in segments:
        a = np.array([x1, y1])
        d = np.array([x2 - x1, y2 - y1])
        # solve origin + t*dir = a + s*d
        denom = dirs_world[:, 0] * (-d[1]) - dirs_world[:, 1] * (-d[0])
        ok = np.abs(denom) > 1e-12
        rel = a - origin
        t = np.where(ok, (rel[0] * (-d[1]) - rel[1] * (-d[0])) / np.where(ok, denom, 1.0), np.inf)
        s_par = np.where(ok, (dirs_world[:, 0] * rel[1] - dirs_world[:, 1] * rel[0]) / np.where(ok, denom, 1.0), 0.0)
        hit = ok & (t > 1e-9) & (t <= max_range) & (s_par >= 0.0) & (s_par <= 1.0)
        best = np.where(hit & (t < best), t, best)
    return best


# ---------------------------------------------------------------------------
# trajectory generators

def _trajectory_from_path(t, x, y, heading, speed, yaw_rate):
    vx = speed * np.cos(heading)
    vy = speed * np.sin(heading)
    yaw = np.array([wrap_angle(h) for h in heading])
    return Trajectory(t, x, y, yaw, vx, vy, yaw_rate)


def straight_trajectory(start: Pose2, speed: float, duration: float,
                        rate_hz: float) -> Trajectory:
    """Constant-velocity straight line along the starting heading."""
    n = max(2, int(round(duration * rate_hz)))
    t = np.arange(n) / rate_hz
    x = start.x + speed * t * math.cos(start.yaw)
    y = start.y + speed * t * math.sin(start.yaw)
    heading = np.full(n, start.yaw)
    return _trajectory_from_path(t, x, y, heading, np.full(n, speed), np.zeros(n))


def spin_trajectory(pose: Pose2, yaw_rate: float, duration: float,
                    rate_hz: float) -> Trajectory:
    """In-place rotation at constant yaw rate."""
    n = max(2, int(round(duration * rate_hz)))
    t = np.arange(n) / rate_hz
    heading = pose.yaw + yaw_rate * t
    return _trajectory_from_path(t, np.full(n, pose.x), np.full(n, pose.y),
                                 heading, np.zeros(n), np.full(n, yaw_rate))


def circle_trajectory(center, radius: float, speed: float, duration: float,
                      rate_hz: float, start_angle: float = 0.0) -> Trajectory:
    """Counterclockwise circle, boresight along the direction of travel."""
    n = max(2, int(round(duration * rate_hz)))
    t = np.arange(n) / rate_hz
    omega = speed / radius
    ang = start_angle + omega * t
    x = center[0] + radius * np.cos(ang)
    y = center[1] + radius * np.sin(ang)
    heading = ang + math.pi / 2.0
    return _trajectory_from_path(t, x, y, heading, np.full(n, speed),
                                 np.full(n, omega))


def rounded_rect_trajectory(width: float, height: float, corner_radius: float,
                            speed: float, rate_hz: float,
                            laps: float = 1.0) -> Trajectory:
    """Counterclockwise loop around a rectangle with rounded corners.

    The rectangle is centered at the origin; ``width``/``height`` are the
    outer dimensions of the path.
    """
    w2, h2, r = width / 2.0, height / 2.0, corner_radius
    if r <= 0 or r > min(w2, h2):
        raise ScenarioError("corner_radius must be in (0, min(width, height)/2]")
    straight_x = width - 2 * r
    straight_y = height - 2 * r
    perimeter = 2 * (straight_x + straight_y) + 2 * math.pi * r
    duration = perimeter * laps / speed
    n = max(2, int(round(duration * rate_hz)))
    t = np.arange(n) / rate_hz
    s = (speed * t) % perimeter

    x = np.empty(n)
    y = np.empty(n)
    heading = np.empty(n)
    yaw_rate = np.zeros(n)
    # piecewise: bottom, corner BR, right, corner TR, top, corner TL, left, corner BL
    seg_lens = [straight_x, math.pi * r / 2, straight_y, math.pi * r / 2,
                straight_x, math.pi * r / 2, straight_y, math.pi * r / 2]
    bounds = np.concatenate([[0.0], np.cumsum(seg_lens)])
    omega = speed / r
    for i in range(n):
        si = s[i]
        k = int(np.searchsorted(bounds, si, side="right") - 1)
        k = min(k, 7)
        u = si - bounds[k]
        if k == 0:      # bottom edge, heading +x
            x[i], y[i], heading[i] = -w2 + r + u, -h2, 0.0
        elif k == 1:    # bottom-right corner
            a = -math.pi / 2 + u / r
            x[i], y[i] = w2 - r + r * math.cos(a), -h2 + r + r * math.sin(a)
            heading[i], yaw_rate[i] = a + math.pi / 2, omega
        elif k == 2:    # right edge, heading +y
            x[i], y[i], heading[i] = w2, -h2 + r + u, math.pi / 2
        elif k == 3:    # top-right corner
            a = u / r
            x[i], y[i] = w2 - r + r * math.cos(a), h2 - r + r * math.sin(a)
            heading[i], yaw_rate[i] = a + math.pi / 2, omega
        elif k == 4:    # top edge, heading -x
            x[i], y[i], heading[i] = w2 - r - u, h2, math.pi
        elif k == 5:    # top-left corner
            a = math.pi / 2 + u / r
            x[i], y[i] = -w2 + r + r * math.cos(a), h2 - r + r * math.sin(a)
            heading[i], yaw_rate[i] = a + math.pi / 2, omega
        elif k == 6:    # left edge, heading -y
            x[i], y[i], heading[i] = -w2, h2 - r - u, -math.pi / 2
        else:           # bottom-left corner
            a = math.pi + u / r
            x[i], y[i] = -w2 + r + r * math.cos(a), -h2 + r + r * math.sin(a)
            heading[i], yaw_rate[i] = a + math.pi / 2, omega
    return _trajectory_from_path(t, x, y, heading, np.full(n, speed), yaw_rate)


# ---------------------------------------------------------------------------
# world builders

def rectangle_room(width: float, height: float, center=(0.0, 0.0)) -> np.ndarray:
    """Wall segments of an axis-aligned rectangular room."""
    cx, cy = center
    w2, h2 = width / 2.0, height / 2.0
    return np.array([
        [cx - w2, cy - h2, cx + w2, cy - h2],
        [cx + w2, cy - h2, cx + w2, cy + h2],
        [cx + w2, cy + h2, cx - w2, cy + h2],
        [cx - w2, cy + h2, cx - w2, cy - h2],
    ])


def corridor(length: float, width: float, start=(0.0, 0.0),
             heading: float = 0.0) -> np.ndarray:
    """Two parallel walls forming an open-ended corridor."""
    c, s = math.cos(heading), math.sin(heading)
    nx, ny = -s, c
    x0, y0 = start
    half = width / 2.0
    return np.array([
        [x0 + nx * half, y0 + ny * half,
         x0 + c * length + nx * half, y0 + s * length + ny * half],
        [x0 - nx * half, y0 - ny * half,
         x0 + c * length - nx * half, y0 + s * length - ny * half],
    ])
