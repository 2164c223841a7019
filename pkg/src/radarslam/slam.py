"""Submap-based SLAM backend.

Scans are inserted into local log-odds occupancy submaps (two active at a
time, overlapping by half a submap so every scan lands in a maturing and
a fresh submap).  Each frame is refined against the most mature active
submap by an exhaustive correlative search, nodes and odometry /
submap-match edges accumulate in a pose graph, finished submaps are
candidates for loop closure with a widened search window, and a final
Levenberg-Marquardt pass produces globally consistent poses and maps.

Submap grids are world-axis-aligned at creation and rigidly attached to
their origin node, so optimized node poses re-anchor them during global
map rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .geometry import Pose2, between, compose, invert
from .mapping import Scan
from .posegraph import (KIND_LOOP_CLOSURE, KIND_ODOMETRY, KIND_SUBMAP_MATCH,
                        PoseGraph, apply_poses, optimize)

DEFAULT_RESOLUTION = 0.05


@dataclass(frozen=True)
class SubmapParams:
    resolution_m: float = DEFAULT_RESOLUTION
    l_hit: float = 0.9
    l_miss: float = -0.4
    l_min: float = -4.0
    l_max: float = 4.0
    max_scans: int = 40
    half_extent_m: float = 6.5


@dataclass(frozen=True)
class MatchWindow:
    """Correlative search extents around the prior."""

    xy_extent_m: float = 0.15
    yaw_extent_rad: float = math.radians(3.0)
    yaw_step_rad: float = math.radians(0.5)


LOOP_WINDOW = MatchWindow(xy_extent_m=1.0,
                          yaw_extent_rad=math.radians(15.0),
                          yaw_step_rad=math.radians(0.5))


class SubmapFinishedError(RuntimeError):
    """Insertion attempted into a finished (immutable) submap."""


class Submap:
    """Local log-odds occupancy grid anchored at an origin node pose.

    The grid is world-axis-aligned and centered on the origin position;
    cell (row, col) maps to world (x, y) via the resolution and center.
    """

    def __init__(self, origin: Pose2, origin_node_id: int,
                 params: SubmapParams = SubmapParams()):
        self.origin = origin
        self.origin_node_id = origin_node_id
        self.params = params
        n = 2 * int(round(params.half_extent_m / params.resolution_m)) + 1
        self.grid = np.zeros((n, n), dtype=np.float32)
        self.num_scans = 0
        self.finished = False
        self._prob_cache = None

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    def cells_of(self, world_xy: np.ndarray):
        """Float (col, row) cell coordinates of world points."""
        pts = np.asarray(world_xy, dtype=float).reshape(-1, 2)
        center = (self.size - 1) / 2.0
        fx = (pts[:, 0] - self.origin.x) / self.params.resolution_m + center
        fy = (pts[:, 1] - self.origin.y) / self.params.resolution_m + center
        return fx, fy

    def probabilities(self) -> np.ndarray:
        """Occupancy probabilities; cached between insertions."""
        if self._prob_cache is None:
            self._prob_cache = 1.0 / (1.0 + np.exp(-self.grid))
        return self._prob_cache

    def invalidate(self) -> None:
        self._prob_cache = None


def insert_scan(submap: Submap, scan: Scan, pose: Pose2) -> Submap:
    """Ray-trace one scan into the submap at the given world pose.

    Cells along each ray receive the miss update and the endpoint the hit
    update, clamped; the submap is finished after ``max_scans``
    insertions.
    """
    if submap.finished:
        raise SubmapFinishedError("cannot insert into a finished submap")
    p = submap.params
    fx0, fy0 = submap.cells_of([[pose.x, pose.y]])
    if len(scan):
        world = pose.transform(scan.to_xy())
        fx, fy = submap.cells_of(world)
        kernels.raytrace_update(submap.grid, float(fx0[0]), float(fy0[0]),
                                fx, fy, p.l_miss, p.l_hit, p.l_min, p.l_max)
    submap.num_scans += 1
    if submap.num_scans >= p.max_scans:
        submap.finished = True
    submap.invalidate()
    return submap


def _candidate_offsets(window: MatchWindow, resolution: float):
    """Integer cell offsets and yaw offsets, nearest-to-prior first.

    Ordering makes ties resolve toward the prior (exact ties pick the
    smallest perturbation, so an uninformative submap returns the prior).
    """
    k = int(round(window.xy_extent_m / resolution))
    steps = sorted(range(-k, k + 1), key=lambda v: (abs(v), v < 0))
    ox, oy = [], []
    for dx in steps:
        for dy in steps:
            ox.append(dx)
            oy.append(dy)
    order = np.argsort([abs(a) + abs(b) for a, b in zip(ox, oy)], kind="stable")
    ox = np.array(ox, dtype=np.int64)[order]
    oy = np.array(oy, dtype=np.int64)[order]
    n_yaw = int(round(window.yaw_extent_rad / window.yaw_step_rad))
    yaws = sorted((i * window.yaw_step_rad for i in range(-n_yaw, n_yaw + 1)),
                  key=lambda v: (abs(v), v < 0))
    return yaws, ox, oy


def match_scan(scan: Scan, submap: Submap, prior: Pose2,
               window: MatchWindow = MatchWindow()):
    """Exhaustive correlative refinement of ``prior`` against a submap.

    Scores every pose in the window by the mean occupancy probability at
    the transformed scan points (unknown and out-of-map cells count 0.5)
    and returns (best pose, best score).  An empty scan returns the prior
    with score 0.
    """
    if submap.num_scans < 1:
        raise ValueError("match_scan requires a submap with at least one scan")
    if len(scan) == 0:
        return prior, 0.0
    prob = submap.probabilities().astype(np.float32, copy=False)
    pts = scan.to_xy()
    res = submap.params.resolution_m
    yaws, ox, oy = _candidate_offsets(window, res)

    best_score = -1.0
    best_pose = prior
    for dyaw in yaws:
        cand = Pose2(prior.x, prior.y, prior.yaw + dyaw)
        world = cand.transform(pts)
        fx, fy = submap.cells_of(world)
        scores = kernels.score_offsets(prob, fx, fy, ox, oy)
        j = int(np.argmax(scores))
        if scores[j] > best_score + 1e-12:
            best_score = float(scores[j])
            best_pose = Pose2(prior.x + ox[j] * res, prior.y + oy[j] * res,
                              prior.yaw + dyaw)
    return best_pose, best_score


@dataclass
class LoopClosure:
    """Accepted loop-closure match against a finished submap."""

    submap: Submap
    matched_pose: Pose2
    score: float


def detect_loop(scan: Scan, node_pose: Pose2, finished_submaps,
                min_score: float = 0.55, search_radius_m: float = 5.0,
                skip_recent: int = 2,
                window: MatchWindow = LOOP_WINDOW):
    """Loop-closure candidates for one scan.

    Finished submaps within ``search_radius_m`` of the node (excluding
    the ``skip_recent`` most recently finished) are matched with the
    widened window; matches scoring at least ``min_score`` are returned.
    """
    closures = []
    eligible = list(finished_submaps)[:-skip_recent] if skip_recent else list(finished_submaps)
    for submap in eligible:
        dist = math.hypot(submap.origin.x - node_pose.x,
                          submap.origin.y - node_pose.y)
        if dist > search_radius_m:
            continue
        pose, score = match_scan(scan, submap, node_pose, window)
        if score >= min_score:
            closures.append(LoopClosure(submap, pose, score))
    return closures


def render_global_map(submaps, node_poses: dict,
                      resolution: float = DEFAULT_RESOLUTION):
    """Max-log-odds composite of submaps re-anchored at optimized poses.

    Returns (log-odds grid, world (x, y) of cell (0, 0), resolution).
    Row index increases with world y, column index with world x.
    """
    submaps = [s for s in submaps if s.num_scans > 0]
    if not submaps:
        return np.zeros((1, 1), dtype=np.float32), (0.0, 0.0), resolution

    placed = []  # (world points (N,2), values (N,))
    for s in submaps:
        rows, cols = np.nonzero(s.grid)
        if len(rows) == 0:
            continue
        center = (s.size - 1) / 2.0
        wx = s.origin.x + (cols - center) * s.params.resolution_m
        wy = s.origin.y + (rows - center) * s.params.resolution_m
        pts = np.column_stack([wx, wy])
        correction = node_poses.get(s.origin_node_id)
        if correction is not None:
            delta = compose(correction, invert(s.origin))
            pts = delta.transform(pts)
        placed.append((pts, s.grid[rows, cols]))

    if not placed:
        return np.zeros((1, 1), dtype=np.float32), (0.0, 0.0), resolution
    all_pts = np.vstack([p for p, _ in placed])
    xmin, ymin = all_pts.min(axis=0) - 2 * resolution
    xmax, ymax = all_pts.max(axis=0) + 2 * resolution
    n_cols = int(math.ceil((xmax - xmin) / resolution)) + 1
    n_rows = int(math.ceil((ymax - ymin) / resolution)) + 1
    grid = np.zeros((n_rows, n_cols), dtype=np.float32)
    for pts, vals in placed:
        cols = np.floor((pts[:, 0] - xmin) / resolution + 0.5).astype(int)
        rows = np.floor((pts[:, 1] - ymin) / resolution + 0.5).astype(int)
        ok = (cols >= 0) & (cols < n_cols) & (rows >= 0) & (rows < n_rows)
        np.maximum.at(grid, (rows[ok], cols[ok]), vals[ok].astype(np.float32))
    return grid, (float(xmin), float(ymin)), resolution


@dataclass(frozen=True)
class BackendParams:
    submap: SubmapParams = field(default_factory=SubmapParams)
    match_window: MatchWindow = field(default_factory=MatchWindow)
    loop_window: MatchWindow = field(default_factory=lambda: LOOP_WINDOW)
    loop_min_score: float = 0.55
    loop_search_radius_m: float = 5.0
    loop_skip_recent: int = 2
    loop_stride: int = 3
    min_odom_sigma_xy: float = 2e-3
    min_odom_sigma_yaw: float = math.radians(0.05)
    match_sigma_xy: float = 0.03
    match_sigma_yaw: float = math.radians(0.4)


def _diag_information(sigma_x: float, sigma_y: float, sigma_yaw: float):
    return np.diag([1.0 / sigma_x**2, 1.0 / sigma_y**2, 1.0 / sigma_yaw**2])


class SlamBackend:
    """Single-writer backend folding scans and odometry into a pose graph."""

    def __init__(self, params: BackendParams = BackendParams()):
        self.params = params
        self.graph = PoseGraph()
        self.active: list[Submap] = []
        self.finished: list[Submap] = []
        self._next_node = 0
        self._last_odom: Pose2 | None = None
        self._last_est: Pose2 | None = None
        self._frame_count = 0
        self.num_loop_closures = 0

    def _spawn_submap(self, origin: Pose2, node_id: int) -> Submap:
        sm = Submap(origin, node_id, self.params.submap)
        self.active.append(sm)
        return sm

    def _rotate_submaps(self, est_pose: Pose2, node_id: int) -> None:
        p = self.params.submap
        if not self.active:
            self._spawn_submap(est_pose, node_id)
        finished_now = [s for s in self.active if s.finished]
        self.active = [s for s in self.active if not s.finished]
        self.finished.extend(finished_now)
        if not self.active:
            self._spawn_submap(est_pose, node_id)
        elif (len(self.active) == 1
              and self.active[0].num_scans >= p.max_scans // 2):
            self._spawn_submap(est_pose, node_id)

    def add_scan(self, scan: Scan, odom_pose: Pose2,
                 odom_sigma_xy: float = 0.01,
                 odom_sigma_yaw: float = math.radians(0.2)) -> Pose2:
        """Process one frame; returns the refined pose estimate.

        ``odom_pose`` is the odometry-integrated world pose; the
        inter-frame odometry delta becomes an odometry edge and the
        correlative match against the most mature active submap becomes a
        submap-match edge.
        """
        p = self.params
        node_id = self._next_node
        self._next_node += 1

        if self._last_odom is None:
            est = odom_pose
            self.graph.add_node(node_id, scan.timestamp, est)
        else:
            delta = between(self._last_odom, odom_pose)
            prior = compose(self._last_est, delta)
            anchor = max(self.active, key=lambda s: s.num_scans)
            est, score = match_scan(scan, anchor, prior, p.match_window)
            self.graph.add_node(node_id, scan.timestamp, est)
            sxy = max(odom_sigma_xy, p.min_odom_sigma_xy)
            syaw = max(odom_sigma_yaw, p.min_odom_sigma_yaw)
            self.graph.add_edge(node_id - 1, node_id, delta,
                                _diag_information(sxy, sxy, syaw),
                                KIND_ODOMETRY)
            if score > 0.0:
                rel = between(anchor.origin, est)
                info_scale = max(score, 0.1)
                self.graph.add_edge(
                    anchor.origin_node_id, node_id, rel,
                    _diag_information(p.match_sigma_xy / info_scale,
                                      p.match_sigma_xy / info_scale,
                                      p.match_sigma_yaw / info_scale),
                    KIND_SUBMAP_MATCH)

        self._rotate_submaps(est, node_id)
        for sm in self.active:
            insert_scan(sm, scan, est)

        if (self.finished and self._frame_count % p.loop_stride == 0):
            closures = detect_loop(scan, est, self.finished,
                                   p.loop_min_score, p.loop_search_radius_m,
                                   p.loop_skip_recent, p.loop_window)
            for c in closures:
                rel = between(c.submap.origin, c.matched_pose)
                sigma = self.params.submap.resolution_m / max(c.score, 0.5)
                self.graph.add_edge(
                    c.submap.origin_node_id, node_id, rel,
                    _diag_information(sigma, sigma, math.radians(0.5) / c.score),
                    KIND_LOOP_CLOSURE)
                self.num_loop_closures += 1

        self._last_odom = odom_pose
        self._last_est = est
        self._frame_count += 1
        return est

    def finalize(self, run_optimization: bool = True) -> dict:
        """Finish active submaps and optionally optimize the graph."""
        for sm in self.active:
            sm.finished = True
        self.finished.extend(self.active)
        self.active = []
        if run_optimization and self.graph.edges:
            poses = optimize(self.graph)
            apply_poses(self.graph, poses)
        return self.graph.poses()

    def render_map(self, resolution: float | None = None):
        res = resolution if resolution is not None else self.params.submap.resolution_m
        return render_global_map(self.finished + self.active,
                                 self.graph.poses(), res)
