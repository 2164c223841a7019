"""Trajectory metrics: absolute trajectory error and relative error.

ATE rigidly aligns the estimate to the reference (closed-form SE(2), no
scale) before computing position and yaw RMSE, so it is invariant to the
estimate's global frame.  RE compares relative transforms between pose
pairs a fixed reference path length apart, so it is invariant to rigid
transforms of either trajectory and captures local drift.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Pose2, between, wrap_angles

TRAJECTORY_HEADER = ["t", "x", "y", "yaw"]


class EvaluationError(ValueError):
    """Unusable trajectory pairing or malformed trajectory file."""


@dataclass
class TrajectoryFile:
    """Timestamped planar trajectory with strictly increasing time."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.yaw = np.asarray(self.yaw, dtype=float)
        n = len(self.t)
        if any(len(a) != n for a in (self.x, self.y, self.yaw)):
            raise EvaluationError("trajectory columns must have equal length")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise EvaluationError("timestamps must strictly increase")

    def __len__(self) -> int:
        return len(self.t)

    def pose(self, i: int) -> Pose2:
        return Pose2(float(self.x[i]), float(self.y[i]), float(self.yaw[i]))

    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def path_length(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.hypot(np.diff(self.x), np.diff(self.y)).sum())


def write_trajectory_csv(traj: TrajectoryFile, path) -> None:
    """Write ``t,x,y,yaw`` CSV; floats use repr so parsing round-trips
    bit-exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for i in range(len(traj)):
            writer.writerow([repr(float(v))
                             for v in (traj.t[i], traj.x[i], traj.y[i], traj.yaw[i])])


def read_trajectory_csv(path) -> TrajectoryFile:
    path = Path(path)
    if not path.exists():
        raise EvaluationError(f"trajectory file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EvaluationError(f"{path}: empty trajectory file")
        if [h.strip() for h in header] != TRAJECTORY_HEADER:
            raise EvaluationError(
                f"{path}: expected header {','.join(TRAJECTORY_HEADER)}, "
                f"got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise EvaluationError(f"{path}:{lineno}: expected 4 columns")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise EvaluationError(f"{path}:{lineno}: {exc}")
    if not rows:
        raise EvaluationError(f"{path}: no trajectory rows")
    arr = np.array(rows)
    return TrajectoryFile(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def associate(est: TrajectoryFile, ref: TrajectoryFile,
              max_dt: float = 0.02):
    """Nearest-timestamp pairing with unique matches.

    Returns (est indices, ref indices); pairs farther apart than
    ``max_dt`` are dropped.  Raises when nothing pairs.
    """
    if max_dt <= 0:
        raise EvaluationError("max_dt must be positive")
    if len(est) == 0 or len(ref) == 0:
        raise EvaluationError("cannot associate empty trajectories")
    candidates = []
    ins = np.searchsorted(ref.t, est.t)
    for i in range(len(est)):
        for j in (ins[i] - 1, ins[i]):
            if 0 <= j < len(ref):
                dt = abs(est.t[i] - ref.t[j])
                if dt <= max_dt:
                    candidates.append((dt, i, int(j)))
    candidates.sort()
    used_i, used_j = set(), set()
    pairs = []
    for dt, i, j in candidates:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        pairs.append((i, j))
    if not pairs:
        raise EvaluationError("no timestamp pairs within max_dt")
    pairs.sort()
    idx = np.array(pairs)
    return idx[:, 0], idx[:, 1]


def _align_se2(est_xy: np.ndarray, ref_xy: np.ndarray):
    """Closed-form rotation + translation minimizing position RMSE.

    Falls back to translation-only when the point sets are degenerate
    (all coincident)."""
    ec = est_xy.mean(axis=0)
    rc = ref_xy.mean(axis=0)
    e = est_xy - ec
    r = ref_xy - rc
    dot = float((e * r).sum())
    cross = float((e[:, 0] * r[:, 1] - e[:, 1] * r[:, 0]).sum())
    if math.hypot(dot, cross) < 1e-15:
        theta = 0.0
    else:
        theta = math.atan2(cross, dot)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    t = rc - rot @ ec
    return theta, rot, t


@dataclass
class AteResult:
    pos_rmse_m: float
    rot_rmse_rad: float
    num_pairs: int


def ate(est: TrajectoryFile, ref: TrajectoryFile,
        max_dt: float = 0.02) -> AteResult:
    """Absolute trajectory error after closed-form SE(2) alignment."""
    ie, ir = associate(est, ref, max_dt)
    if len(ie) < 2:
        raise EvaluationError("ATE requires at least 2 associated pairs")
    est_xy = est.positions()[ie]
    ref_xy = ref.positions()[ir]
    theta, rot, t = _align_se2(est_xy, ref_xy)
    aligned = est_xy @ rot.T + t
    pos_rmse = float(np.sqrt(np.mean(np.sum((aligned - ref_xy) ** 2, axis=1))))
    yaw_err = wrap_angles(est.yaw[ie] + theta - ref.yaw[ir])
    rot_rmse = float(np.sqrt(np.mean(yaw_err**2)))
    return AteResult(pos_rmse, rot_rmse, len(ie))


@dataclass
class RelativeErrorResult:
    pos_rms_m: float
    rot_rms_rad: float
    num_pairs: int
    delta_m: float


def relative_error(est: TrajectoryFile, ref: TrajectoryFile,
                   delta_m: float = 1.0,
                   max_dt: float = 0.02) -> RelativeErrorResult:
    """Relative error over sub-trajectories of ``delta_m`` reference path
    length.

    For each associated pose pair (i, j) whose reference path length is
    the first to reach ``delta_m``, the residual is the SE(2) difference
    between estimated and reference relative transforms.
    """
    if delta_m <= 0:
        raise EvaluationError("delta_m must be positive")
    ie, ir = associate(est, ref, max_dt)
    ref_xy = ref.positions()[ir]
    seg = np.hypot(*np.diff(ref_xy, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] < delta_m:
        raise EvaluationError(
            f"reference path ({s[-1]:.3f} m) shorter than delta_m ({delta_m} m)")
    pos_sq, rot_sq = [], []
    j = 0
    for i in range(len(ie)):
        while j < len(ie) and s[j] - s[i] < delta_m:
            j += 1
        if j >= len(ie):
            break
        rel_est = between(est.pose(ie[i]), est.pose(ie[j]))
        rel_ref = between(ref.pose(ir[i]), ref.pose(ir[j]))
        err = between(rel_ref, rel_est)
        pos_sq.append(err.x**2 + err.y**2)
        rot_sq.append(err.yaw**2)
    if not pos_sq:
        raise EvaluationError("no pose pairs delta_m apart")
    return RelativeErrorResult(
        float(np.sqrt(np.mean(pos_sq))),
        float(np.sqrt(np.mean(rot_sq))),
        len(pos_sq), delta_m)


def metrics_report(est: TrajectoryFile, ref: TrajectoryFile,
                   delta_m: float = 1.0, max_dt: float = 0.02) -> dict:
    """Flat key-value metric summary used by the CLI."""
    a = ate(est, ref, max_dt)
    out = {
        "ate_pos_m": a.pos_rmse_m,
        "ate_rot_rad": a.rot_rmse_rad,
        "ate_pairs": a.num_pairs,
    }
    try:
        r = relative_error(est, ref, delta_m, max_dt)
        out.update({
            "re_pos_m": r.pos_rms_m,
            "re_rot_rad": r.rot_rms_rad,
            "re_pairs": r.num_pairs,
            "re_delta_m": r.delta_m,
        })
    except EvaluationError:
        pass  # trajectory shorter than delta_m: report ATE only
    return out
