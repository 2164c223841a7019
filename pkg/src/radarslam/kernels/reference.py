"""Pure numpy implementations of the scan-matching and map-update kernels.

These define the reference semantics; the compiled ``_native`` module
must reproduce them exactly.  Rounding is half-up (``floor(v + 0.5)``)
so both implementations agree on cells exactly halfway between centers.
"""

from __future__ import annotations

import numpy as np


def _round_half_up(v: np.ndarray) -> np.ndarray:
    return np.floor(v + 0.5).astype(np.int64)


def score_offsets(prob: np.ndarray, fx: np.ndarray, fy: np.ndarray,
                  offsets_x: np.ndarray, offsets_y: np.ndarray,
                  unknown: float = 0.5) -> np.ndarray:
    """Mean occupancy probability of translated scan points.

    ``prob`` is the occupancy grid [rows, cols]; ``fx``/``fy`` are float
    cell coordinates (col, row) of the scan points; offset ``j`` scores
    the points shifted by integer cells (offsets_x[j], offsets_y[j]).
    Points falling outside the grid contribute ``unknown``.
    """
    h, w = prob.shape
    if len(fx) == 0:
        return np.full(len(offsets_x), unknown, dtype=np.float64)
    ix = _round_half_up(fx)[None, :] + np.asarray(offsets_x, dtype=np.int64)[:, None]
    iy = _round_half_up(fy)[None, :] + np.asarray(offsets_y, dtype=np.int64)[:, None]
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    vals = np.where(
        inside,
        prob[np.clip(iy, 0, h - 1), np.clip(ix, 0, w - 1)].astype(np.float64),
        unknown,
    )
    return vals.mean(axis=1)


def _ray_cells(x0: float, y0: float, x1: float, y1: float):
    """Cells traversed from (x0, y0) toward (x1, y1), endpoint excluded.

    Stepping is uniform with one step per Chebyshev cell distance, with
    consecutive duplicate cells removed.
    """
    ex = int(np.floor(x1 + 0.5))
    ey = int(np.floor(y1 + 0.5))
    n = int(np.ceil(max(abs(x1 - x0), abs(y1 - y0))))
    if n <= 0:
        return np.empty(0, np.int64), np.empty(0, np.int64), ex, ey
    k = np.arange(n, dtype=np.float64) / n
    cx = _round_half_up(x0 + (x1 - x0) * k)
    cy = _round_half_up(y0 + (y1 - y0) * k)
    keep = np.ones(n, dtype=bool)
    keep[1:] = (cx[1:] != cx[:-1]) | (cy[1:] != cy[:-1])
    keep &= ~((cx == ex) & (cy == ey))
    return cx[keep], cy[keep], ex, ey


def raytrace_update(logodds: np.ndarray, x0: float, y0: float,
                    end_x: np.ndarray, end_y: np.ndarray,
                    l_miss: float, l_hit: float,
                    l_min: float, l_max: float) -> None:
    """Apply one scan's rays to a log-odds grid, in place.

    For each ray from the sensor cell (x0, y0) to an endpoint, every
    traversed cell receives ``l_miss`` and the endpoint cell ``l_hit``,
    each clamped to [l_min, l_max].  Rays are applied sequentially in
    input order; out-of-grid cells are skipped.
    """
    h, w = logodds.shape
    for x1, y1 in zip(np.asarray(end_x, float), np.asarray(end_y, float)):
        cx, cy, ex, ey = _ray_cells(x0, y0, x1, y1)
        inside = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        cx, cy = cx[inside], cy[inside]
        if cx.size:
            logodds[cy, cx] = np.clip(logodds[cy, cx] + l_miss, l_min, l_max)
        if 0 <= ex < w and 0 <= ey < h:
            logodds[ey, ex] = min(max(logodds[ey, ex] + l_hit, l_min), l_max)
