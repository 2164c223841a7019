"""SE(2) pose graph with Levenberg-Marquardt optimization.

Nodes are timestamped poses; edges are relative-pose measurements with
3x3 information matrices of kind odometry, submap-match, or
loop-closure.  The optimizer holds a root node fixed, builds sparse
normal equations from analytic Jacobians (batched over edges), and
accepts only steps that decrease the total weighted cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Pose2, wrap_angle, wrap_angles

KIND_ODOMETRY = "odometry"
KIND_SUBMAP_MATCH = "submap-match"
KIND_LOOP_CLOSURE = "loop-closure"
EDGE_KINDS = (KIND_ODOMETRY, KIND_SUBMAP_MATCH, KIND_LOOP_CLOSURE)


class GraphError(ValueError):
    """Invalid pose-graph construction (bad edge, unknown node, ...)."""


@dataclass
class PoseNode:
    node_id: int
    timestamp: float
    pose: Pose2


@dataclass
class PoseEdge:
    from_id: int
    to_id: int
    relative: Pose2
    information: np.ndarray
    kind: str = KIND_ODOMETRY


@dataclass
class PoseGraph:
    nodes: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)

    def add_node(self, node_id: int, timestamp: float, pose: Pose2) -> PoseNode:
        if node_id in self.nodes:
            raise GraphError(f"duplicate node id {node_id}")
        node = PoseNode(node_id, timestamp, pose)
        self.nodes[node_id] = node
        return node

    def add_edge(self, from_id: int, to_id: int, relative: Pose2,
                 information: np.ndarray, kind: str = KIND_ODOMETRY) -> PoseEdge:
        if from_id not in self.nodes or to_id not in self.nodes:
            raise GraphError(f"edge references unknown node ({from_id}, {to_id})")
        if kind not in EDGE_KINDS:
            raise GraphError(f"unknown edge kind '{kind}'")
        info = np.asarray(information, dtype=float)
        if info.shape != (3, 3):
            raise GraphError("information matrix must be 3x3")
        if not np.allclose(info, info.T, atol=1e-9):
            raise GraphError("information matrix must be symmetric")
        try:
            np.linalg.cholesky(info)
        except np.linalg.LinAlgError:
            raise GraphError("information matrix must be positive-definite")
        edge = PoseEdge(from_id, to_id, Pose2(relative.x, relative.y, relative.yaw),
                        info, kind)
        self.edges.append(edge)
        return edge

    def poses(self) -> dict:
        return {nid: n.pose for nid, n in self.nodes.items()}


class _BatchedProblem:
    """Edge arrays and index bookkeeping reused across LM iterations."""

    def __init__(self, graph: PoseGraph, ids):
        index = {nid: k for k, nid in enumerate(ids)}
        self.ei = np.array([index[e.from_id] for e in graph.edges])
        self.ej = np.array([index[e.to_id] for e in graph.edges])
        self.z = np.array([[e.relative.x, e.relative.y, e.relative.yaw]
                           for e in graph.edges])
        self.omega = np.array([e.information for e in graph.edges])
        self.index = index

        # COO index pattern for the four 3x3 blocks of each edge
        p = np.arange(3)
        rows, cols = [], []
        for ka in (self.ei, self.ej):
            for kb in (self.ei, self.ej):
                rows.append((3 * ka)[:, None, None] + p[None, :, None]
                            + np.zeros((1, 1, 3), dtype=int))
                cols.append((3 * kb)[:, None, None] + np.zeros((1, 3, 1), dtype=int)
                            + p[None, None, :])
        self.coo_rows = np.concatenate([r.ravel() for r in rows])
        self.coo_cols = np.concatenate([c.ravel() for c in cols])

    def residuals(self, states: np.ndarray) -> np.ndarray:
        xi = states[self.ei]
        xj = states[self.ej]
        ci, si = np.cos(xi[:, 2]), np.sin(xi[:, 2])
        dx, dy = xj[:, 0] - xi[:, 0], xj[:, 1] - xi[:, 1]
        rel0 = ci * dx + si * dy
        rel1 = -si * dx + ci * dy
        rel2 = xj[:, 2] - xi[:, 2]
        cz, sz = np.cos(self.z[:, 2]), np.sin(self.z[:, 2])
        ex = cz * (rel0 - self.z[:, 0]) + sz * (rel1 - self.z[:, 1])
        ey = -sz * (rel0 - self.z[:, 0]) + cz * (rel1 - self.z[:, 1])
        return np.column_stack([ex, ey, wrap_angles(rel2 - self.z[:, 2])])

    def cost(self, states: np.ndarray) -> float:
        r = self.residuals(states)
        return float(np.einsum("ei,eij,ej->", r, self.omega, r))

    def normal_equations(self, states: np.ndarray):
        n_edges = len(self.ei)
        xi = states[self.ei]
        xj = states[self.ej]
        ci, si = np.cos(xi[:, 2]), np.sin(xi[:, 2])
        cz, sz = np.cos(self.z[:, 2]), np.sin(self.z[:, 2])
        rz_t = np.empty((n_edges, 2, 2))
        rz_t[:, 0, 0], rz_t[:, 0, 1] = cz, sz
        rz_t[:, 1, 0], rz_t[:, 1, 1] = -sz, cz
        ri_t = np.empty((n_edges, 2, 2))
        ri_t[:, 0, 0], ri_t[:, 0, 1] = ci, si
        ri_t[:, 1, 0], ri_t[:, 1, 1] = -si, ci
        dri_t = np.empty((n_edges, 2, 2))
        dri_t[:, 0, 0], dri_t[:, 0, 1] = -si, ci
        dri_t[:, 1, 0], dri_t[:, 1, 1] = -ci, -si
        dt = xj[:, :2] - xi[:, :2]

        ja = np.zeros((n_edges, 3, 3))
        jb = np.zeros((n_edges, 3, 3))
        rz_ri = rz_t @ ri_t
        ja[:, :2, :2] = -rz_ri
        ja[:, :2, 2] = (rz_t @ (dri_t @ dt[:, :, None]))[:, :, 0]
        ja[:, 2, 2] = -1.0
        jb[:, :2, :2] = rz_ri
        jb[:, 2, 2] = 1.0

        r = self.residuals(states)
        omega = self.omega
        ja_t_om = np.transpose(ja, (0, 2, 1)) @ omega
        jb_t_om = np.transpose(jb, (0, 2, 1)) @ omega

        blocks = np.concatenate([
            (ja_t_om @ ja).ravel(),
            (ja_t_om @ jb).ravel(),
            (jb_t_om @ ja).ravel(),
            (jb_t_om @ jb).ravel(),
        ])
        n_states = states.shape[0] * 3
        h = sp.coo_matrix((blocks, (self.coo_rows, self.coo_cols)),
                          shape=(n_states, n_states)).tocsr()

        b = np.zeros(n_states)
        bi = (ja_t_om @ r[:, :, None])[:, :, 0]
        bj = (jb_t_om @ r[:, :, None])[:, :, 0]
        np.add.at(b, (3 * self.ei)[:, None] + np.arange(3), bi)
        np.add.at(b, (3 * self.ej)[:, None] + np.arange(3), bj)
        return h, b


def optimize(graph: PoseGraph, root_id: int | None = None,
             max_iterations: int = 50, rel_tolerance: float = 1e-6) -> dict:
    """Levenberg-Marquardt over all node poses; returns {node_id: Pose2}.

    The root node (lowest id by default) stays fixed.  Iteration stops
    when the relative cost decrease of an accepted step falls below
    ``rel_tolerance`` or after ``max_iterations``.
    """
    if not graph.nodes:
        return {}
    ids = sorted(graph.nodes)
    if root_id is None:
        root_id = ids[0]
    if root_id not in graph.nodes:
        raise GraphError(f"root node {root_id} not in graph")
    states = np.array([graph.nodes[nid].pose.as_array() for nid in ids])
    if not graph.edges:
        return {nid: graph.nodes[nid].pose for nid in ids}

    problem = _BatchedProblem(graph, ids)
    n = len(ids)
    free = np.ones(3 * n, dtype=bool)
    root_k = problem.index[root_id]
    free[3 * root_k: 3 * root_k + 3] = False

    cost = problem.cost(states)
    lam = 1e-4
    for _ in range(max_iterations):
        if cost <= 1e-18:
            break
        h, b = problem.normal_equations(states)
        h_ff = h[free][:, free]
        b_f = b[free]

        accepted = False
        trial_cost = cost
        for _ in range(8):
            damped = h_ff + lam * sp.diags(h_ff.diagonal() + 1e-12)
            delta_f = spla.spsolve(damped.tocsc(), -b_f)
            if np.all(np.isfinite(delta_f)):
                trial = states.copy()
                flat = trial.reshape(-1)
                flat[free] += delta_f
                trial[:, 2] = wrap_angles(trial[:, 2])
                trial_cost = problem.cost(trial)
                if trial_cost < cost:
                    states = trial
                    lam = max(lam * 0.1, 1e-9)
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            break
        improvement = (cost - trial_cost) / max(cost, 1e-30)
        cost = trial_cost
        if improvement < rel_tolerance:
            break

    return {nid: Pose2(*states[problem.index[nid]]) for nid in ids}


def apply_poses(graph: PoseGraph, poses: dict) -> None:
    """Write optimized poses back into the graph nodes."""
    for nid, pose in poses.items():
        graph.nodes[nid].pose = pose


def export_edge_list(graph: PoseGraph, path) -> None:
    """Plain-text dump of nodes and edges for debugging."""
    lines = []
    for nid in sorted(graph.nodes):
        node = graph.nodes[nid]
        p = node.pose
        lines.append(f"NODE {nid} {node.timestamp!r} {p.x!r} {p.y!r} {p.yaw!r}")
    for e in graph.edges:
        r = e.relative
        info = " ".join(repr(v) for v in np.asarray(e.information).ravel())
        lines.append(f"EDGE {e.kind} {e.from_id} {e.to_id} "
                     f"{r.x!r} {r.y!r} {r.yaw!r} {info}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
