"""Fine fabric mesh and its quasi-static deformation toward the guide targets.

The deformer minimizes

    E = k_m * dt**2 * E_arap + w_sew * dt**2 * E_sew + w_pos * E_pos

with a local-global scheme.  The local step fits one rotation per vertex
(uniform-weight ARAP over the one-ring) and one unit direction per sewn
pair; the global step solves a single prefactored sparse system.  Each step
is an exact block minimization, so ``E`` never increases.  There is no
collision handling: strongly gathered pleats may self-intersect.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NonFinite, SolverSingular
from .pattern import Side

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeformConfig:
    subdivision: int = 6
    w_sew: float = 0.1
    w_pos: float = 0.01
    dt: float = 0.04
    iterations: int = 300
    convergence_tol: float = 1e-6
    # membrane stiffness k_m scaling the ARAP term
    arap_stiffness: float = 0.1
    # None: start midpoints at their constrained heights
    init_offset: float | None = None

    def __post_init__(self):
        if self.subdivision < 2 or self.subdivision % 2:
            raise ValueError("subdivision must be an even integer >= 2")
        if not self.arap_stiffness > 0:
            raise ValueError("arap_stiffness must be positive")
        if self.w_sew < 0 or self.w_pos < 0:
            raise ValueError("weights must be non-negative")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @property
    def arap_weight(self):
        """Uniform per-edge ARAP weight; elastic potentials carry dt**2."""
        return self.arap_stiffness * self.dt ** 2

    @property
    def sew_weight(self):
        """Effective sewing weight with the squared timestep folded in."""
        return self.w_sew * self.dt ** 2


@dataclass(frozen=True, eq=False)
class FineMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    rest_positions: np.ndarray
    anchor_map: dict
    anchor_snap: dict
    shape: tuple
    spacing: float
    dropped_anchors: tuple = ()

    @property
    def n_vertices(self):
        return len(self.vertices)

    def edges(self):
        """Unique undirected edges, sorted."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)


@dataclass(frozen=True)
class EnergyBreakdown:
    iteration: int
    e_arap: float
    e_sew: float
    e_pos: float
    e_total: float


def make_fine_mesh(p, sys, cfg=None):
    """Regular ``s``-times subdivided triangulation of the pattern grid.

    Stitch endpoints land exactly on fine vertices.  Midpoints do too for
    even ``s``; otherwise they snap to the nearest fine vertex and the snap
    distance is recorded.  A midpoint whose fine vertex is already claimed
    by another anchor is dropped (listed in ``dropped_anchors``).
    """
    cfg = cfg or DeformConfig()
    if (p.rows, p.cols) != (sys.rows, sys.cols):
        raise ValueError("pattern and spring system disagree on the grid size")
    s = cfg.subdivision
    R, C = s * (p.rows - 1) + 1, s * (p.cols - 1) + 1
    h = p.unit / s
    r, c = np.divmod(np.arange(R * C), C)
    rest = np.column_stack([c * h, r * h, np.zeros(R * C)])
    idx = np.arange(R * C).reshape(R, C)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    d, e = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    tris = np.concatenate([np.column_stack([a, b, e]), np.column_stack([a, e, d])])

    anchors, snaps, claimed, dropped = {}, {}, set(), []
    for v in sys.stitching_vertices:
        vr, vc = divmod(int(v), p.cols)
        f = int(idx[vr * s, vc * s])
        anchors[f"v{int(v)}"] = f
        snaps[f"v{int(v)}"] = 0.0
        claimed.add(f)
    for m in sys.midpoints():
        i, j = sys.stitch_springs[m.spring]
        (ri, ci), (rj, cj) = divmod(int(i), p.cols), divmod(int(j), p.cols)
        fr, fc = (ri + rj) * s / 2, (ci + cj) * s / 2
        nr, nc = int(np.floor(fr + 0.5)), int(np.floor(fc + 0.5))
        f = int(idx[nr, nc])
        key = f"m{m.spring}"
        if f in claimed:
            log.warning("midpoint of stitch %d collides with another anchor; dropped", m.spring)
            dropped.append(key)
            continue
        anchors[key] = f
        snaps[key] = float(np.hypot(nr - fr, nc - fc) * h)
        claimed.add(f)
    return FineMesh(rest.copy(), tris.astype(np.int64), rest, anchors, snaps, (R, C), h,
                    tuple(dropped))


def _sewing_arrays(constraints, anchor_map):
    keys = sorted(constraints.sewing_targets)
    a = np.array([anchor_map[f"v{constraints.sewing_pairs[k][0]}"] for k in keys], dtype=np.int64)
    b = np.array([anchor_map[f"v{constraints.sewing_pairs[k][1]}"] for k in keys], dtype=np.int64)
    t = np.array([constraints.sewing_targets[k] for k in keys], dtype=float)
    return a, b, t


def _position_arrays(constraints, anchor_map):
    idx, tgt = [], []
    for v in sorted(constraints.stitch_targets):
        idx.append(anchor_map[f"v{v}"])
        tgt.append(constraints.stitch_targets[v])
    for m in sorted(constraints.midpoint_targets):
        key = f"m{m}"
        if key in anchor_map:
            idx.append(anchor_map[key])
            tgt.append(constraints.midpoint_targets[m])
    return np.array(idx, dtype=np.int64), np.array(tgt, dtype=float).reshape(-1, 3)


def sewing_energy(X, constraints, anchor_map):
    """Sum of squared deviations of sewn pairs from their target lengths.

    The squared-timestep factor belongs to the caller's weight.
    """
    a, b, t = _sewing_arrays(constraints, anchor_map)
    if len(a) == 0:
        return 0.0
    L = np.linalg.norm(X[a] - X[b], axis=1)
    return float(((L - t) ** 2).sum())


def sewing_energy_grad(X, constraints, anchor_map):
    a, b, t = _sewing_arrays(constraints, anchor_map)
    G = np.zeros_like(X, dtype=float)
    if len(a) == 0:
        return G
    e = X[a] - X[b]
    L = np.linalg.norm(e, axis=1)
    g = (2 * (L - t) / np.where(L > 0, L, 1.0))[:, None] * e
    np.add.at(G, a, g)
    np.add.at(G, b, -g)
    return G


def positional_energy(X, constraints, anchor_map):
    idx, tgt = _position_arrays(constraints, anchor_map)
    if len(idx) == 0:
        return 0.0
    return float(((X[idx] - tgt) ** 2).sum())


def positional_energy_grad(X, constraints, anchor_map):
    idx, tgt = _position_arrays(constraints, anchor_map)
    G = np.zeros_like(X, dtype=float)
    np.add.at(G, idx, 2 * (X[idx] - tgt))
    return G


def _best_rotations(M):
    """Rotations maximizing ``tr(R^T M)`` for a stack of 3x3 matrices."""
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    flip = np.linalg.det(R) < 0
    if flip.any():
        U[flip, :, 2] *= -1
        R[flip] = U[flip] @ Vt[flip]
    return R


def _directed_edges(mesh):
    ed = mesh.edges()
    return np.concatenate([ed[:, 0], ed[:, 1]]), np.concatenate([ed[:, 1], ed[:, 0]])


def _fit_rotations(cur, rest, src, n):
    """Per-vertex rotation best mapping rest one-ring edges onto current ones."""
    flat = (cur[:, :, None] * rest[:, None, :]).reshape(-1, 9)
    M = np.zeros((n, 9))
    for k in range(9):
        M[:, k] = np.bincount(src, flat[:, k], n)
    return _best_rotations(M.reshape(n, 3, 3))


def arap_energy(mesh, X):
    """Unweighted uniform ARAP energy of ``X`` with optimal per-vertex rotations."""
    src, dst = _directed_edges(mesh)
    rest = mesh.rest_positions[src] - mesh.rest_positions[dst]
    cur = X[src] - X[dst]
    R = _fit_rotations(cur, rest, src, mesh.n_vertices)
    fit = np.einsum("kij,kj->ki", R[src], rest)
    return float(((cur - fit) ** 2).sum())


class _ArapSystem:
    def __init__(self, mesh, constraints, cfg):
        n = mesh.n_vertices
        self.src, self.dst = _directed_edges(mesh)
        self.rest_edges = mesh.rest_positions[self.src] - mesh.rest_positions[self.dst]
        self.n = n
        self.wa = cfg.arap_weight
        m = len(self.src)
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([self.src, self.dst]).ravel()
        vals = np.tile([1.0, -1.0], m)
        self.Dmat = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))

        self.sa, self.sb, self.st = _sewing_arrays(constraints, mesh.anchor_map)
        self.ws = cfg.sew_weight
        ns = len(self.sa)
        self.Smat = sp.csr_matrix(
            (np.tile([1.0, -1.0], ns),
             (np.repeat(np.arange(ns), 2), np.column_stack([self.sa, self.sb]).ravel())),
            shape=(ns, n))
        self.sew_rest_dir = self._unit(mesh.rest_positions[self.sa] - mesh.rest_positions[self.sb],
                                       fallback=np.array([1.0, 0.0, 0.0]))

        self.pidx, self.ptgt = _position_arrays(constraints, mesh.anchor_map)
        self.wp = cfg.w_pos
        if self.wp <= 0 or len(self.pidx) == 0:
            raise SolverSingular("global system is singular: no positional anchors hold the mesh")
        na = len(self.pidx)
        self.Pmat = sp.csr_matrix((np.ones(na), (np.arange(na), self.pidx)), shape=(na, n))

        A = (self.wa * (self.Dmat.T @ self.Dmat) + self.ws * (self.Smat.T @ self.Smat)
             + self.wp * (self.Pmat.T @ self.Pmat))
        try:
            self.lu = splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolverSingular(str(exc)) from exc
        self.const_rhs = self.wp * (self.Pmat.T @ self.ptgt)

    @staticmethod
    def _unit(e, fallback):
        L = np.linalg.norm(e, axis=1)
        out = np.tile(fallback, (len(e), 1)).astype(float)
        ok = L > 0
        out[ok] = e[ok] / L[ok, None]
        return out

    def local(self, X):
        R = _fit_rotations(X[self.src] - X[self.dst], self.rest_edges, self.src, self.n)
        U = self._unit(X[self.sa] - X[self.sb], fallback=np.array([1.0, 0.0, 0.0]))
        deg = np.linalg.norm(X[self.sa] - X[self.sb], axis=1) == 0
        U[deg] = self.sew_rest_dir[deg]
        return R, U

    def energies(self, X, R):
        cur = X[self.src] - X[self.dst]
        fit = np.einsum("kij,kj->ki", R[self.src], self.rest_edges)
        e_arap = self.wa * float(((cur - fit) ** 2).sum())
        if len(self.sa):
            L = np.linalg.norm(X[self.sa] - X[self.sb], axis=1)
            e_sew = float(((L - self.st) ** 2).sum())
        else:
            e_sew = 0.0
        e_pos = float(((X[self.pidx] - self.ptgt) ** 2).sum())
        return e_arap, e_sew, e_pos, e_arap + self.ws * e_sew + self.wp * e_pos

    def global_step(self, R, U):
        fit = np.einsum("kij,kj->ki", R[self.src], self.rest_edges)
        rhs = self.wa * (self.Dmat.T @ fit) + self.const_rhs
        if len(self.sa):
            rhs = rhs + self.ws * (self.Smat.T @ (self.st[:, None] * U))
        X = np.column_stack([self.lu.solve(np.ascontiguousarray(rhs[:, c])) for c in range(3)])
        if not np.isfinite(X).all():
            raise NonFinite("deformer produced non-finite positions")
        return X


def initial_positions(mesh, constraints, cfg):
    X = np.array(mesh.rest_positions, dtype=float)
    for m, target in constraints.midpoint_targets.items():
        key = f"m{m}"
        if key not in mesh.anchor_map:
            continue
        if cfg.init_offset is None:
            z = target[2]
        else:
            z = -cfg.init_offset if constraints.midpoint_sides[m] is Side.FRONT else cfg.init_offset
        X[mesh.anchor_map[key], 2] = z
    return X


def deform(mesh, constraints, cfg=None):
    """Deform ``mesh`` toward ``constraints``.

    Returns the deformed mesh and the energy history; entry 0 is the
    initial configuration.
    """
    cfg = cfg or DeformConfig()
    system = _ArapSystem(mesh, constraints, cfg)
    X = initial_positions(mesh, constraints, cfg)
    R, U = system.local(X)
    history = [EnergyBreakdown(0, *system.energies(X, R))]
    for k in range(1, cfg.iterations + 1):
        X = system.global_step(R, U)
        R, U = system.local(X)
        history.append(EnergyBreakdown(k, *system.energies(X, R)))
        prev, cur = history[-2].e_total, history[-1].e_total
        if abs(prev - cur) <= cfg.convergence_tol * max(prev, 1e-300):
            break
    log.info("deformer stopped after %d iterations, energy %.6g", len(history) - 1,
             history[-1].e_total)
    return replace(mesh, vertices=X), history


def energies_to_csv(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "e_arap", "e_sew", "e_pos", "e_total"])
        for e in history:
            w.writerow([e.iteration, repr(e.e_arap), repr(e.e_sew), repr(e.e_pos), repr(e.e_total)])


def export_obj(mesh, path):
    """Write the mesh as ASCII ``v``/``f`` lines (1-based faces)."""
    lines = [f"v {x:.6f} {y:.6f} {z:.6f}\n" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in mesh.triangles]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def read_obj(path):
    verts, faces = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)
