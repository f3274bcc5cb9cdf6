"""Damped explicit simulation of the coarse spring system in the plane.

Every iteration re-estimates the expected length of each spring from the
current embedding and then takes one damped explicit-Euler step toward those
lengths.  Fabric springs are clamped into ``[thickness, rest]``; stitching
springs keep only their extent across the pulling direction, so stitches
aligned with the pull shrink fastest.  Pulling stops once the total thread
length has dropped to ``gamma`` times its rest value.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import MaxIterationsExceeded, NumericalBlowup

log = logging.getLogger(__name__)

_TINY = 1e-300


@dataclass(frozen=True)
class SimConfig2D:
    """Hyper-parameters of the 2D simulation.

    ``pull_direction`` is the direction the threads are extracted along; the
    stitch projection uses its orthogonal.  With ``per_spring`` every stitch
    is pulled along its own axis instead.
    """

    gamma: float = 0.3
    thickness: float = 0.01
    pull_direction: tuple = (1.0, 0.0)
    per_spring: bool = False
    dt: float = 0.1
    damping: float = 0.9
    k_fabric: float = 1.0
    k_stitch: float = 5.0
    max_iterations: int = 200_000

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.thickness > 0:
            raise ValueError("thickness must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not (self.k_fabric > 0 and self.k_stitch > 0):
            raise ValueError("stiffnesses must be positive")
        d = np.asarray(self.pull_direction, dtype=float)
        n = np.linalg.norm(d)
        if d.shape != (2,) or not n > 0:
            raise ValueError("pull_direction must be a non-zero 2-vector")
        object.__setattr__(self, "pull_direction", (float(d[0] / n), float(d[1] / n)))

    @classmethod
    def from_angle(cls, degrees, **kw):
        t = np.deg2rad(degrees)
        return cls(pull_direction=(float(np.cos(t)), float(np.sin(t))), **kw)

    @property
    def projection_axis(self):
        """Unit vector orthogonal to the pulling direction."""
        px, py = self.pull_direction
        return np.array([-py, px])


@dataclass
class SimState2D:
    positions: np.ndarray
    velocities: np.ndarray
    expected_lengths: np.ndarray
    iteration: int = 0
    shrinkage_ratio: float = 1.0

    @classmethod
    def initial(cls, sys):
        X = np.array(sys.rest_positions, dtype=float)
        n_springs = sys.n_stitches + len(sys.fabric_springs)
        return cls(X, np.zeros_like(X), np.zeros(n_springs), 0, 1.0)


@dataclass
class ConvergenceTrace:
    iteration: list = field(default_factory=list)
    thread_length: list = field(default_factory=list)
    shrinkage_ratio: list = field(default_factory=list)
    max_fabric_violation: list = field(default_factory=list)

    def __len__(self):
        return len(self.iteration)

    def append(self, k, D, ratio, violation):
        self.iteration.append(k)
        self.thread_length.append(D)
        self.shrinkage_ratio.append(ratio)
        self.max_fabric_violation.append(violation)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "thread_length", "shrinkage_ratio", "max_fabric_violation"])
            for row in zip(self.iteration, self.thread_length, self.shrinkage_ratio,
                           self.max_fabric_violation):
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def thread_length(X, stitch_springs):
    """Total length of all threads: the summed stitching-spring lengths."""
    E = np.asarray(stitch_springs, dtype=np.int64).reshape(-1, 2)
    if len(E) == 0:
        return 0.0
    return float(np.linalg.norm(X[E[:, 0]] - X[E[:, 1]], axis=1).sum())


def expected_length_fabric(xi, xj, xbar_i, xbar_j, thickness):
    """Current length clamped into ``[thickness, rest length]``."""
    cur = np.linalg.norm(np.subtract(xi, xj), axis=-1)
    rest = np.linalg.norm(np.subtract(xbar_i, xbar_j), axis=-1)
    return np.maximum(thickness, np.minimum(cur, rest))


def expected_length_stitch(xi, xj, d, thickness, lower_bound=None):
    """Extent of the stitch along ``d`` (orthogonal to the pull), floored.

    ``lower_bound`` defaults to ``thickness``; beads raise it per spring.
    """
    lb = thickness if lower_bound is None else lower_bound
    proj = np.abs(np.sum(np.subtract(xi, xj) * np.asarray(d), axis=-1))
    return np.maximum(lb, proj)


class _Kernel:
    """Precomputed arrays for stepping one spring system."""

    def __init__(self, sys, cfg, canadian=False):
        self.n = sys.n_vertices
        self.n_stitch = sys.n_stitches
        springs = np.concatenate([sys.stitch_springs, sys.fabric_springs]).reshape(-1, 2)
        self.i = springs[:, 0].copy()
        self.j = springs[:, 1].copy()
        Xb = sys.rest_positions
        rest_vec = Xb[self.i] - Xb[self.j]
        self.rest = np.linalg.norm(rest_vec, axis=1)
        self.rest_dir = rest_vec / np.maximum(self.rest, _TINY)[:, None]
        self.fabric_rest = self.rest[self.n_stitch:]
        self.k = np.concatenate([np.full(self.n_stitch, cfg.k_stitch),
                                 np.full(len(springs) - self.n_stitch, cfg.k_fabric)])
        self.stitch_lower = np.asarray(sys.stitch_lower, dtype=float)
        self.tau = cfg.thickness
        self.axis = cfg.projection_axis
        self.per_spring = cfg.per_spring
        self.canadian = canadian
        self.alpha = cfg.damping
        self.dt = cfg.dt

    def measure(self, X):
        vec = X[self.i] - X[self.j]
        with np.errstate(over="ignore", invalid="ignore"):
            length = np.sqrt(vec[:, 0] ** 2 + vec[:, 1] ** 2)
        return vec, length

    def expected(self, vec, length):
        ns = self.n_stitch
        d = np.empty_like(length)
        if self.canadian:
            d[:ns] = 0.0
        elif self.per_spring:
            # projection onto the spring's own normal vanishes
            d[:ns] = self.stitch_lower
        else:
            d[:ns] = np.maximum(self.stitch_lower, np.abs(vec[:ns] @ self.axis))
        d[ns:] = np.maximum(self.tau, np.minimum(length[ns:], self.fabric_rest))
        return d

    def advance(self, X, V, vec, length):
        """One damped explicit step; returns new (X, V, expected lengths)."""
        d = self.expected(vec, length)
        degenerate = length <= _TINY
        safe = np.where(degenerate, 1.0, length)
        unit = np.where(degenerate[:, None], self.rest_dir, vec / safe[:, None])
        with np.errstate(over="ignore", invalid="ignore"):
            f = (self.k * (length - d))[:, None] * unit
            a = np.empty_like(X)
            for c in (0, 1):
                a[:, c] = (np.bincount(self.j, f[:, c], self.n)
                           - np.bincount(self.i, f[:, c], self.n))
            V = self.alpha * (V + a * self.dt)
            X = X + V * self.dt
        self.last_accel = a
        if not np.isfinite(X).all():
            raise NumericalBlowup("non-finite coordinate in 2D simulation; reduce dt or stiffness")
        return X, V, d

    def fabric_violation(self, length):
        lf = length[self.n_stitch:]
        if len(lf) == 0:
            return 0.0
        return float(max(0.0, np.max(self.tau - lf), np.max(lf - self.fabric_rest)))


def step(state, sys, cfg, canadian=False):
    """Advance ``state`` by one damped explicit-Euler step."""
    kern = _Kernel(sys, cfg, canadian)
    vec, length = kern.measure(state.positions)
    X, V, d = kern.advance(state.positions, state.velocities, vec, length)
    D0 = thread_length(sys.rest_positions, sys.stitch_springs)
    D = thread_length(X, sys.stitch_springs)
    ratio = D / D0 if D0 > 0 else 1.0
    return SimState2D(X, V, d, state.iteration + 1, ratio)


def simulate(sys, cfg):
    """Pull the threads until the total thread length reaches ``gamma``.

    Returns the final embedding and the per-iteration trace.  The stopping
    rule is tested before every step, so ``gamma = 1`` returns the rest
    layout untouched.
    """
    kern = _Kernel(sys, cfg)
    ns = kern.n_stitch
    X = np.array(sys.rest_positions, dtype=float)
    V = np.zeros_like(X)
    trace = ConvergenceTrace()
    D0 = thread_length(X, sys.stitch_springs)
    target = cfg.gamma * D0
    k = 0
    while True:
        vec, length = kern.measure(X)
        D = float(length[:ns].sum())
        if k > 0:
            trace.append(k, D, D / D0, kern.fabric_violation(length))
        if D <= target:
            break
        if k >= cfg.max_iterations:
            raise MaxIterationsExceeded(
                f"shrinkage {D / D0:.4f} still above gamma={cfg.gamma} after {k} iterations",
                trace, X)
        X, V, _ = kern.advance(X, V, vec, length)
        k += 1
    log.info("2D simulation reached shrinkage %.4f in %d iterations", D / D0 if D0 else 1.0, k)
    return X, trace


def simulate_canadian(sys, cfg):
    """Contract every stitch toward zero length until the layout stops moving.

    ``gamma`` is ignored: the run ends when both the largest per-iteration
    vertex displacement and the largest force increment ``|a| dt**2`` drop
    below ``1e-6 * unit``.  The force test keeps an oscillation's turning
    point from passing as a fixed point.
    """
    X = np.array(sys.rest_positions, dtype=float)
    trace = ConvergenceTrace()
    if sys.n_stitches == 0:
        return X, trace
    kern = _Kernel(sys, cfg, canadian=True)
    ns = kern.n_stitch
    V = np.zeros_like(X)
    D0 = thread_length(X, sys.stitch_springs)
    tol = 1e-6 * sys.unit
    k = 0
    while True:
        vec, length = kern.measure(X)
        if k > 0:
            D = float(length[:ns].sum())
            trace.append(k, D, D / D0, kern.fabric_violation(length))
            if moved < tol and pushed < tol:
                break
        if k >= cfg.max_iterations:
            raise MaxIterationsExceeded(f"no fixed point after {k} iterations", trace, X)
        X_new, V, _ = kern.advance(X, V, vec, length)
        moved = float(np.sqrt(((X_new - X) ** 2).sum(axis=1)).max())
        pushed = float(np.sqrt((kern.last_accel ** 2).sum(axis=1)).max()) * cfg.dt ** 2
        X = X_new
        k += 1
    log.info("Canadian contraction settled after %d iterations", k)
    return X, trace
