"""Direct solution of the constrained planar embedding problem.

Maximizes the summed spring lengths subject to a box on every fabric-spring
length and a two-sided bound on the total thread length, using an
augmented Lagrangian with quadratic penalties and a gradient-descent inner
loop with backtracking.  Slow by design: it is the comparator for the
dedicated 2D simulation, and a feasibility oracle on small instances.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, NumericalBlowup

SMOOTH_EPS = 1e-8


@dataclass
class DirectSolveReport:
    solution: np.ndarray
    objective: float
    max_constraint_violation: float
    outer_iterations: int
    wall_time: float
    feasible: bool = False
    history: list = field(default_factory=list)

    def to_json(self):
        return json.dumps({
            "objective": self.objective,
            "violation": self.max_constraint_violation,
            "iterations": self.outer_iterations,
            "wall_time_s": self.wall_time,
        }, indent=1)


def _all_springs(sys):
    return np.concatenate([sys.stitch_springs, sys.fabric_springs]).reshape(-1, 2)


def objective(X, sys):
    """Sum of all spring lengths (fabric and stitching)."""
    E = _all_springs(sys)
    return float(np.linalg.norm(X[E[:, 0]] - X[E[:, 1]], axis=1).sum())


def constraint_values(X, sys, gamma, tau):
    """Constraint functions in ``g(X) <= 0`` form.

    Order: ``tau - L_f`` and ``L_f - rest_f`` per fabric spring, then
    ``lower - D`` and ``D - gamma * D_rest`` for the total thread length,
    where ``lower`` sums the per-stitch lower bounds.
    """
    F = sys.fabric_springs
    Lf = np.linalg.norm(X[F[:, 0]] - X[F[:, 1]], axis=1)
    S = sys.stitch_springs
    D = float(np.linalg.norm(X[S[:, 0]] - X[S[:, 1]], axis=1).sum()) if len(S) else 0.0
    D_rest = float(sys.stitch_rest.sum())
    lower = float(np.maximum(sys.stitch_lower, tau).sum()) if len(S) else 0.0
    return np.concatenate([tau - Lf, Lf - sys.fabric_rest, [lower - D, D - gamma * D_rest]])


def max_violation(X, sys, gamma, tau):
    return float(max(0.0, constraint_values(X, sys, gamma, tau).max()))


def within_band(X, sys, gamma, tau, delta=0.1):
    """Constraints relaxed by a relative band ``delta``.

    Fabric lengths must lie in ``[(1-delta) tau, (1+delta) rest]`` and the
    total thread length in ``[(1-delta) lower, (1+delta) gamma D_rest]``.
    """
    F = sys.fabric_springs
    Lf = np.linalg.norm(X[F[:, 0]] - X[F[:, 1]], axis=1)
    ok = bool(np.all(Lf >= (1 - delta) * tau) and np.all(Lf <= (1 + delta) * sys.fabric_rest))
    S = sys.stitch_springs
    if len(S):
        D = float(np.linalg.norm(X[S[:, 0]] - X[S[:, 1]], axis=1).sum())
        lower = float(np.maximum(sys.stitch_lower, tau).sum())
        ok = ok and (1 - delta) * lower <= D <= (1 + delta) * gamma * float(sys.stitch_rest.sum())
    return ok


class _Problem:
    def __init__(self, sys, gamma, tau):
        self.sys = sys
        self.n = sys.n_vertices
        self.E = _all_springs(sys)
        self.F = sys.fabric_springs
        self.S = sys.stitch_springs
        self.gamma = gamma
        self.tau = tau
        self.D_rest = float(sys.stitch_rest.sum())
        self.lower = float(np.maximum(sys.stitch_lower, tau).sum()) if len(self.S) else 0.0
        self.nf = len(self.F)

    def _edge(self, X, E):
        e = X[E[:, 0]] - X[E[:, 1]]
        L = np.sqrt((e ** 2).sum(axis=1) + SMOOTH_EPS ** 2)
        return e, L

    def _scatter(self, E, w, e, L):
        # gradient of sum_k w_k * L_k
        g = (w / L)[:, None] * e
        G = np.zeros((self.n, 2))
        for c in (0, 1):
            G[:, c] = np.bincount(E[:, 0], g[:, c], self.n) - np.bincount(E[:, 1], g[:, c], self.n)
        return G

    def merit(self, X, lam, rho, grad=True):
        """Augmented Lagrangian of the minimization of ``-objective``."""
        e, L = self._edge(X, self.E)
        ef, Lf = self._edge(X, self.F)
        es, Ls = self._edge(X, self.S)
        D = float(Ls.sum())
        g = np.concatenate([self.tau - Lf, Lf - self.sys.fabric_rest,
                            [self.lower - D, D - self.gamma * self.D_rest]])
        mult = np.maximum(0.0, lam + rho * g)
        val = -L.sum() + ((mult ** 2 - lam ** 2) / (2 * rho)).sum()
        if not grad:
            return val
        nf = self.nf
        wf = mult[nf:2 * nf] - mult[:nf]
        ws = mult[-1] - mult[-2]
        G = (-self._scatter(self.E, np.ones(len(self.E)), e, L)
             + self._scatter(self.F, wf, ef, Lf)
             + self._scatter(self.S, np.full(len(self.S), ws), es, Ls))
        return val, G, g


def _inner(prob, X, lam, rho, max_iter, gtol):
    t = 1e-2
    val, G, _ = prob.merit(X, lam, rho)
    for _ in range(max_iter):
        gg = float((G ** 2).sum())
        if np.sqrt(gg) < gtol:
            break
        while True:
            Xn = X - t * G
            vn = prob.merit(Xn, lam, rho, grad=False)
            if vn <= val - 1e-4 * t * gg:
                break
            t *= 0.5
            if t < 1e-16:
                return X
        X = Xn
        val, G, _ = prob.merit(X, lam, rho)
        if not np.isfinite(val):
            raise NumericalBlowup("augmented Lagrangian diverged")
        t *= 2.0
    return X


def solve_direct(sys, gamma, tau, tol=1e-3, max_outer=40, max_inner=2000, rho0=10.0,
                 rho_max=1e6, max_time=None, jitter=1e-3, seed=0):
    """Solve the constrained embedding problem from the rest layout.

    The start is the rest layout plus a seeded perturbation of ``jitter``
    grid units; without it a collinear start keeps every gradient on the
    line and the solver stalls at a degenerate stationary point.  ``tol`` is
    relative to the grid unit.  Returns the best feasible (or least
    infeasible) outer iterate; raises :class:`Infeasible` carrying the
    report when no iterate meets the tolerance.
    """
    t0 = time.perf_counter()
    prob = _Problem(sys, gamma, tau)
    X = np.array(sys.rest_positions, dtype=float)
    if jitter > 0:
        X += np.random.default_rng(seed).uniform(-1, 1, X.shape) * jitter * sys.unit
    m = 2 * prob.nf + 2
    lam = np.zeros(m)
    rho = rho0
    abs_tol = tol * sys.unit
    best = None
    prev_viol = np.inf
    prev_obj = None
    history = []
    k = 0
    for k in range(1, max_outer + 1):
        X = _inner(prob, X, lam, rho, max_inner, gtol=1e-3 * abs_tol)
        g = constraint_values(X, sys, gamma, tau)
        viol = float(max(0.0, g.max()))
        obj = objective(X, sys)
        feasible = viol <= abs_tol
        if best is None:
            accept = True
        elif feasible:
            accept = (not best[2]) or obj >= best[1]
        else:
            accept = (not best[2]) and viol < best[0]
        if accept:
            best = (viol, obj, feasible, X.copy())
        history.append({"outer": k, "objective": obj, "violation": viol, "accepted": accept})
        if feasible and prev_obj is not None and abs(obj - prev_obj) <= 1e-6 * max(1.0, abs(obj)):
            break
        prev_obj = obj
        lam = np.maximum(0.0, lam + rho * g)
        if viol > 0.25 * prev_viol:
            rho = min(rho * 10.0, rho_max)
        prev_viol = viol
        if max_time is not None and time.perf_counter() - t0 > max_time:
            break
    viol, obj, feasible, Xb = best
    report = DirectSolveReport(Xb, obj, viol, k, time.perf_counter() - t0, feasible, history)
    if not feasible:
        raise Infeasible(f"constraint violation {viol:.3g} exceeds {abs_tol:.3g}", report)
    return report
