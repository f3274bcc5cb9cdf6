"""Acceptance criteria 1-10.

Each test prints one ``criterion N: PASS|FAIL`` line (visible under
``pytest -v``) and then asserts the same verdict.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import TINY
from smocksim import baseline_opt, cli
from smocksim.deform3d import (DeformConfig, deform, make_fine_mesh, positional_energy,
                               positional_energy_grad, read_obj, sewing_energy,
                               sewing_energy_grad, _position_arrays)
from smocksim.lift3d import HeightMode, build_constraints, midpoint_height
from smocksim.pattern import (BUNDLED, Pattern, Side, StitchPath, Style, bundled_pattern,
                              extract_springs)
from smocksim.sim2d import (SimConfig2D, SimState2D, expected_length_fabric,
                            expected_length_stitch, simulate, simulate_canadian, step,
                            thread_length)

TAU = 0.01
GAMMAS = (0.5, 0.3, 0.2, 0.1)
ITALIAN = ("zigzag", "arrow")


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def runs():
    """simulate() on every bundled pattern and gamma, with wall times."""
    out = {}
    for name in BUNDLED:
        sys = extract_springs(bundled_pattern(name), TAU)
        for g in GAMMAS:
            t0 = time.perf_counter()
            X, trace = simulate(sys, SimConfig2D(gamma=g, thickness=TAU))
            out[name, g] = (sys, X, trace, time.perf_counter() - t0)
    return out


def test_criterion_1_stopping_contract(capsys, runs):
    bad, per_pattern = [], {}
    for (name, g), (sys, X, trace, dt) in runs.items():
        D0 = thread_length(sys.rest_positions, sys.stitch_springs)
        D = thread_length(X, sys.stitch_springs)
        per_pattern[name] = per_pattern.get(name, 0.0) + dt
        if not (D <= g * D0 and len(trace) < SimConfig2D().max_iterations):
            bad.append(f"{name}@{g}: ratio {D / D0:.4f}")
    slow = {k: v for k, v in per_pattern.items() if v >= 60}
    times = ", ".join(f"{k} {v:.2f}s" for k, v in per_pattern.items())
    verdict(capsys, 1, not bad and not slow, f"{len(runs)} runs; {times}; failures {bad}")


def test_criterion_2_identity(capsys, tmp_path):
    worst, traces = 0.0, []
    for name in BUNDLED:
        out = tmp_path / name
        code = cli.main(["preview", f"bundled:{name}", "--gamma", "1.0", "--mode", "italian",
                         "--out-dir", str(out)])
        assert code == 0
        V, _ = read_obj(out / f"{name}.obj")
        p = bundled_pattern(name)
        rest = make_fine_mesh(p, extract_springs(p, TAU), DeformConfig()).rest_positions
        worst = max(worst, float(np.abs(V - rest).max()))
        traces.append(len((out / f"{name}.trace.csv").read_text().splitlines()) - 1)
    ok = worst <= 1e-6 and all(t == 0 for t in traces)
    verdict(capsys, 2, ok, f"max |mesh - rest| {worst:.2e}; trace lengths {traces}")


def test_criterion_3_constraint_bands(capsys, runs):
    lines, ok = [], True
    for (name, g), (sys, X, trace, _) in runs.items():
        F, S = sys.fabric_springs, sys.stitch_springs
        Lf = np.linalg.norm(X[F[:, 0]] - X[F[:, 1]], axis=1)
        Ls = np.linalg.norm(X[S[:, 0]] - X[S[:, 1]], axis=1)
        inside = (Lf >= 0.9 * TAU) & (Lf <= 1.1 * sys.fabric_rest)
        frac = float(inside.mean())
        if frac < 1.0 or np.any(Ls < 0):
            ok = False
            lines.append(f"{name}@{g}: {100 * frac:.1f}% in band, "
                         f"max stretch {float((Lf / sys.fabric_rest).max()):.2f}x")
    verdict(capsys, 3, ok, "; ".join(lines) or "all fabric springs in band")


def test_criterion_4_convergence_shape(capsys, runs):
    worst, where = -np.inf, None
    for (name, g), (_, _, trace, _) in runs.items():
        s = np.array(trace.shrinkage_ratio[::10])
        if len(s) < 2:
            continue
        rise = float((s[1:] / s[:-1] - 1).max())
        if rise > worst:
            worst, where = rise, f"{name}@{g}"
    verdict(capsys, 4, worst <= 0.005,
            f"largest relative rise between 10-iteration samples {worst:+.4%} ({where})")


def test_criterion_5_closed_form_kernels(capsys):
    rng = np.random.default_rng(2024)
    n = 1000
    t0 = time.perf_counter()
    xi, xj = rng.uniform(-1, 1, (n, 2)), rng.uniform(-1, 1, (n, 2))
    bi, bj = rng.uniform(-1, 1, (n, 2)), rng.uniform(-1, 1, (n, 2))
    tau = rng.uniform(1e-3, 0.3, n)
    fab = expected_length_fabric(xi, xj, bi, bj, tau)
    ang = rng.uniform(0, 2 * math.pi, n)
    d = np.column_stack([np.cos(ang), np.sin(ang)])
    lb = np.maximum(tau, rng.uniform(0, 0.3, n))
    sti = expected_length_stitch(xi, xj, d, tau, lb)
    rest = rng.uniform(0.01, 2.0, n)
    L = rest * rng.uniform(0, 1, n)
    hp = midpoint_height(rest, L, HeightMode.PYTHAGOREAN)
    hf = midpoint_height(rest, L, HeightMode.FLAT_CREASE)
    elapsed = time.perf_counter() - t0
    err = 0.0
    for k in range(n):
        cur = math.hypot(xi[k, 0] - xj[k, 0], xi[k, 1] - xj[k, 1])
        rl = math.hypot(bi[k, 0] - bj[k, 0], bi[k, 1] - bj[k, 1])
        err = max(err, abs(fab[k] - max(tau[k], min(cur, rl))))
        proj = abs((xi[k, 0] - xj[k, 0]) * d[k, 0] + (xi[k, 1] - xj[k, 1]) * d[k, 1])
        err = max(err, abs(sti[k] - max(lb[k], proj)))
        err = max(err, abs(hp[k] - math.sqrt(rest[k] ** 2 - L[k] ** 2) / 2))
        err = max(err, abs(hf[k] - (rest[k] - L[k]) / 2))
    verdict(capsys, 5, err <= 1e-12 and elapsed < 1.0,
            f"max error {err:.1e} over {n} inputs per kernel; {elapsed * 1e3:.1f} ms")


def test_criterion_6_one_step_oracle(capsys):
    from dataclasses import replace
    p = Pattern(2, 2, [StitchPath([(0, 0), (0, 1)])])
    sys = replace(extract_springs(p, TAU), fabric_springs=np.zeros((0, 2), dtype=np.int64))
    st = step(SimState2D.initial(sys), sys, SimConfig2D())
    disp = np.linalg.norm(st.positions - sys.rest_positions, axis=1)[:2]
    err = float(np.abs(disp - 0.04455).max())
    verdict(capsys, 6, err <= 1e-9, f"per-endpoint displacement {disp.tolist()}, error {err:.1e}")


def test_criterion_7_baseline_equivalence(capsys):
    gamma = 0.3
    lines, ok = [], True
    for name, p in sorted(TINY.items()):
        sys = extract_springs(p, TAU)
        rep = baseline_opt.solve_direct(sys, gamma, TAU)
        X, _ = simulate(sys, SimConfig2D(gamma=gamma))
        band = baseline_opt.within_band(X, sys, gamma, TAU)
        good = rep.max_constraint_violation < 1e-3 and band
        ok &= good
        if not good:
            lines.append(f"{name}: direct viol {rep.max_constraint_violation:.1e}, "
                         f"alg1 in band {band}")
    for name in BUNDLED:
        p = bundled_pattern(name)
        sys = extract_springs(p, TAU)
        if len(sys.stitching_vertices) < 100:
            continue
        t0 = time.perf_counter()
        simulate(sys, SimConfig2D(gamma=gamma))
        t_alg1 = time.perf_counter() - t0
        rep = baseline_opt.solve_direct(sys, gamma, TAU)
        ok &= t_alg1 < rep.wall_time
        lines.append(f"{name} |Vs|={len(sys.stitching_vertices)}: alg1 {t_alg1:.3f}s "
                     f"vs direct {rep.wall_time:.1f}s")
    verdict(capsys, 7, ok, f"{len(TINY)} tiny patterns at gamma={gamma}; " + "; ".join(lines))


@pytest.fixture(scope="module")
def deformed():
    """Default-weight deformations of the bundled patterns at gamma = 0.3."""
    out = {}
    for name in BUNDLED:
        p = bundled_pattern(name)
        sys = extract_springs(p, TAU)
        if sys.style is Style.CANADIAN:
            X, _ = simulate_canadian(sys, SimConfig2D())
        else:
            X, _ = simulate(sys, SimConfig2D(gamma=0.3))
        cons = build_constraints(X, sys)
        cfg = DeformConfig()
        mesh = make_fine_mesh(p, sys, cfg)
        result, hist = deform(mesh, cons, cfg)
        out[name] = (sys, cons, mesh, result, hist)
    return out


def _max_grad_error(f, g, X, cons, amap, rng, samples=60):
    G = g(X, cons, amap)
    idx = np.array(sorted(set(amap.values())))
    worst = 0.0
    for v in rng.choice(idx, size=min(samples, len(idx)), replace=False):
        for c in range(3):
            Xp, Xm = X.copy(), X.copy()
            Xp[v, c] += 1e-6
            Xm[v, c] -= 1e-6
            fd = (f(Xp, cons, amap) - f(Xm, cons, amap)) / 2e-6
            worst = max(worst, abs(fd - G[v, c]) / max(abs(fd), abs(G[v, c]), 1e-8))
    return worst


def test_criterion_8_deformer(capsys, deformed):
    rng = np.random.default_rng(8)
    grad_err, rise, anchor = 0.0, -np.inf, []
    for name, (sys, cons, mesh, result, hist) in deformed.items():
        X = mesh.rest_positions + rng.normal(scale=0.02, size=mesh.rest_positions.shape)
        grad_err = max(grad_err,
                       _max_grad_error(sewing_energy, sewing_energy_grad, X, cons,
                                       mesh.anchor_map, rng),
                       _max_grad_error(positional_energy, positional_energy_grad, X, cons,
                                       mesh.anchor_map, rng))
        E = np.array([h.e_total for h in hist])
        rise = max(rise, float(np.diff(E).max()))
        idx, tgt = _position_arrays(cons, mesh.anchor_map)
        dist = np.linalg.norm(result.vertices[idx] - tgt, axis=1)
        anchor.append((name, float(dist.max() / mesh.spacing)))
    ok = grad_err < 1e-4 and rise <= 1e-9 and all(r <= 1.0 for _, r in anchor)
    detail = (f"gradient rel err {grad_err:.1e}; max energy rise {rise:.1e}; "
              + ", ".join(f"{n} worst anchor {r:.2f} edges" for n, r in anchor))
    verdict(capsys, 8, ok, detail)


def test_criterion_9_sign_convention(capsys, deformed):
    lines, ok = [], True
    for name in ITALIAN:
        sys, cons, mesh, result, _ = deformed[name]
        wrong = skipped = checked = 0
        for s, target in cons.midpoint_targets.items():
            key = f"m{s}"
            if key not in mesh.anchor_map:
                continue
            if target[2] == 0.0:
                skipped += 1
                continue
            z = result.vertices[mesh.anchor_map[key], 2]
            want_below = cons.midpoint_sides[s] is Side.FRONT
            checked += 1
            if (z < 0) != want_below or z == 0:
                wrong += 1
        ok &= wrong == 0
        lines.append(f"{name}: {checked - wrong}/{checked} correct, {skipped} unfolded skipped")
    sys, cons, *_ = deformed["canadian_box"]
    positive = sum(t[2] > 0 for t in cons.midpoint_targets.values())
    ok &= positive == 0
    lines.append(f"canadian_box: {positive} positive midpoint targets")
    verdict(capsys, 9, ok, "; ".join(lines))


def test_criterion_10_determinism(capsys, tmp_path):
    def once():
        code = cli.main(["preview", "bundled:zigzag", "--gamma", "0.3", "--plots",
                         "--out-dir", str(tmp_path)])
        assert code == 0
        files = {}
        for f in sorted(tmp_path.iterdir()):
            data = f.read_bytes()
            if f.name.endswith(".manifest.json"):
                doc = json.loads(data)
                doc.pop("stage_times")
                data = json.dumps(doc, sort_keys=True).encode()
            files[f.name] = data
        return files

    a = once()
    b = once()
    differ = [k for k in a if a[k] != b.get(k)]
    verdict(capsys, 10, not differ and a.keys() == b.keys(),
            f"{len(a)} artifacts compared (manifest without wall times); differing: {differ}")
