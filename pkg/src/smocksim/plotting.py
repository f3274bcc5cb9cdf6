"""Diagnostic figures for a preview run.

Figures are rendered with the Agg backend and saved without timestamp
metadata, so the PNG bytes depend only on the data.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return str(path)


def plot_convergence(trace, path, gamma=None):
    """Shrinkage ratio and fabric-band violation against iteration."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(trace.iteration, trace.shrinkage_ratio, color="C0", lw=1.2, label="shrinkage")
    if gamma is not None:
        ax.axhline(gamma, color="0.5", ls="--", lw=0.8, label=f"gamma={gamma:g}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("thread length / rest")
    ax2 = ax.twinx()
    ax2.plot(trace.iteration, trace.max_fabric_violation, color="C3", lw=0.8)
    ax2.set_ylabel("max fabric violation", color="C3")
    ax.legend(loc="upper right", frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_embedding(X, sys, path):
    """Planar embedding: fabric springs in grey, stitches colored by side."""
    X = np.asarray(X)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    F = sys.fabric_springs
    segs = np.stack([X[F[:, 0]], X[F[:, 1]]], axis=1)
    for s in segs:
        ax.plot(s[:, 0], s[:, 1], color="0.75", lw=0.5)
    S = sys.stitch_springs
    for k, (i, j) in enumerate(S):
        color = "C0" if sys.stitch_sides[k].value == "front" else "C1"
        ax.plot(X[[i, j], 0], X[[i, j], 1], color=color, lw=1.2)
    vs = np.asarray(sys.stitching_vertices, dtype=int)
    ax.plot(X[vs, 0], X[vs, 1], "k.", ms=2)
    ax.set_aspect("equal")
    ax.invert_yaxis()
    ax.set_axis_off()
    fig.tight_layout()
    return _save(fig, path)


def plot_energy(history, path):
    """Deformer energy terms per local-global iteration (log scale)."""
    it = [e.iteration for e in history]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for name, color in (("e_total", "k"), ("e_arap", "C0"), ("e_sew", "C1"), ("e_pos", "C2")):
        y = np.array([getattr(e, name) for e in history])
        if np.any(y > 0):
            ax.semilogy(it, np.maximum(y, 1e-300), color=color, lw=1.0, label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("energy")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
