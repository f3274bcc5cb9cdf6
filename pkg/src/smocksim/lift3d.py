"""Turn a solved planar embedding into 3D guide targets.

Stitching vertices stay in the plane ``z = 0``.  Each stitch midpoint sits
above or below the mean of its endpoints: front stitches fold the fabric
inward (negative height), back stitches outward.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .pattern import Side


class HeightMode(enum.Enum):
    PYTHAGOREAN = "pythagorean"
    FLAT_CREASE = "flat"


@dataclass(frozen=True, eq=False)
class GuideConstraints3D:
    """Positional and sewing-length targets for the deformer.

    Keys of ``stitch_targets`` are grid-vertex indices; keys of
    ``midpoint_targets``, ``midpoint_sides`` and ``sewing_targets`` are
    stitching-spring indices.
    """

    stitch_targets: dict
    midpoint_targets: dict
    midpoint_sides: dict
    sewing_targets: dict
    sewing_pairs: dict = field(default_factory=dict)
    height_mode: HeightMode = HeightMode.PYTHAGOREAN

    def to_json(self):
        doc = {
            "height_mode": self.height_mode.value,
            "targets": {},
            "sewing": {},
        }
        for v, x in sorted(self.stitch_targets.items()):
            doc["targets"][f"v{v}"] = [float(c) for c in x]
        for s, x in sorted(self.midpoint_targets.items()):
            doc["targets"][f"m{s}"] = [float(c) for c in x]
        for s, length in sorted(self.sewing_targets.items()):
            doc["sewing"][f"s{s}"] = float(length)
        return json.dumps(doc, indent=1)


def lift_stitch_vertices(positions):
    """Map ``{vertex: (x, y)}`` to ``{vertex: (x, y, 0)}``."""
    return {v: np.array([float(x[0]), float(x[1]), 0.0]) for v, x in positions.items()}


def midpoint_height(rest_length, length, mode=HeightMode.PYTHAGOREAN):
    """Fold height of a stitch midpoint (non-negative).

    ``length > rest_length`` (soft-dynamics overshoot) yields 0.
    """
    mode = HeightMode(mode)
    L = np.minimum(length, rest_length)
    if mode is HeightMode.PYTHAGOREAN:
        h = np.sqrt(np.maximum((rest_length / 2) ** 2 - (L / 2) ** 2, 0.0))
    else:
        h = (rest_length - L) / 2
    return float(h) if np.ndim(h) == 0 else h


def build_constraints(X, sys, mode=HeightMode.PYTHAGOREAN):
    mode = HeightMode(mode)
    X = np.asarray(X, dtype=float)
    stitch_targets = lift_stitch_vertices({int(v): X[v] for v in sys.stitching_vertices})
    E = sys.stitch_springs
    solved = np.linalg.norm(X[E[:, 0]] - X[E[:, 1]], axis=1) if len(E) else np.zeros(0)
    heights = midpoint_height(sys.stitch_rest, solved, mode) if len(E) else np.zeros(0)
    heights = np.atleast_1d(heights)
    midpoint_targets, sides, sewing, pairs = {}, {}, {}, {}
    for m in sys.midpoints():
        i, j = (int(a) for a in E[m.spring])
        xy = (X[i] + X[j]) / 2
        sign = -1.0 if m.side is Side.FRONT else 1.0
        midpoint_targets[m.spring] = np.array([xy[0], xy[1], sign * heights[m.spring]])
        sides[m.spring] = m.side
        pairs[m.spring] = (i, j)
        sewing[m.spring] = float(np.linalg.norm(stitch_targets[i] - stitch_targets[j]))
    return GuideConstraints3D(stitch_targets, midpoint_targets, sides, sewing, pairs, mode)
