"""Smocking patterns and the coarse mass-spring system derived from them.

A pattern is a regular grid of ``rows x cols`` vertices plus a list of
stitching paths.  Each path visits grid vertices in order; its segments
alternate between front and back stitches, starting with ``first_stitch``.

Grid vertex ``(row, col)`` has index ``row * cols + col`` and rest position
``(col * unit, row * unit)``, so the x axis runs along the rows.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .errors import SchemaError, ValidationError


class Side(enum.Enum):
    FRONT = "front"
    BACK = "back"

    def flipped(self):
        return Side.BACK if self is Side.FRONT else Side.FRONT


class Style(enum.Enum):
    ITALIAN = "italian"
    CANADIAN = "canadian"


PATTERN_SCHEMA = {
    "type": "object",
    "required": ["rows", "cols", "style", "paths"],
    "additionalProperties": False,
    "properties": {
        "rows": {"type": "integer", "minimum": 2},
        "cols": {"type": "integer", "minimum": 2},
        "style": {"enum": ["italian", "canadian"]},
        "paths": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["first_stitch", "vertices"],
                "additionalProperties": False,
                "properties": {
                    "first_stitch": {"enum": ["front", "back"]},
                    "vertices": {
                        "type": "array",
                        "minItems": 2,
                        "items": {
                            "type": "array",
                            "minItems": 2,
                            "maxItems": 2,
                            "items": {"type": "integer"},
                        },
                    },
                },
            },
        },
        "beads": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["path", "stitch", "diameter"],
                "additionalProperties": False,
                "properties": {
                    "path": {"type": "integer"},
                    "stitch": {"type": "integer"},
                    "diameter": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class StitchPath:
    vertices: tuple
    first_stitch: Side = Side.FRONT

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(tuple(int(c) for c in v) for v in self.vertices))
        object.__setattr__(self, "first_stitch", Side(self.first_stitch))

    @property
    def n_stitches(self):
        return len(self.vertices) - 1

    def side(self, k):
        """Side of stitch ``k`` (the segment from vertex k to k + 1)."""
        return self.first_stitch if k % 2 == 0 else self.first_stitch.flipped()


@dataclass(frozen=True)
class BeadConstraint:
    path_index: int
    stitch_index: int
    diameter: float


@dataclass(frozen=True)
class Pattern:
    rows: int
    cols: int
    paths: tuple = ()
    beads: tuple = ()
    style: Style = Style.ITALIAN

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "beads", tuple(self.beads))
        object.__setattr__(self, "style", Style(self.style))
        _validate(self)

    @property
    def unit(self):
        """Grid spacing that scales the longest side of the grid to 1 m."""
        return 1.0 / max(self.rows - 1, self.cols - 1)

    @property
    def n_vertices(self):
        return self.rows * self.cols

    def index(self, rc):
        return rc[0] * self.cols + rc[1]


def _validate(p):
    if p.rows < 2 or p.cols < 2:
        raise ValidationError(f"grid must be at least 2x2, got {p.rows}x{p.cols}",
                              {"rows": p.rows, "cols": p.cols})
    for i, path in enumerate(p.paths):
        if len(path.vertices) < 2:
            raise ValidationError(f"path {i} has fewer than 2 vertices", {"path": i})
        for k, (r, c) in enumerate(path.vertices):
            if not (0 <= r < p.rows and 0 <= c < p.cols):
                raise ValidationError(
                    f"path {i} vertex {k} ({r},{c}) lies outside the {p.rows}x{p.cols} grid",
                    {"path": i, "vertex": k, "rc": [r, c]})
            if k > 0 and path.vertices[k - 1] == (r, c):
                raise ValidationError(
                    f"path {i} repeats vertex ({r},{c}) at positions {k - 1} and {k}",
                    {"path": i, "vertex": k, "rc": [r, c]})
    for b, bead in enumerate(p.beads):
        if not 0 <= bead.path_index < len(p.paths):
            raise ValidationError(f"bead {b} references missing path {bead.path_index}",
                                  {"bead": b, "path": bead.path_index})
        n = p.paths[bead.path_index].n_stitches
        if not 0 <= bead.stitch_index < n:
            raise ValidationError(
                f"bead {b} references stitch {bead.stitch_index} but path "
                f"{bead.path_index} has {n} stitches",
                {"bead": b, "path": bead.path_index, "stitch": bead.stitch_index})
        if not bead.diameter > 0:
            raise ValidationError(f"bead {b} has non-positive diameter", {"bead": b})


def parse_pattern(text):
    """Parse and validate a pattern document (JSON text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc.msg} at line {exc.lineno} column {exc.colno}",
                          {"line": exc.lineno, "column": exc.colno, "pos": exc.pos}) from exc
    try:
        jsonschema.validate(doc, PATTERN_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise SchemaError(f"schema violation at {where}: {exc.message}",
                          {"path": list(exc.absolute_path)}) from exc
    paths = [StitchPath(tuple(map(tuple, p["vertices"])), Side(p["first_stitch"]))
             for p in doc["paths"]]
    beads = [BeadConstraint(b["path"], b["stitch"], float(b["diameter"]))
             for b in doc.get("beads", [])]
    return Pattern(doc["rows"], doc["cols"], paths, beads, Style(doc["style"]))


def load_pattern(path):
    with open(path, encoding="utf-8") as fh:
        return parse_pattern(fh.read())


def dump_pattern(p):
    """Serialize a pattern back to the JSON document format."""
    doc = {
        "rows": p.rows,
        "cols": p.cols,
        "style": p.style.value,
        "paths": [{"first_stitch": path.first_stitch.value,
                   "vertices": [list(v) for v in path.vertices]} for path in p.paths],
    }
    if p.beads:
        doc["beads"] = [{"path": b.path_index, "stitch": b.stitch_index, "diameter": b.diameter}
                        for b in p.beads]
    return json.dumps(doc, indent=1)


BUNDLED = ("zigzag", "arrow", "canadian_box")


def bundled_pattern_path(name):
    return resources.files("smocksim") / "patterns" / f"{name}.json"


def bundled_pattern(name):
    """Load one of the patterns shipped with the package (see ``BUNDLED``)."""
    return parse_pattern(bundled_pattern_path(name).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Midpoint:
    spring: int
    side: Side


@dataclass(frozen=True, eq=False)
class SpringSystem:
    """Coarse mass-spring abstraction of a pattern.

    Stitching-spring orientation is stored as the unit rest direction
    ``x̄_i - x̄_j``; it stands in for the current direction whenever a spring
    collapses to zero length.
    """

    rows: int
    cols: int
    unit: float
    thickness: float
    style: Style
    rest_positions: np.ndarray
    fabric_springs: np.ndarray
    stitch_springs: np.ndarray
    stitch_lower: np.ndarray
    stitch_path: np.ndarray
    stitch_sides: tuple
    stitching_vertices: np.ndarray
    pleat_vertices: np.ndarray
    front_midpoints: tuple
    back_midpoints: tuple
    diagonal_springs: bool = False
    fabric_rest: np.ndarray = field(init=False)
    stitch_rest: np.ndarray = field(init=False)
    stitch_rest_dir: np.ndarray = field(init=False)

    def __post_init__(self):
        X = self.rest_positions
        fr = _lengths(X, self.fabric_springs)
        sv = _vectors(X, self.stitch_springs)
        sr = np.linalg.norm(sv, axis=1)
        object.__setattr__(self, "fabric_rest", fr)
        object.__setattr__(self, "stitch_rest", sr)
        object.__setattr__(self, "stitch_rest_dir", sv / sr[:, None] if len(sr) else sv)
        for a in (self.rest_positions, self.fabric_springs, self.stitch_springs, self.stitch_lower,
                  self.stitch_path, self.stitching_vertices, self.pleat_vertices,
                  self.fabric_rest, self.stitch_rest, self.stitch_rest_dir):
            a.flags.writeable = False

    @property
    def n_vertices(self):
        return len(self.rest_positions)

    @property
    def n_stitches(self):
        return len(self.stitch_springs)

    def midpoints(self):
        """All midpoints ordered by their parent spring."""
        return tuple(sorted(self.front_midpoints + self.back_midpoints, key=lambda m: m.spring))


def _vectors(X, springs):
    springs = np.asarray(springs, dtype=np.int64).reshape(-1, 2)
    return X[springs[:, 0]] - X[springs[:, 1]]


def _lengths(X, springs):
    return np.linalg.norm(_vectors(X, springs), axis=1)


def rest_positions(p):
    r, c = np.divmod(np.arange(p.n_vertices), p.cols)
    return np.column_stack([c * p.unit, r * p.unit]).astype(float)


def fabric_springs(rows, cols, diagonal=False):
    idx = np.arange(rows * cols).reshape(rows, cols)
    parts = [np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()]),
             np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])]
    if diagonal:
        parts.append(np.column_stack([idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()]))
        parts.append(np.column_stack([idx[:-1, 1:].ravel(), idx[1:, :-1].ravel()]))
    return np.concatenate(parts).astype(np.int64)


def classify_vertices(p):
    """Return ``(V_s, V_p, V_f, V_b)``.

    ``V_s``/``V_p`` are sorted vertex-index arrays.  ``V_f``/``V_b`` are
    tuples of :class:`Midpoint`, one per stitch, indexed by stitch order over
    all paths.  Canadian patterns only annotate one side of the fabric, so
    every midpoint is a front midpoint.
    """
    on_path = sorted({p.index(v) for path in p.paths for v in path.vertices})
    vs = np.array(on_path, dtype=np.int64)
    vp = np.setdiff1d(np.arange(p.n_vertices), vs)
    front, back = [], []
    s = 0
    for path in p.paths:
        for k in range(path.n_stitches):
            side = Side.FRONT if p.style is Style.CANADIAN else path.side(k)
            (front if side is Side.FRONT else back).append(Midpoint(s, side))
            s += 1
    return vs, vp, tuple(front), tuple(back)


def extract_springs(p, thickness=0.01, diagonal_springs=False):
    """Build the coarse :class:`SpringSystem` of ``p``.

    Every stitching spring gets ``thickness`` as its lower bound unless a
    bead overrides it with the bead diameter.
    """
    if not thickness > 0:
        raise ValueError("thickness must be positive")
    X = rest_positions(p)
    pairs, owner, lower = [], [], []
    beads = {(b.path_index, b.stitch_index): b.diameter for b in p.beads}
    for i, path in enumerate(p.paths):
        ids = [p.index(v) for v in path.vertices]
        for k in range(path.n_stitches):
            pairs.append((ids[k], ids[k + 1]))
            owner.append(i)
            # a bead can hold a stitch open but never below the fabric thickness
            lower.append(max(thickness, beads.get((i, k), thickness)))
    vs, vp, vf, vb = classify_vertices(p)
    sides = [None] * len(pairs)
    for m in vf + vb:
        sides[m.spring] = m.side
    return SpringSystem(
        rows=p.rows,
        cols=p.cols,
        unit=p.unit,
        thickness=float(thickness),
        style=p.style,
        rest_positions=X,
        fabric_springs=fabric_springs(p.rows, p.cols, diagonal_springs),
        stitch_springs=np.array(pairs, dtype=np.int64).reshape(-1, 2),
        stitch_lower=np.array(lower, dtype=float),
        stitch_path=np.array(owner, dtype=np.int64),
        stitch_sides=tuple(sides),
        stitching_vertices=vs,
        pleat_vertices=vp,
        front_midpoints=vf,
        back_midpoints=vb,
        diagonal_springs=diagonal_springs,
    )
