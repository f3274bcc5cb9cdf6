import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smocksim.errors import SchemaError, ValidationError
from smocksim.pattern import (BUNDLED, BeadConstraint, Pattern, Side, StitchPath, Style,
                              bundled_pattern, classify_vertices, dump_pattern, extract_springs,
                              fabric_springs, parse_pattern, rest_positions)


def doc(rows, cols, paths, style="italian", beads=None):
    d = {"rows": rows, "cols": cols, "style": style,
         "paths": [{"first_stitch": f, "vertices": v} for f, v in paths]}
    if beads is not None:
        d["beads"] = beads
    return json.dumps(d)


def test_smallest_pattern():
    p = parse_pattern(doc(2, 2, [("front", [[0, 0], [0, 1]])]))
    assert sum(q.n_stitches for q in p.paths) == 1
    assert p.unit == 1.0


def test_out_of_grid_vertex_named():
    with pytest.raises(ValidationError, match=r"\(5,0\)"):
        parse_pattern(doc(3, 3, [("front", [[0, 0], [5, 0]])]))


def test_repeated_consecutive_vertex():
    with pytest.raises(ValidationError, match="repeats"):
        parse_pattern(doc(3, 3, [("front", [[1, 1], [1, 1]])]))


def test_multirow_counts(multirow):
    vs, vp, _, _ = classify_vertices(multirow)
    assert len(vs) == 174
    assert multirow.n_vertices == 304


def test_arrow_counts():
    p = bundled_pattern("arrow")
    vs, _, _, _ = classify_vertices(p)
    assert (len(vs), p.n_vertices) == (116, 288)


def test_grid_without_paths():
    sys = extract_springs(Pattern(3, 3), 0.01)
    assert len(sys.fabric_springs) == 12
    assert sys.n_stitches == 0
    assert len(sys.stitching_vertices) == 0
    assert len(sys.pleat_vertices) == 9


def test_alternation_two_stitches():
    p = Pattern(2, 2, [StitchPath([(0, 0), (1, 1), (0, 1)], Side.FRONT)])
    sys = extract_springs(p, 0.01)
    assert sys.n_stitches == 2
    assert [m.spring for m in sys.front_midpoints] == [0]
    assert [m.spring for m in sys.back_midpoints] == [1]


def test_bead_lower_bound():
    path = StitchPath([(0, c) for c in range(6)])
    p = Pattern(3, 6, [path], [BeadConstraint(0, 3, 0.05)])
    sys = extract_springs(p, 0.01)
    expected = np.full(5, 0.01)
    expected[3] = 0.05
    np.testing.assert_array_equal(sys.stitch_lower, expected)


def test_thin_bead_keeps_thickness():
    p = Pattern(2, 3, [StitchPath([(0, 0), (0, 2)])], [BeadConstraint(0, 0, 0.001)])
    assert extract_springs(p, 0.01).stitch_lower[0] == 0.01


def test_all_vertices_stitched():
    p = Pattern(2, 2, [StitchPath([(0, 0), (0, 1), (1, 1), (1, 0)])])
    vs, vp, _, _ = classify_vertices(p)
    assert len(vp) == 0 and len(vs) == 4


@pytest.mark.parametrize("text,where", [
    ('{"rows": 3,', "line"),
    ('{"rows": 3, "cols": 3, "style": "italian"}', "paths"),
    ('{"rows": 3, "cols": 3, "style": "woven", "paths": []}', "style"),
    ('{"rows": 1, "cols": 3, "style": "italian", "paths": []}', "rows"),
])
def test_schema_errors(text, where):
    with pytest.raises(SchemaError) as info:
        parse_pattern(text)
    assert where in str(info.value) or where in json.dumps(info.value.location)


def test_truncated_json_position():
    with pytest.raises(SchemaError) as info:
        parse_pattern('{"rows": 3, "cols"')
    assert {"line", "column", "pos"} <= set(info.value.location)


def test_bead_missing_path():
    with pytest.raises(ValidationError, match="bead 0"):
        parse_pattern(doc(2, 2, [("front", [[0, 0], [0, 1]])],
                          beads=[{"path": 3, "stitch": 0, "diameter": 0.02}]))


def test_bead_missing_stitch():
    with pytest.raises(ValidationError, match="bead 0 references stitch 4"):
        parse_pattern(doc(2, 2, [("front", [[0, 0], [0, 1]])],
                          beads=[{"path": 0, "stitch": 4, "diameter": 0.02}]))


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_load(name):
    p = bundled_pattern(name)
    assert parse_pattern(dump_pattern(p)) == p


def test_canadian_box_front_only():
    sys = extract_springs(bundled_pattern("canadian_box"), 0.01)
    assert sys.style is Style.CANADIAN
    assert sys.back_midpoints == ()
    assert len(sys.front_midpoints) == sys.n_stitches


def test_canadian_style_overrides_back_first_stitch():
    p = Pattern(2, 3, [StitchPath([(0, 0), (1, 1), (0, 2)], Side.BACK)], style=Style.CANADIAN)
    _, _, vf, vb = classify_vertices(p)
    assert len(vf) == 2 and vb == ()


def test_diagonal_springs_flag():
    assert len(fabric_springs(3, 4)) == 3 * 3 + 4 * 2
    assert len(fabric_springs(3, 4, diagonal=True)) == 3 * 3 + 4 * 2 + 2 * 2 * 3


def test_rest_positions_unit():
    p = Pattern(3, 5)
    X = rest_positions(p)
    assert p.unit == 0.25
    np.testing.assert_allclose(X[p.index((2, 4))], [1.0, 0.5])


def test_spring_system_read_only():
    sys = extract_springs(bundled_pattern("zigzag"), 0.01)
    with pytest.raises(ValueError):
        sys.rest_positions[0, 0] = 1.0


def test_non_positive_thickness():
    with pytest.raises(ValueError):
        extract_springs(Pattern(2, 2), 0.0)


@st.composite
def patterns(draw):
    rows = draw(st.integers(2, 7))
    cols = draw(st.integers(2, 7))
    vertex = st.tuples(st.integers(0, rows - 1), st.integers(0, cols - 1))
    paths = []
    for _ in range(draw(st.integers(0, 4))):
        vs = draw(st.lists(vertex, min_size=2, max_size=8))
        vs = [v for k, v in enumerate(vs) if k == 0 or v != vs[k - 1]]
        if len(vs) >= 2:
            paths.append(StitchPath(vs, draw(st.sampled_from(list(Side)))))
    style = draw(st.sampled_from(list(Style)))
    return Pattern(rows, cols, paths, style=style)


@settings(max_examples=60, deadline=None)
@given(patterns())
def test_round_trip(p):
    assert parse_pattern(dump_pattern(p)) == p


@settings(max_examples=60, deadline=None)
@given(patterns())
def test_spring_counts_and_alternation(p):
    sys = extract_springs(p, 0.01)
    r, c = p.rows, p.cols
    assert len(sys.fabric_springs) == r * (c - 1) + c * (r - 1)
    assert sys.n_stitches == sum(len(q.vertices) - 1 for q in p.paths)
    sides = {m.spring: m.side for m in sys.midpoints()}
    s = 0
    for q in p.paths:
        for k in range(q.n_stitches):
            want = Side.FRONT if p.style is Style.CANADIAN else (
                q.first_stitch if k % 2 == 0 else q.first_stitch.flipped())
            assert sides[s] is want
            s += 1
    vs, vp = set(sys.stitching_vertices), set(sys.pleat_vertices)
    assert vs.isdisjoint(vp) and len(vs | vp) == r * c


@settings(max_examples=30, deadline=None)
@given(patterns())
def test_normalization_idempotent(p):
    a = extract_springs(p, 0.01).rest_positions
    b = extract_springs(parse_pattern(dump_pattern(p)), 0.01).rest_positions
    np.testing.assert_array_equal(a, b)
    assert a.max() <= 1.0 + 1e-15
