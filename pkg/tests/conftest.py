from pathlib import Path

import pytest

from smocksim.pattern import Pattern, StitchPath, load_pattern

DATA = Path(__file__).parent / "data"

# small hand-built patterns (at most 9 vertices) shared by several suites
TINY = {
    "edge2x2": Pattern(2, 2, [StitchPath([(0, 0), (0, 1)])]),
    "diag2x2": Pattern(2, 2, [StitchPath([(0, 0), (1, 1)])]),
    "row2x3": Pattern(2, 3, [StitchPath([(0, 0), (0, 2)])]),
    "zig3x3": Pattern(3, 3, [StitchPath([(0, 0), (1, 1), (0, 2)])]),
    "two3x3": Pattern(3, 3, [StitchPath([(0, 0), (0, 2)]), StitchPath([(2, 0), (2, 2)], "back")]),
    "long3x3": Pattern(3, 3, [StitchPath([(0, 0), (2, 2)])]),
    "vert3x2": Pattern(3, 2, [StitchPath([(0, 0), (2, 1)])]),
}


@pytest.fixture(scope="session")
def multirow():
    """16x19 ten-row pattern with the vertex counts of the multi-row example."""
    return load_pattern(DATA / "multirow.json")
