import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rwde.digraph import WeightedDigraph

PAPER_ALPHA = (0.5, 0.2, 0.1, 0.1)


@pytest.fixture
def two_cycle():
    """o <-> x cycle (weight 1 each) with exits to the cemetery (0.5 each);
    min beta at o is 1.0, attained by the cycle."""
    return WeightedDigraph(
        "∂",
        ["o", "x"],
        [("o", "x", 1.0), ("x", "o", 1.0), ("o", "∂", 0.5), ("x", "∂", 0.5)],
    )


@pytest.fixture
def two_cycle_15():
    """Same shape with exits 0.75: min beta 1.5."""
    return WeightedDigraph(
        "∂",
        ["o", "x"],
        [("o", "x", 1.0), ("x", "o", 1.0), ("o", "∂", 0.75), ("x", "∂", 0.75)],
    )


@pytest.fixture
def loop_graph():
    """Loop at o (weight 1) plus exit o -> cemetery (0.4)."""
    return WeightedDigraph("∂", ["o"], [("o", "o", 1.0), ("o", "∂", 0.4)])


@pytest.fixture
def quotient_example():
    """The contraction example: contracting {(o,x),(x,o)} leaves two parallel
    edges to y, one edge to the cemetery, and y's own exit."""
    return WeightedDigraph(
        "∂",
        ["o", "x", "y"],
        [
            ("o", "x", 1.0),
            ("x", "o", 1.0),
            ("o", "y", 0.4),
            ("x", "y", 0.3),
            ("y", "∂", 1.0),
            ("o", "∂", 0.3),
        ],
    )


@pytest.fixture
def contraction_fixture():
    """4-vertex contraction fixture with a return edge y -> o, so the
    quotient still contains strongly connected sets through the new vertex."""
    return WeightedDigraph(
        "∂",
        ["o", "x", "y"],
        [
            ("o", "x", 1.0),
            ("x", "o", 1.0),
            ("o", "y", 0.4),
            ("x", "y", 0.3),
            ("y", "o", 0.8),
            ("y", "∂", 1.0),
            ("o", "∂", 0.3),
        ],
    )
