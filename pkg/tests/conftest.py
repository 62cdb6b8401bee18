import numpy as np
import pytest

from graphdiff.graphs import EdgeSpec, MetricGraph


@pytest.fixture
def chain_graph():
    """Two edges in a line, fully permeable at the shared vertex."""
    return MetricGraph((
        EdgeSpec(id="E1", length=1.0, sigma=1.0, left_vertex="a", right_vertex="b",
                 r=1.0, r_to={"E2": 1.0}),
        EdgeSpec(id="E2", length=2.0, sigma=1.0, left_vertex="b", right_vertex="c",
                 l=1.0, l_to={"E1": 1.0}),
    ))


def make_star(conservative=True):
    # three edges meeting at "hub"; E1 arrives with its right end, the other
    # two leave with their left ends.  Totals match the pass-through sums
    # exactly in the conservative case; the variant loses 0.2 through E1.
    r_to = {"E2": 0.6, "E3": 0.4} if conservative else {"E2": 0.6, "E3": 0.2}
    return MetricGraph((
        EdgeSpec(id="E1", length=1.0, sigma=1.0, left_vertex="a", right_vertex="hub",
                 r=1.0, r_to=r_to),
        EdgeSpec(id="E2", length=1.0, sigma=0.8, left_vertex="hub", right_vertex="b",
                 l=0.9, l_to={"E1": 0.5, "E3": 0.4}),
        EdgeSpec(id="E3", length=1.0, sigma=1.2, left_vertex="hub", right_vertex="c",
                 l=1.1, l_to={"E1": 0.7, "E2": 0.4}),
    ))


@pytest.fixture
def star_graph():
    return make_star(conservative=True)


@pytest.fixture
def leaky_star_graph():
    return make_star(conservative=False)


@pytest.fixture
def sealed_edge():
    """A single edge with impermeable ends: plain Neumann on (0, 1)."""
    return MetricGraph((
        EdgeSpec(id="I", length=1.0, sigma=1.0, left_vertex="p", right_vertex="q"),
    ))


@pytest.fixture(autouse=True)
def _fixed_numpy_errstate():
    with np.errstate(over="raise", invalid="raise"):
        yield
