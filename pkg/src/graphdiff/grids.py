"""Per-edge 1-d grids and packed grid functions.

Two layouts are used throughout:

* ``"cells"`` -- cell-centered values (finite volume); weights are the
  cell widths, so the weighted sum is the midpoint-rule integral,
* ``"nodes"`` -- nodal values including both endpoints (finite
  differences / P1 elements); weights are composite-trapezoid weights.

Values for all edges are packed into one flat array, edge blocks in edge
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

CELLS = "cells"
NODES = "nodes"
_LAYOUTS = (CELLS, NODES)


@dataclass(frozen=True)
class EdgeGrid:
    """Uniform grid per edge: edge i gets cells[i] >= 2 cells of width
    lengths[i] / cells[i]."""

    lengths: np.ndarray
    cells: np.ndarray

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=float)
        cells = np.asarray(self.cells, dtype=int)
        if lengths.ndim != 1 or lengths.shape != cells.shape:
            raise ValueError("lengths and cells must be 1-d arrays of equal size")
        if np.any(lengths <= 0):
            raise ValueError("edge lengths must be positive")
        if np.any(cells < 2):
            raise ValueError("need at least 2 cells per edge")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cells", cells)

    @property
    def n_edges(self) -> int:
        return len(self.lengths)

    @cached_property
    def widths(self) -> np.ndarray:
        return self.lengths / self.cells

    @cached_property
    def cell_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.cells)])

    @cached_property
    def node_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.cells + 1)])

    @property
    def total_cells(self) -> int:
        return int(self.cell_offsets[-1])

    @property
    def total_nodes(self) -> int:
        return int(self.node_offsets[-1])

    def size(self, layout: str) -> int:
        _check_layout(layout)
        return self.total_cells if layout == CELLS else self.total_nodes

    def block(self, edge: int, layout: str) -> slice:
        """Flat-array slice of one edge's values."""
        _check_layout(layout)
        off = self.cell_offsets if layout == CELLS else self.node_offsets
        return slice(int(off[edge]), int(off[edge + 1]))

    def coords(self, edge: int, layout: str) -> np.ndarray:
        """Local coordinates (0 .. length) of one edge's points."""
        _check_layout(layout)
        m = int(self.cells[edge])
        h = self.widths[edge]
        if layout == CELLS:
            return (np.arange(m) + 0.5) * h
        return np.arange(m + 1) * h

    def weights(self, layout: str) -> np.ndarray:
        """Quadrature weights matching the layout, packed like values."""
        _check_layout(layout)
        out = np.empty(self.size(layout))
        for i in range(self.n_edges):
            h = self.widths[i]
            blk = self.block(i, layout)
            if layout == CELLS:
                out[blk] = h
            else:
                w = np.full(int(self.cells[i]) + 1, h)
                w[0] = w[-1] = h / 2.0
                out[blk] = w
        return out

    def sample(self, f, layout: str) -> np.ndarray:
        """Pack f(edge_index, local_coords) into a flat array."""
        _check_layout(layout)
        out = np.empty(self.size(layout))
        for i in range(self.n_edges):
            blk = self.block(i, layout)
            out[blk] = np.asarray(f(i, self.coords(i, layout)), dtype=float)
        return out


def _check_layout(layout: str):
    if layout not in _LAYOUTS:
        raise ValueError(f"layout must be one of {_LAYOUTS}, got {layout!r}")


def make_grid(graph, target_width: float) -> EdgeGrid:
    """Grid with cell width <= target_width on every edge (>= 2 cells)."""
    if not target_width > 0:
        raise ValueError("target_width must be positive")
    lengths = graph.lengths
    # the -1e-9 guard keeps e.g. ceil(1.0 / 0.005) from rounding to 201
    cells = np.maximum(
        2, [math.ceil(d / target_width - 1e-9) for d in lengths]
    )
    return EdgeGrid(lengths=lengths, cells=np.asarray(cells, dtype=int))


@dataclass
class EdgeFunction:
    """A packed grid function: values on ``grid`` in a given layout."""

    grid: EdgeGrid
    layout: str
    values: np.ndarray

    def __post_init__(self):
        _check_layout(self.layout)
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.size(self.layout)
        if self.values.shape != (expected,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({expected} {self.layout})"
            )

    def weights(self) -> np.ndarray:
        return self.grid.weights(self.layout)

    def edge_values(self, edge: int) -> np.ndarray:
        return self.values[self.grid.block(edge, self.layout)]


def sample_function(grid: EdgeGrid, layout: str, f) -> EdgeFunction:
    return EdgeFunction(grid=grid, layout=layout, values=grid.sample(f, layout))


def lift_constants(grid: EdgeGrid, layout: str, per_edge) -> EdgeFunction:
    """Edge-wise constant grid function from one value per edge."""
    per_edge = np.asarray(per_edge, dtype=float)
    if per_edge.shape != (grid.n_edges,):
        raise ValueError(f"need one value per edge, got shape {per_edge.shape}")
    values = np.empty(grid.size(layout))
    for i in range(grid.n_edges):
        values[grid.block(i, layout)] = per_edge[i]
    return EdgeFunction(grid=grid, layout=layout, values=values)


def edge_indicator(edge: int):
    """Initial-condition helper: 1 on one edge, 0 elsewhere."""

    def f(i, x):
        return np.full_like(np.asarray(x, dtype=float), 1.0 if i == edge else 0.0)

    return f
