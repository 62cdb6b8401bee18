"""Mass-exact discretizations of the edge diffusion with membrane fluxes.

Adjoint side (cell-centered finite volume).  On edge i with cell width h,
cell averages evolve by flux differences of kappa * sigma_i * phi'; at
interior faces the gradient is the usual two-point difference, at the
edge ends the exact membrane flux kappa * sigma_i * phi'(end) is replaced
by sigma_i * F[i, side](traces), the trace functionals from the graph.
Endpoint traces come from cell values by

* ``trace_order=1``: nearest cell average (nonnegative stencil, so the
  matrix is Metzler and the semigroup positivity-preserving),
* ``trace_order=2``: linear extrapolation 1.5 v0 - 0.5 v1 (sharper, but
  positivity may fail).

Because fluxes telescope, the weighted row vector w^T A (w = cell widths)
is supported on boundary cells only and its sum over the cells of edge j
is exactly sigma_j (sum_i (l_ji + r_ji) - l_j - r_j): total mass obeys the
same budget as the limit chain and is conserved exactly on conservative
graphs.

Forward side (node-centered finite differences).  Nodal values with the
standard 3-point interior stencil; boundary rows eliminate the ghost node
through the transmission condition kappa f'(end) = G[i, side](endpoint
values), second order.

``duality_defect`` pairs the two: for f satisfying the forward conditions
and phi the adjoint ones, <phi, A f> and <A* phi, f> must approach each
other under refinement (the continuum pairing is an exact identity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial

from .graphs import (
    MetricGraph,
    Side,
    TraceFunctionalTable,
    primal_condition_table,
    require_valid,
    trace_functionals,
)
from .grids import CELLS, NODES, EdgeGrid


@dataclass
class DiscreteGenerator:
    """A matrix realization of one of the generators, with the quadrature
    weights that make <w, u> the discrete integral over the graph."""

    matrix: object            # scipy sparse or dense ndarray; u' = matrix @ u
    weights: np.ndarray
    kappa: float
    kind: str                 # "dual_fv" | "primal_fd" | "galerkin_l2"
    grid: EdgeGrid
    layout: str
    trace_order: int = 0      # dual_fv only
    mass: object = None       # galerkin only: M u' = -flux u
    flux: object = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return np.asarray(self.matrix, dtype=float)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


def _check_assembly_args(graph, grid, kappa):
    require_valid(graph)
    if grid.n_edges != graph.n_edges or not np.allclose(
        grid.lengths, graph.lengths, rtol=1e-12, atol=0
    ):
        raise ValueError("grid does not match the graph's edges")
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")


def _trace_matrix(grid: EdgeGrid, trace_order: int) -> sp.csr_matrix:
    """(2n_edges, total_cells) map from cell values to endpoint traces;
    trace index is 2*edge + side."""
    rows, cols, vals = [], [], []
    for i in range(grid.n_edges):
        first = grid.cell_offsets[i]
        last = grid.cell_offsets[i + 1] - 1
        if trace_order == 1:
            rows += [2 * i, 2 * i + 1]
            cols += [first, last]
            vals += [1.0, 1.0]
        elif trace_order == 2:
            rows += [2 * i, 2 * i, 2 * i + 1, 2 * i + 1]
            cols += [first, first + 1, last, last - 1]
            vals += [1.5, -0.5, 1.5, -0.5]
        else:
            raise ValueError(f"trace_order must be 1 or 2, got {trace_order}")
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(2 * grid.n_edges, grid.total_cells)
    )


def dual_generator(
    graph: MetricGraph, grid: EdgeGrid, kappa: float, trace_order: int = 1
) -> DiscreteGenerator:
    """Finite-volume matrix of the adjoint generator kappa sigma d2/dx2
    with membrane-flux conditions."""
    _check_assembly_args(graph, grid, kappa)
    table = trace_functionals(graph)
    trace = _trace_matrix(grid, trace_order)
    n = grid.total_cells
    rows, cols, vals = [], [], []
    for i in range(graph.n_edges):
        m = int(grid.cells[i])
        h = grid.widths[i]
        sig = graph.sigmas[i]
        off = int(grid.cell_offsets[i])
        c = kappa * sig / h**2
        for k in range(m):
            idx = off + k
            if k > 0:
                rows += [idx, idx]
                cols += [idx - 1, idx]
                vals += [c, -c]
            if k < m - 1:
                rows += [idx, idx]
                cols += [idx + 1, idx]
                vals += [c, -c]
        # membrane fluxes replace the wall fluxes of the two end cells
        for side, cell, sign in ((Side.LEFT, off, -1.0), (Side.RIGHT, off + m - 1, 1.0)):
            func = table.functional(i, side).reshape(-1)  # over trace indices
            for tr_idx in np.nonzero(func)[0]:
                row = trace.getrow(int(tr_idx))
                for col, tval in zip(row.indices, row.data):
                    rows.append(cell)
                    cols.append(int(col))
                    vals.append(sign * sig / h * func[tr_idx] * tval)
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    matrix.sum_duplicates()
    return DiscreteGenerator(
        matrix=matrix,
        weights=grid.weights(CELLS),
        kappa=kappa,
        kind="dual_fv",
        grid=grid,
        layout=CELLS,
        trace_order=trace_order,
    )


def primal_generator(graph: MetricGraph, grid: EdgeGrid, kappa: float) -> DiscreteGenerator:
    """Node-centered finite differences for the forward generator."""
    _check_assembly_args(graph, grid, kappa)
    table = primal_condition_table(graph)
    n = grid.total_nodes
    rows, cols, vals = [], [], []
    # endpoint node index per (edge, side)
    end_node = {}
    for i in range(graph.n_edges):
        off = int(grid.node_offsets[i])
        end_node[(i, Side.LEFT)] = off
        end_node[(i, Side.RIGHT)] = off + int(grid.cells[i])
    for i in range(graph.n_edges):
        m = int(grid.cells[i])
        h = grid.widths[i]
        sig = graph.sigmas[i]
        off = int(grid.node_offsets[i])
        c = kappa * sig / h**2
        for k in range(1, m):
            idx = off + k
            rows += [idx, idx, idx]
            cols += [idx - 1, idx, idx + 1]
            vals += [c, -2.0 * c, c]
        # ghost-node elimination at the two ends:
        #   left:  2c (f1 - f0)       - (2 sigma / h) G[i, LEFT](f)
        #   right: 2c (f_{m-1} - f_m) + (2 sigma / h) G[i, RIGHT](f)
        for side, idx, inner, sign in (
            (Side.LEFT, off, off + 1, -1.0),
            (Side.RIGHT, off + m, off + m - 1, 1.0),
        ):
            rows += [idx, idx]
            cols += [inner, idx]
            vals += [2.0 * c, -2.0 * c]
            func = table.functional(i, side)
            for j in range(graph.n_edges):
                for s in (Side.LEFT, Side.RIGHT):
                    g = func[j, s.value]
                    if g:
                        rows.append(idx)
                        cols.append(end_node[(j, s)])
                        vals.append(sign * 2.0 * sig / h * g)
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    matrix.sum_duplicates()
    return DiscreteGenerator(
        matrix=matrix,
        weights=grid.weights(NODES),
        kappa=kappa,
        kind="primal_fd",
        grid=grid,
        layout=NODES,
    )


def duality_defect(
    graph: MetricGraph,
    grid: EdgeGrid,
    kappa: float,
    f,
    phi,
    trace_order: int = 1,
) -> float:
    """| <phi, A f>_nodes - <A* phi, f>_cells | on matched grids.

    ``f`` and ``phi`` are continuum functions given per edge (callable
    ``(edge, x) -> values`` or a sequence of per-edge callables /
    polynomials); f is sampled on the forward node grid, phi on the
    adjoint cell grid.
    """
    f = _as_edge_callable(f)
    phi = _as_edge_callable(phi)
    forward = primal_generator(graph, grid, kappa)
    adjoint = dual_generator(graph, grid, kappa, trace_order=trace_order)
    f_nodes = grid.sample(f, NODES)
    phi_nodes = grid.sample(phi, NODES)
    f_cells = grid.sample(f, CELLS)
    phi_cells = grid.sample(phi, CELLS)
    pair_forward = float(np.sum(forward.weights * phi_nodes * (forward.matrix @ f_nodes)))
    pair_adjoint = float(np.sum(adjoint.weights * (adjoint.matrix @ phi_cells) * f_cells))
    return abs(pair_forward - pair_adjoint)


def _as_edge_callable(f):
    if callable(f):
        return f
    parts = list(f)

    def call(i, x):
        return np.asarray(parts[i](x), dtype=float)

    return call


# ---------------------------------------------------------------------------
# smooth test functions satisfying the transmission conditions

def _bump_left(d: float) -> Polynomial:
    # value 0 at both ends, slope 1 at 0, slope 0 at d
    return Polynomial([0.0, 1.0, -2.0 / d, 1.0 / d**2])


def _bump_right(d: float) -> Polynomial:
    # value 0 at both ends, slope 0 at 0, slope 1 at d
    return Polynomial([0.0, 0.0, -1.0 / d, 1.0 / d**2])


def _fit_conditions(graph, kappa, polys, table: TraceFunctionalTable):
    """Add cubic bump corrections so the endpoint slopes meet the
    conditions encoded in ``table``; endpoint values are untouched, so the
    slope targets can be read off the uncorrected polynomials."""
    require_valid(graph)
    if len(polys) != graph.n_edges:
        raise ValueError("need one polynomial per edge")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    d = graph.lengths
    ends = np.empty((graph.n_edges, 2))
    for i, p in enumerate(polys):
        ends[i, 0] = p(0.0)
        ends[i, 1] = p(d[i])
    targets = table.apply(ends) / kappa  # required slopes at (edge, side)
    out = []
    for i, p in enumerate(polys):
        dp = p.deriv()
        alpha = targets[i, 0] - dp(0.0)
        beta = targets[i, 1] - dp(d[i])
        out.append(p + alpha * _bump_left(d[i]) + beta * _bump_right(d[i]))
    return out


def with_primal_conditions(graph: MetricGraph, kappa: float, polys):
    """Per-edge polynomials obeying the forward transmission conditions."""
    return _fit_conditions(graph, kappa, polys, primal_condition_table(graph))


def with_dual_conditions(graph: MetricGraph, kappa: float, polys):
    """Per-edge polynomials obeying the adjoint flux conditions."""
    return _fit_conditions(graph, kappa, polys, trace_functionals(graph))


def write_triplets(gen: DiscreteGenerator, fh) -> None:
    """Dump the matrix as 'row col value' lines after a 'rows cols nnz'
    header, for external inspection."""
    matrix = sp.coo_matrix(gen.matrix)
    fh.write(f"{matrix.shape[0]} {matrix.shape[1]} {matrix.nnz}\n")
    order = np.lexsort((matrix.col, matrix.row))
    for k in order:
        fh.write(
            f"{matrix.row[k]} {matrix.col[k]} {format(matrix.data[k], '.17g')}\n"
        )
