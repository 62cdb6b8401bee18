"""The Markov-chain limit on the edge set.

In the fast-diffusion limit a solution flattens on each edge, so the
state space collapses to one number per edge.  This module builds the
projection onto edge-wise averages and the limit generator matrix, in its
two variants:

* ``"dual"``   -- governs the flux (adjoint) dynamics; off-diagonal rate
  into edge i from edge j is sigma_j * (l_ji + r_ji) / d_i,
* ``"primal"`` -- governs the forward dynamics; the rate is
  sigma_i * (l_ij + r_ij) / d_i.

Both share the diagonal -sigma_i * (l_i + r_i) / d_i.  The dual variant
satisfies the weighted column identity

    sum_i d_i q_ij = sigma_j * (sum_{i != j} (l_ji + r_ji) - l_j - r_j),

which is <= 0 and vanishes exactly for conservative graphs; lengths act
as the stationary reference weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graphs import MetricGraph, require_valid
from .grids import EdgeFunction, EdgeGrid, lift_constants

DUAL = "dual"
PRIMAL = "primal"
_VARIANTS = (DUAL, PRIMAL)


@dataclass(frozen=True)
class PiecewiseConstant:
    """One value per edge, normed with the edge lengths as weights."""

    values: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        lengths = np.asarray(self.lengths, dtype=float)
        if values.shape != lengths.shape or values.ndim != 1:
            raise ValueError("values and lengths must be 1-d arrays of equal size")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lengths", lengths)

    def norm_l1(self) -> float:
        return float(np.sum(self.lengths * np.abs(self.values)))

    def norm_l2(self) -> float:
        return float(np.sqrt(np.sum(self.lengths * self.values**2)))

    def mass(self) -> float:
        return float(np.sum(self.lengths * self.values))

    def lift(self, grid: EdgeGrid, layout: str) -> EdgeFunction:
        """Embed back as an edge-wise constant grid function."""
        if grid.n_edges != len(self.values):
            raise ValueError("grid edge count does not match")
        return lift_constants(grid, layout, self.values)


@dataclass(frozen=True)
class GeneratorMatrix:
    """Limit generator with its variant tag and edge metadata."""

    q: np.ndarray
    variant: str
    edge_ids: tuple
    lengths: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0]


def project_averages(phi: EdgeFunction) -> PiecewiseConstant:
    """Average over each edge: the projection onto edge-wise constants."""
    grid = phi.grid
    w = phi.weights()
    values = np.empty(grid.n_edges)
    for i in range(grid.n_edges):
        blk = grid.block(i, phi.layout)
        values[i] = float(np.dot(w[blk], phi.values[blk])) / grid.lengths[i]
    return PiecewiseConstant(values=values, lengths=grid.lengths.copy())


def chain_generator(graph: MetricGraph, variant: str = DUAL) -> GeneratorMatrix:
    """Build the limit generator matrix for a valid graph."""
    if variant not in _VARIANTS:
        raise ValueError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    require_valid(graph)
    n = graph.n_edges
    d = graph.lengths
    sig = graph.sigmas
    q = np.zeros((n, n))
    for i, e in enumerate(graph.edges):
        q[i, i] = -sig[i] * (e.l + e.r) / d[i]
    for j, e in enumerate(graph.edges):
        for target_id, c in list(e.l_to.items()) + list(e.r_to.items()):
            if c == 0.0:
                continue
            i = graph.index_of(target_id)
            if variant == DUAL:
                # rate into i from j, carried by j's diffusion coefficient
                q[i, j] += sig[j] * c / d[i]
            else:
                # forward variant: row j uses edge j's own coefficients
                q[j, i] += sig[j] * c / d[j]
    return GeneratorMatrix(
        q=q, variant=variant, edge_ids=graph.edge_ids, lengths=d.copy()
    )


def propagator(gen: GeneratorMatrix, t: float) -> np.ndarray:
    """exp(t Q) by scaling and squaring."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return np.eye(gen.n)
    return scipy.linalg.expm(t * gen.q)


def mass_rate(gen: GeneratorMatrix) -> np.ndarray:
    """Weighted column sums d^T Q: rate of total-mass change per unit of
    density sitting on each edge.  Zero iff the graph is conservative."""
    if gen.variant != DUAL:
        raise ValueError("mass_rate applies to the dual variant only")
    return gen.lengths @ gen.q


def write_csv(gen_dual: GeneratorMatrix, gen_primal: GeneratorMatrix, fh) -> int:
    """Write both generator variants (plus the dual mass-rate row) as CSV.

    Returns the number of entries where the variants differ.  Layout: one
    header row of edge ids, then per variant one row per edge.
    """
    if gen_dual.edge_ids != gen_primal.edge_ids:
        raise ValueError("variants built from different graphs")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["variant", "edge"] + list(gen_dual.edge_ids))
    for label, gen in ((DUAL, gen_dual), (PRIMAL, gen_primal)):
        for i, edge_id in enumerate(gen.edge_ids):
            writer.writerow([label, edge_id] + [_fmt(x) for x in gen.q[i]])
    writer.writerow(["mass_rate", ""] + [_fmt(x) for x in mass_rate(gen_dual)])
    return int(np.sum(~np.isclose(gen_dual.q, gen_primal.q, rtol=0, atol=0)))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")
