"""P1 Galerkin discretization of the adjoint dynamics in L2.

The weak formulation splits into a pair of forms on piecewise-H1
functions over the disjoint edges:

    b(u, v) = kappa * sum_i sigma_i * integral u' v'      (>= 0, stiffness)
    c(u, v) = sum_i sigma_i * (F[i,L](u) v(L_i) - F[i,R](u) v(R_i))

with F the trace functionals of the graph; c is independent of kappa and
couples only endpoint values.  With M the (unweighted) mass matrix the
semidiscrete dynamics are  M u' = -(B + C) u,  i.e. the generator is
A = -M^{-1} (B + C).

The numerical range of A in the M-inner product gives a growth rate: with
S the symmetric part of B + C, d/dt ||u||_M^2 = -2 u^T S u, so

    gamma = max eig of (-S, M)    ==>    ||u(t)||_M <= e^{gamma t} ||u(0)||_M

holds exactly for the semidiscrete flow.  Restricted to edge-wise
constants, -M^{-1} C followed by edge averaging reproduces the limit
chain generator exactly (endpoint traces of constants are exact).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import _stepping
from .finite_volume import DiscreteGenerator
from .graphs import MetricGraph, Side, require_valid, trace_functionals
from .grids import CELLS, NODES, EdgeGrid


@dataclass
class FemSystem:
    """Assembled P1 matrices: mass M, stiffness B (kappa included),
    endpoint coupling C."""

    graph: MetricGraph
    grid: EdgeGrid
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    coupling: sp.csr_matrix
    kappa: float
    lumped: bool = False

    @property
    def n(self) -> int:
        return self.mass.shape[0]


def assemble_forms(
    graph: MetricGraph, grid: EdgeGrid, kappa: float, lumped: bool = False
) -> FemSystem:
    """Assemble M, B, C on the per-edge node grid (no cross-edge DOFs)."""
    require_valid(graph)
    if grid.n_edges != graph.n_edges or not np.allclose(
        grid.lengths, graph.lengths, rtol=1e-12, atol=0
    ):
        raise ValueError("grid does not match the graph's edges")
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")

    n = grid.total_nodes
    mrows, mcols, mvals = [], [], []
    brows, bcols, bvals = [], [], []
    for i in range(graph.n_edges):
        m = int(grid.cells[i])
        h = grid.widths[i]
        sig = graph.sigmas[i]
        off = int(grid.node_offsets[i])
        for k in range(m):
            a, b = off + k, off + k + 1
            # element stiffness (1/h) [[1,-1],[-1,1]], mass (h/6) [[2,1],[1,2]]
            brows += [a, a, b, b]
            bcols += [a, b, a, b]
            s = kappa * sig / h
            bvals += [s, -s, -s, s]
            mrows += [a, a, b, b]
            mcols += [a, b, a, b]
            mvals += [h / 3.0, h / 6.0, h / 6.0, h / 3.0]
    mass = sp.csr_matrix((mvals, (mrows, mcols)), shape=(n, n))
    stiffness = sp.csr_matrix((bvals, (brows, bcols)), shape=(n, n))
    if lumped:
        mass = sp.diags(np.asarray(mass.sum(axis=1)).ravel()).tocsr()

    # endpoint coupling: C[k, l] = sum_i sigma_i (F[i,L] b_l) b_k(L_i)
    #                              - sigma_i (F[i,R] b_l) b_k(R_i)
    table = trace_functionals(graph)
    end_node = {}
    for j in range(graph.n_edges):
        off = int(grid.node_offsets[j])
        end_node[(j, Side.LEFT)] = off
        end_node[(j, Side.RIGHT)] = off + int(grid.cells[j])
    crows, ccols, cvals = [], [], []
    for i in range(graph.n_edges):
        sig = graph.sigmas[i]
        for side, sign in ((Side.LEFT, 1.0), (Side.RIGHT, -1.0)):
            row = end_node[(i, side)]
            func = table.functional(i, side)
            for j in range(graph.n_edges):
                for s in (Side.LEFT, Side.RIGHT):
                    g = func[j, s.value]
                    if g:
                        crows.append(row)
                        ccols.append(end_node[(j, s)])
                        cvals.append(sign * sig * g)
    coupling = sp.csr_matrix((cvals, (crows, ccols)), shape=(n, n))
    return FemSystem(
        graph=graph,
        grid=grid,
        mass=mass,
        stiffness=stiffness,
        coupling=coupling,
        kappa=kappa,
        lumped=lumped,
    )


def l2_generator(system: FemSystem) -> DiscreteGenerator:
    """Dense A = -M^{-1} (B + C), keeping (M, B + C) for mass-form
    stepping."""
    flux = (system.stiffness + system.coupling).tocsr()
    dense = -scipy.linalg.solve(
        system.mass.toarray(), flux.toarray(), assume_a="pos"
    )
    return DiscreteGenerator(
        matrix=dense,
        weights=system.grid.weights(NODES),
        kappa=system.kappa,
        kind="galerkin_l2",
        grid=system.grid,
        layout=NODES,
        mass=system.mass,
        flux=flux,
    )


def evolve(system: FemSystem, u0, t: float, method: str = "expm", rtol: float = 1e-8) -> np.ndarray:
    """Solve M u' = -(B + C) u to time t."""
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (system.n,):
        raise ValueError(f"u0 must have shape ({system.n},), got {u0.shape}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if method == "expm":
        gen = l2_generator(system)
        return _stepping.expm_apply(gen.matrix, u0, t)
    if method == "cn":
        flux = (system.stiffness + system.coupling).tocsr()
        return _stepping.crank_nicolson(
            system.mass, flux, u0, t, rtol=rtol, weights=system.grid.weights(NODES)
        )
    raise ValueError(f"method must be 'expm' or 'cn', got {method!r}")


def l2_norm(system: FemSystem, u) -> float:
    """Exact L2 norm of the P1 function with nodal values u."""
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(abs(u @ (system.mass @ u))))


def growth_rate(system: FemSystem) -> float:
    """Largest eigenvalue of (-(symmetric part of B + C), M): the sharp
    exponential growth rate of ||u(t)||_M for the semidiscrete flow."""
    flux = (system.stiffness + system.coupling).toarray()
    sym = (flux + flux.T) / 2.0
    vals = scipy.linalg.eigh(
        -sym, system.mass.toarray(), eigvals_only=True,
        subset_by_index=[system.n - 1, system.n - 1],
    )
    return float(vals[0])


def numerical_range_bound(system: FemSystem, samples: int = 256, seed: int = 0):
    """Empirical sectoriality check over random complex states.

    Returns (gamma, worst_ratio) where gamma is the smallest shift making
    |Im a(u)| <= Re a(u) + gamma ||u||_M^2 over the sample and worst_ratio
    the resulting maximal ratio (<= 1 by construction).
    """
    rng = np.random.default_rng(seed)
    flux = (system.stiffness + system.coupling).toarray()
    mass = system.mass.toarray()
    need = 0.0
    data = []
    for _ in range(samples):
        u = rng.standard_normal(system.n) + 1j * rng.standard_normal(system.n)
        au = np.vdot(u, flux @ u)        # a(u, u) = u^H (B + C) u
        nrm = float(np.real(np.vdot(u, mass @ u)))
        data.append((abs(au.imag), au.real, nrm))
        need = max(need, (abs(au.imag) - au.real) / nrm)
    gamma = max(0.0, need)
    worst = max(
        (im / (re + gamma * nrm)) if im > 0 else 0.0 for (im, re, nrm) in data
    )
    return gamma, worst


def interpolate_to_cells(grid: EdgeGrid, u_nodes: np.ndarray) -> np.ndarray:
    """Midpoint values of the P1 function: node-pair averages per cell
    (for comparison against finite-volume cell values)."""
    u_nodes = np.asarray(u_nodes, dtype=float)
    out = np.empty(grid.total_cells)
    for i in range(grid.n_edges):
        nodes = u_nodes[grid.block(i, NODES)]
        out[grid.block(i, CELLS)] = (nodes[:-1] + nodes[1:]) / 2.0
    return out
