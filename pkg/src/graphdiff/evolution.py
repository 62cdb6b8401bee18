"""Semigroup propagation and the speed-parameter sweep.

``kappa_sweep`` runs the discrete semigroup for a list of kappa values
and times, compares each solution against the lifted limit-chain solution
exp(t Q) P phi0, and reports weighted norms, the mass drift, and the
minimum value.  As kappa grows the error columns must shrink: that
monotone decrease is the headline empirical fact this package exists to
demonstrate.
"""

from __future__ import annotations

import csv
import os
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _stepping, chain, finite_volume, galerkin
from .finite_volume import DiscreteGenerator
from .graphs import MetricGraph, require_valid
from .grids import CELLS, NODES, EdgeFunction, EdgeGrid

Norms = namedtuple("Norms", ["l1", "l2", "min", "mass"])

FV = "fv"
FEM = "fem"
_DISCRETIZATIONS = (FV, FEM)

CSV_COLUMNS = ("kappa", "t", "err_l1", "err_l2", "err_projected", "mass_drift", "min_value")


def norms(values, weights) -> Norms:
    """Weighted L1 and L2 norms, minimum, and signed mass of a packed
    grid function."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ValueError(
            f"values {values.shape} and weights {weights.shape} do not match"
        )
    return Norms(
        l1=float(np.sum(weights * np.abs(values))),
        l2=float(np.sqrt(np.sum(weights * values**2))),
        min=float(np.min(values)),
        mass=float(np.sum(weights * values)),
    )


def propagate(
    gen: DiscreteGenerator, phi0, t: float, method: str = "expm", rtol: float = 1e-8
) -> np.ndarray:
    """Advance phi0 by the semigroup of ``gen`` to time t."""
    phi0 = np.asarray(phi0, dtype=float)
    if phi0.shape != (gen.n,):
        raise ValueError(f"phi0 must have shape ({gen.n},), got {phi0.shape}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if method == "expm":
        return _stepping.expm_apply(gen.matrix, phi0, t)
    if method == "cn":
        if gen.mass is not None:
            mass, stiff = gen.mass, gen.flux
        else:
            mass = sp.eye(gen.n, format="csr")
            stiff = -sp.csr_matrix(gen.matrix)
        return _stepping.crank_nicolson(
            mass, stiff, phi0, t, rtol=rtol, weights=gen.weights
        )
    raise ValueError(f"method must be 'expm' or 'cn', got {method!r}")


@dataclass(frozen=True)
class SweepRecord:
    kappa: float
    t: float
    err_l1: float
    err_l2: float
    err_projected: float
    mass_drift: float
    min_value: float


@dataclass(frozen=True)
class SweepResult:
    records: tuple
    discretization: str

    def errors(self, t: float, metric: str = None) -> np.ndarray:
        """Error column at fixed t, kappa-ordered.  Default metric is the
        discretization's own norm (L1 for fv, L2 for fem)."""
        metric = metric or ("err_l1" if self.discretization == FV else "err_l2")
        rows = sorted(
            (r for r in self.records if r.t == t), key=lambda r: r.kappa
        )
        return np.array([getattr(r, metric) for r in rows])

    def times(self):
        return sorted({r.t for r in self.records})

    def errors_nonincreasing(self, metric: str = None, slack: float = 1e-12) -> bool:
        """Does the error shrink (weakly) along kappa for every t?"""
        for t in self.times():
            e = self.errors(t, metric)
            if np.any(e[1:] > e[:-1] + slack * (1.0 + e[:-1])):
                return False
        return True

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in sorted(self.records, key=lambda r: (r.kappa, r.t)):
            writer.writerow(
                [
                    _fmt(r.kappa),
                    _fmt(r.t),
                    _fmt(r.err_l1),
                    _fmt(r.err_l2),
                    _fmt(r.err_projected),
                    _fmt(r.mass_drift),
                    _fmt(r.min_value),
                ]
            )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def default_thread_count() -> int:
    """Sweep parallelism cap from GRAPHDIFF_THREADS (default: serial).

    Unset or empty means 1; anything else must be a positive integer --
    silently ignoring a typo here would mask a deliberate setting.
    """
    raw = os.environ.get("GRAPHDIFF_THREADS", "").strip()
    if not raw:
        return 1
    count = int(raw)   # let a malformed value raise
    if count < 1:
        raise ValueError(f"GRAPHDIFF_THREADS must be >= 1, got {raw!r}")
    return count


def kappa_sweep(
    graph: MetricGraph,
    grid: EdgeGrid,
    kappas,
    ts,
    phi0,
    discretization: str = FV,
    trace_order: int = 1,
    method: str = "expm",
    rtol: float = 1e-8,
    max_workers: int = 1,
) -> SweepResult:
    """Propagate phi0 for every (kappa, t) and measure the distance to the
    lifted limit-chain solution.

    ``phi0`` is a per-edge callable ``(edge, x) -> values`` (see
    ``grids.edge_indicator``); it is sampled on the discretization's own
    grid.  Kappa values must be positive and strictly increasing, times
    nonnegative.
    """
    require_valid(graph)
    if discretization not in _DISCRETIZATIONS:
        raise ValueError(
            f"discretization must be one of {_DISCRETIZATIONS}, got {discretization!r}"
        )
    kappas = [float(k) for k in kappas]
    ts = [float(t) for t in ts]
    if not kappas or any(k <= 0 for k in kappas):
        raise ValueError("kappa list must be nonempty and positive")
    if any(k2 <= k1 for k1, k2 in zip(kappas[:-1], kappas[1:])):
        raise ValueError("kappa list must be strictly increasing")
    if not ts or any(t < 0 for t in ts):
        raise ValueError("t list must be nonempty and nonnegative")

    gen_q = chain.chain_generator(graph, chain.DUAL)

    if discretization == FV:
        layout = CELLS
        assemble = lambda k: finite_volume.dual_generator(
            graph, grid, k, trace_order=trace_order
        )
    else:
        layout = NODES
        assemble = lambda k: galerkin.l2_generator(
            galerkin.assemble_forms(graph, grid, k)
        )

    start = grid.sample(phi0, layout)
    weights = grid.weights(layout)
    projected0 = chain.project_averages(
        EdgeFunction(grid=grid, layout=layout, values=start)
    )
    mass0 = float(np.sum(weights * start))

    def run_one(kappa: float):
        gen = assemble(kappa)
        out = []
        for t in ts:
            sol = propagate(gen, start, t, method=method, rtol=rtol)
            limit_vec = chain.propagator(gen_q, t) @ projected0.values
            limit = chain.PiecewiseConstant(
                values=limit_vec, lengths=grid.lengths
            ).lift(grid, layout)
            diff = sol - limit.values
            err = norms(diff, weights)
            # distance between the two chain states, in the sweep's norm
            ps = chain.project_averages(
                EdgeFunction(grid=grid, layout=layout, values=sol)
            )
            pdiff = chain.PiecewiseConstant(
                values=ps.values - limit_vec, lengths=grid.lengths
            )
            err_projected = (
                pdiff.norm_l1() if discretization == FV else pdiff.norm_l2()
            )
            out.append(
                SweepRecord(
                    kappa=kappa,
                    t=t,
                    err_l1=err.l1,
                    err_l2=err.l2,
                    err_projected=err_projected,
                    mass_drift=float(np.sum(weights * sol)) - mass0,
                    min_value=float(np.min(sol)),
                )
            )
        return out

    records = []
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for chunk in pool.map(run_one, kappas):
                records.extend(chunk)
    else:
        for kappa in kappas:
            records.extend(run_one(kappa))
    records.sort(key=lambda r: (r.kappa, r.t))
    return SweepResult(records=tuple(records), discretization=discretization)
