"""Metric graphs whose vertices act as semipermeable membranes.

A graph is a finite collection of directed intervals ("edges"); edge ``i``
has length ``d_i``, diffusion coefficient ``sigma_i``, and a left and a
right endpoint attached to named vertices.  Loops are forbidden, parallel
edges are fine.  Each endpoint carries a total permeability (``l`` on the
left, ``r`` on the right) plus sparse pass-through coefficients that say
how much of the flux leaving through that membrane enters each
neighbouring edge.  The membrane is *conservative* at an endpoint when the
pass-through coefficients add up exactly to the total.

Everything downstream (flux conditions, limit chain, discretizations) is
driven by two coefficient tables built here:

* ``trace_functionals``   -- the flux functionals of the adjoint problem,
  expressed over endpoint values of a function on the edges,
* ``primal_condition_table`` -- the analogous table for the forward
  problem's transmission conditions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import NamedTuple

import numpy as np

# slack for comparing permeability sums against their totals
SUM_TOL = 1e-12


class GraphConfigError(ValueError):
    """A config file/dict cannot be turned into a MetricGraph."""


class InvalidGraphError(ValueError):
    """An operation needed a valid graph but validation found problems."""


class Side(Enum):
    LEFT = 0
    RIGHT = 1


class EndpointRef(NamedTuple):
    """One endpoint of one edge; compares equal to a bare (edge, side) pair."""

    edge: int
    side: Side


@dataclass(frozen=True)
class EdgeSpec:
    """A single edge.

    ``l_to`` / ``r_to`` map *target edge ids* to the nonnegative
    pass-through coefficient from this edge's left / right membrane into
    that target.  Missing keys mean zero.
    """

    id: str
    length: float
    sigma: float
    left_vertex: str
    right_vertex: str
    l: float = 0.0
    r: float = 0.0
    l_to: dict = field(default_factory=dict)
    r_to: dict = field(default_factory=dict)

    def total(self, side: Side) -> float:
        return self.l if side is Side.LEFT else self.r

    def coupling(self, side: Side) -> dict:
        return self.l_to if side is Side.LEFT else self.r_to

    def vertex(self, side: Side) -> str:
        return self.left_vertex if side is Side.LEFT else self.right_vertex


@dataclass(frozen=True)
class MetricGraph:
    """Immutable container of edges; derived lookup tables are cached."""

    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_ids(self) -> tuple:
        return tuple(e.id for e in self.edges)

    @cached_property
    def _index(self) -> dict:
        # first occurrence wins; duplicates are a validation problem
        out = {}
        for i, e in enumerate(self.edges):
            out.setdefault(e.id, i)
        return out

    def index_of(self, edge_id: str) -> int:
        try:
            return self._index[edge_id]
        except KeyError:
            raise KeyError(f"unknown edge id {edge_id!r}") from None

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.edges], dtype=float)

    @cached_property
    def sigmas(self) -> np.ndarray:
        return np.array([e.sigma for e in self.edges], dtype=float)

    @cached_property
    def incidence(self) -> dict:
        """vertex name -> tuple of (edge index, Side) touching it."""
        out: dict = {}
        for i, e in enumerate(self.edges):
            out.setdefault(e.left_vertex, []).append((i, Side.LEFT))
            out.setdefault(e.right_vertex, []).append((i, Side.RIGHT))
        return {v: tuple(refs) for v, refs in out.items()}

    def vertex_at(self, ref: EndpointRef) -> str:
        return self.edges[ref.edge].vertex(ref.side)

    def endpoints(self):
        for i in range(self.n_edges):
            yield EndpointRef(i, Side.LEFT)
            yield EndpointRef(i, Side.RIGHT)


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple
    conservative: bool

    @property
    def ok(self) -> bool:
        return not self.problems

    def __str__(self) -> str:
        if self.ok:
            return "valid graph (conservative: %s)" % str(self.conservative).lower()
        return "\n".join(self.problems)


def incident_edges(graph: MetricGraph, at) -> tuple:
    """Edges j != at.edge sharing the vertex of ``at``, with the side of j
    that touches it.  Since loops are forbidden each neighbour shows up
    through exactly one of its endpoints."""
    at = EndpointRef(*at)
    if not 0 <= at.edge < graph.n_edges:
        raise IndexError(f"edge index {at.edge} out of range")
    vertex = graph.vertex_at(at)
    return tuple((j, s) for (j, s) in graph.incidence.get(vertex, ()) if j != at.edge)


def validate(graph: MetricGraph) -> ValidationReport:
    """Check every admissibility rule; collect problems instead of raising.

    The graph is conservative iff it is valid and, at every endpoint, the
    pass-through coefficients sum exactly (to ``SUM_TOL``) to the total
    permeability there.
    """
    problems = []
    if graph.n_edges == 0:
        problems.append("graph has no edges")

    seen = set()
    for e in graph.edges:
        if e.id in seen:
            problems.append(f"duplicate edge id {e.id!r}")
        seen.add(e.id)

    conservative = True
    for i, e in enumerate(graph.edges):
        tag = f"edge {e.id!r}"
        if not (np.isfinite(e.length) and e.length > 0):
            problems.append(f"{tag}: length must be a positive real, got {e.length}")
        if not (np.isfinite(e.sigma) and e.sigma > 0):
            problems.append(f"{tag}: sigma must be a positive real, got {e.sigma}")
        if e.left_vertex == e.right_vertex:
            problems.append(f"{tag}: loop (both endpoints at vertex {e.left_vertex!r})")

        for side in (Side.LEFT, Side.RIGHT):
            name = "l" if side is Side.LEFT else "r"
            total = e.total(side)
            if not (np.isfinite(total) and total >= 0):
                problems.append(f"{tag}: {name} must be nonnegative, got {total}")
                conservative = False
                continue
            coupling = e.coupling(side)
            vertex = e.vertex(side)
            incident_here = {
                j
                for (j, _s) in graph.incidence.get(vertex, ())
                if j != i
            }
            running = 0.0
            for target_id, value in coupling.items():
                if target_id == e.id:
                    problems.append(f"{tag}: {name}_to references itself")
                    continue
                if target_id not in graph._index:
                    problems.append(
                        f"{tag}: {name}_to references unknown edge {target_id!r}"
                    )
                    continue
                if not (np.isfinite(value) and value >= 0):
                    problems.append(
                        f"{tag}: {name}_to[{target_id!r}] must be nonnegative, got {value}"
                    )
                    continue
                j = graph.index_of(target_id)
                if value > 0 and j not in incident_here:
                    problems.append(
                        f"{tag}: {name}_to[{target_id!r}] targets an edge not "
                        f"incident at vertex {vertex!r}"
                    )
                running += value
            tol = SUM_TOL * max(1.0, abs(total))
            if running > total + tol:
                problems.append(
                    f"{tag}: sum of {name}_to coefficients {running!r} exceeds "
                    f"{name} = {total!r}"
                )
            if abs(running - total) > tol:
                conservative = False

    conservative = conservative and not problems
    return ValidationReport(problems=tuple(problems), conservative=conservative)


def require_valid(graph: MetricGraph) -> ValidationReport:
    report = validate(graph)
    if not report.ok:
        raise InvalidGraphError(str(report))
    return report


@dataclass(frozen=True)
class TraceFunctionalTable:
    """Linear functionals over endpoint values.

    ``coeffs[i, side, j, s]`` is the weight the functional attached to
    endpoint (i, side) puts on the value at endpoint (j, s).  ``apply``
    contracts with a table of endpoint values of the same shape (n, 2).
    """

    coeffs: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.coeffs.shape[0]

    def functional(self, edge: int, side: Side) -> np.ndarray:
        return self.coeffs[edge, side.value]

    def apply(self, traces: np.ndarray) -> np.ndarray:
        traces = np.asarray(traces, dtype=float)
        if traces.shape != (self.n_edges, 2):
            raise ValueError(
                f"expected endpoint values of shape {(self.n_edges, 2)}, "
                f"got {traces.shape}"
            )
        return np.einsum("isjt,jt->is", self.coeffs, traces)

    def as_matrix(self) -> np.ndarray:
        """(2n, 2n) matrix over flattened endpoints, index = 2*edge + side."""
        n = self.n_edges
        return self.coeffs.reshape(2 * n, 2 * n)


def trace_functionals(graph: MetricGraph) -> TraceFunctionalTable:
    """Adjoint-side flux functionals F over endpoint values.

    With kappa the speed parameter,

        kappa * phi'(left of i)  = F[i, LEFT](phi)
        kappa * phi'(right of i) = F[i, RIGHT](phi)

    F[i, LEFT]  = l_i phi(L_i) - (1/sigma_i) sum_j sigma_j c_{ji} phi(.)
    F[i, RIGHT] = (1/sigma_i) sum_j sigma_j c_{ji} phi(.) - r_i phi(R_i)

    where the sum runs over neighbours j at the matching vertex and
    c_{ji} is j's pass-through coefficient into i through j's touching
    membrane; phi(.) is evaluated at j's touching endpoint.
    """
    require_valid(graph)
    n = graph.n_edges
    coeffs = np.zeros((n, 2, n, 2))
    for i, e in enumerate(graph.edges):
        coeffs[i, 0, i, 0] += e.l
        coeffs[i, 1, i, 1] -= e.r
        for side in (Side.LEFT, Side.RIGHT):
            sign = -1.0 if side is Side.LEFT else 1.0
            for (j, s) in incident_edges(graph, EndpointRef(i, side)):
                other = graph.edges[j]
                c = other.coupling(s).get(e.id, 0.0)
                if c:
                    coeffs[i, side.value, j, s.value] += (
                        sign * other.sigma * c / e.sigma
                    )
    return TraceFunctionalTable(coeffs=coeffs)


def primal_condition_table(graph: MetricGraph) -> TraceFunctionalTable:
    """Forward-side transmission conditions as endpoint functionals G.

        kappa * f'(left of i)  = G[i, LEFT](f)  = l_i f(L_i) - sum_j l_ij f(.)
        kappa * f'(right of i) = G[i, RIGHT](f) = sum_j r_ij f(.) - r_i f(R_i)

    Here l_ij / r_ij are edge i's own pass-through coefficients and f(.) is
    evaluated at neighbour j's endpoint sitting at the shared vertex.
    """
    require_valid(graph)
    n = graph.n_edges
    coeffs = np.zeros((n, 2, n, 2))
    for i, e in enumerate(graph.edges):
        coeffs[i, 0, i, 0] += e.l
        coeffs[i, 1, i, 1] -= e.r
        for side in (Side.LEFT, Side.RIGHT):
            sign = -1.0 if side is Side.LEFT else 1.0
            coupling = e.coupling(side)
            for (j, s) in incident_edges(graph, EndpointRef(i, side)):
                c = coupling.get(graph.edges[j].id, 0.0)
                if c:
                    coeffs[i, side.value, j, s.value] += sign * c
    return TraceFunctionalTable(coeffs=coeffs)


# ---------------------------------------------------------------------------
# config parsing

_EDGE_KEYS = {
    "id",
    "length",
    "sigma",
    "left_vertex",
    "right_vertex",
    "l",
    "r",
    "l_to",
    "r_to",
}
_REQUIRED_KEYS = {"id", "length", "sigma", "left_vertex", "right_vertex"}


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GraphConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _string(value, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise GraphConfigError(f"{where}: expected a nonempty string, got {value!r}")
    return value


def _coupling(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise GraphConfigError(f"{where}: expected an object, got {value!r}")
    return {
        _string(k, f"{where} key"): _number(v, f"{where}[{k!r}]")
        for k, v in value.items()
    }


def parse_graph(data) -> MetricGraph:
    """Build a MetricGraph from a config dict.

    Only structure and types are enforced here (bad structure exits the
    CLI with code 2); semantic admissibility is ``validate``'s job.
    """
    if not isinstance(data, dict):
        raise GraphConfigError("top level must be an object")
    unknown = set(data) - {"edges"}
    if unknown:
        raise GraphConfigError(f"unknown top-level keys: {sorted(unknown)}")
    raw_edges = data.get("edges")
    if not isinstance(raw_edges, list) or not raw_edges:
        raise GraphConfigError('"edges" must be a nonempty list')

    edges = []
    ids = set()
    for pos, raw in enumerate(raw_edges):
        where = f"edges[{pos}]"
        if not isinstance(raw, dict):
            raise GraphConfigError(f"{where}: expected an object")
        missing = _REQUIRED_KEYS - set(raw)
        if missing:
            raise GraphConfigError(f"{where}: missing keys {sorted(missing)}")
        unknown = set(raw) - _EDGE_KEYS
        if unknown:
            raise GraphConfigError(f"{where}: unknown keys {sorted(unknown)}")
        edge_id = _string(raw["id"], f"{where}.id")
        if edge_id in ids:
            raise GraphConfigError(f"{where}: duplicate edge id {edge_id!r}")
        ids.add(edge_id)
        edges.append(
            EdgeSpec(
                id=edge_id,
                length=_number(raw["length"], f"{where}.length"),
                sigma=_number(raw["sigma"], f"{where}.sigma"),
                left_vertex=_string(raw["left_vertex"], f"{where}.left_vertex"),
                right_vertex=_string(raw["right_vertex"], f"{where}.right_vertex"),
                l=_number(raw.get("l", 0.0), f"{where}.l"),
                r=_number(raw.get("r", 0.0), f"{where}.r"),
                l_to=_coupling(raw.get("l_to", {}), f"{where}.l_to"),
                r_to=_coupling(raw.get("r_to", {}), f"{where}.r_to"),
            )
        )
    return MetricGraph(edges=tuple(edges))


def load_graph(path) -> MetricGraph:
    """Parse a JSON config file into a MetricGraph."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise GraphConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GraphConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_graph(data)
