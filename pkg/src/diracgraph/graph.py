"""Metric graphs with a compact core and finitely many half-lines.

A graph is described by a *GraphSpec*: a JSON-compatible mapping with keys
``vertices`` (list of string ids) and ``edges`` (list of objects with keys
``from``, ``to``, ``length``, ``halfline``).  Half-lines carry only ``from``;
the local coordinate of every edge starts (x = 0) at its ``from`` vertex.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .errors import (
    DanglingEndpoint,
    Disconnected,
    EmptyCompactCore,
    InvalidGraphSpec,
)

_TOP_KEYS = {"vertices", "edges"}
_EDGE_KEYS = {"from", "to", "length", "halfline"}


@dataclass(frozen=True)
class Edge:
    """One edge; ``head`` and ``length`` are None for a half-line."""

    tail: str
    head: str | None
    length: float | None
    halfline: bool = False

    @property
    def is_bounded(self) -> bool:
        return not self.halfline

    def end_vertex(self, end: int) -> str:
        """Vertex at x = 0 (end 0) or x = length (end 1)."""
        if end == 0:
            return self.tail
        if self.halfline:
            raise ValueError("a half-line has no vertex at its far end")
        return self.head  # type: ignore[return-value]


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]

    @property
    def half_line_count(self) -> int:
        return sum(e.halfline for e in self.edges)

    @property
    def core_length(self) -> float:
        return math.fsum(e.length for e in self.edges if e.is_bounded)

    @property
    def bounded_edges(self) -> list[int]:
        return [i for i, e in enumerate(self.edges) if e.is_bounded]

    @property
    def half_lines(self) -> list[int]:
        return [i for i, e in enumerate(self.edges) if e.halfline]

    @property
    def longest_core_edge(self) -> int:
        """Index of the longest bounded edge (first one on ties)."""
        idx = self.bounded_edges
        return max(idx, key=lambda i: (self.edges[i].length, -i))

    def incidence(self) -> dict[str, list[tuple[int, int]]]:
        """Map vertex -> list of (edge index, end) touching it; a loop appears twice."""
        inc: dict[str, list[tuple[int, int]]] = {v: [] for v in self.vertices}
        for i, e in enumerate(self.edges):
            inc[e.tail].append((i, 0))
            if e.is_bounded:
                inc[e.head].append((i, 1))
        return inc

    def degree(self, vertex: str) -> int:
        return len(self.incidence()[vertex])

    def to_spec(self) -> dict[str, Any]:
        edges = []
        for e in self.edges:
            if e.halfline:
                edges.append({"from": e.tail, "halfline": True})
            else:
                edges.append({"from": e.tail, "to": e.head, "length": e.length, "halfline": False})
        return {"vertices": list(self.vertices), "edges": edges}


def _parse_edge(raw: Any, k: int) -> Edge:
    if not isinstance(raw, Mapping):
        raise InvalidGraphSpec(f"edge {k} is not an object")
    unknown = set(raw) - _EDGE_KEYS
    if unknown:
        raise InvalidGraphSpec(f"edge {k}: unknown keys {sorted(unknown)}")
    if "from" not in raw:
        raise InvalidGraphSpec(f"edge {k}: missing 'from'")
    halfline = bool(raw.get("halfline", False))
    tail = str(raw["from"])
    if halfline:
        if "to" in raw or "length" in raw:
            raise InvalidGraphSpec(f"edge {k}: a half-line takes neither 'to' nor 'length'")
        return Edge(tail, None, None, True)
    if "to" not in raw or "length" not in raw:
        raise InvalidGraphSpec(f"edge {k}: a bounded edge needs 'to' and 'length'")
    length = float(raw["length"])
    if not (length > 0 and math.isfinite(length)):
        raise InvalidGraphSpec(f"edge {k}: length must be positive, got {raw['length']!r}")
    return Edge(tail, str(raw["to"]), length, False)


def build_graph(spec: Mapping[str, Any]) -> MetricGraph:
    """Validate a GraphSpec and return the corresponding :class:`MetricGraph`.

    Raises
    ------
    InvalidGraphSpec
        Malformed spec (unknown keys, missing fields, bad lengths).
    DanglingEndpoint
        An edge references a vertex that is not listed.
    EmptyCompactCore
        No bounded edge.
    Disconnected
        The underlying graph is not connected.
    """
    if not isinstance(spec, Mapping):
        raise InvalidGraphSpec("graph spec must be an object")
    unknown = set(spec) - _TOP_KEYS
    if unknown:
        raise InvalidGraphSpec(f"unknown keys {sorted(unknown)}")
    if "vertices" not in spec or "edges" not in spec:
        raise InvalidGraphSpec("graph spec needs 'vertices' and 'edges'")
    vertices = tuple(str(v) for v in spec["vertices"])
    if len(set(vertices)) != len(vertices):
        raise InvalidGraphSpec("duplicate vertex ids")
    if not vertices:
        raise InvalidGraphSpec("graph has no vertices")
    edges = tuple(_parse_edge(raw, k) for k, raw in enumerate(spec["edges"]))

    known = set(vertices)
    for k, e in enumerate(edges):
        for v in (e.tail, e.head):
            if v is not None and v not in known:
                raise DanglingEndpoint(f"edge {k} references unknown vertex {v!r}")

    if not any(e.is_bounded for e in edges):
        raise EmptyCompactCore("graph has no bounded edge")

    adj: dict[str, set[str]] = {v: set() for v in vertices}
    for e in edges:
        if e.is_bounded:
            adj[e.tail].add(e.head)  # type: ignore[arg-type]
            adj[e.head].add(e.tail)  # type: ignore[index]
    seen = {vertices[0]}
    queue = deque([vertices[0]])
    while queue:
        v = queue.popleft()
        for w in adj[v] - seen:
            seen.add(w)
            queue.append(w)
    if seen != known:
        missing = sorted(known - seen)
        raise Disconnected(f"vertices not reachable from {vertices[0]!r}: {missing}")

    return MetricGraph(vertices, edges)


def read_graph_spec(path: str | Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_graph(path: str | Path) -> MetricGraph:
    return build_graph(read_graph_spec(path))


# ---------------------------------------------------------------------------
# stock graphs used by the experiments and tests


def line_graph(length: float = 1.0) -> MetricGraph:
    """One bounded edge with a half-line attached at each end (N = 2)."""
    return build_graph(
        {
            "vertices": ["a", "b"],
            "edges": [
                {"from": "a", "to": "b", "length": length, "halfline": False},
                {"from": "a", "halfline": True},
                {"from": "b", "halfline": True},
            ],
        }
    )


def interval_graph(length: float = 1.0) -> MetricGraph:
    """A single bounded edge and no half-lines (benchmark only)."""
    return build_graph(
        {"vertices": ["a", "b"], "edges": [{"from": "a", "to": "b", "length": length, "halfline": False}]}
    )


def star_graph(lengths=(1.0, 1.0, 1.0)) -> MetricGraph:
    """Compact star; the centre is ``"o"`` and the tips ``"t0"``, ``"t1"``, ..."""
    tips = [f"t{i}" for i in range(len(lengths))]
    return build_graph(
        {
            "vertices": ["o", *tips],
            "edges": [
                {"from": "o", "to": t, "length": float(ell), "halfline": False}
                for t, ell in zip(tips, lengths)
            ],
        }
    )


def figure_graph() -> MetricGraph:
    """Seven bounded edges (one of them a loop), two pendants and three half-lines.

    Lengths follow the drawing in units of three grid steps, the loop being the
    circle of radius 1.5 steps.
    """
    return build_graph(
        {
            "vertices": ["A", "B", "C", "D", "E", "F", "G"],
            "edges": [
                {"from": "A", "to": "D", "length": math.sqrt(2.0), "halfline": False},
                {"from": "A", "to": "B", "length": 1.0, "halfline": False},
                {"from": "C", "to": "D", "length": 1.0, "halfline": False},
                {"from": "D", "to": "F", "length": 1.0, "halfline": False},
                {"from": "D", "to": "G", "length": 1.0, "halfline": False},
                {"from": "E", "to": "F", "length": 1.0, "halfline": False},
                {"from": "G", "to": "G", "length": math.pi, "halfline": False},
                {"from": "A", "halfline": True},
                {"from": "F", "halfline": True},
                {"from": "E", "halfline": True},
            ],
        }
    )


STOCK_GRAPHS = {
    "line": line_graph,
    "interval": interval_graph,
    "star3": star_graph,
    "figure": figure_graph,
}
