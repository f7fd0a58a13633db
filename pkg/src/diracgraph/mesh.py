"""Staggered meshes on metric graphs, discrete fields and quadrature norms.

Every edge ``e`` is split into ``n_e`` cells of width ``h_e = l_e / n_e``.  The
*raw* layout keeps one node array per edge (so a vertex of degree d owns d raw
node values; continuity is imposed later by the constraint basis) and one
midpoint array per edge.  Half-lines are cut at length ``L``; their far node is
marked for a homogeneous Dirichlet condition.

Quadrature
    * trapezoid on nodes for nodal L2 (the weights of the discrete operators),
    * midpoint rule on cells for L^p, with nodal values averaged to the cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, SpacingTooCoarse
from .graph import MetricGraph


@dataclass(frozen=True, eq=False)
class VertexEnd:
    """One edge end sitting at a vertex."""

    edge: int
    end: int  # 0: x = 0, 1: x = length
    node: int  # raw node index of the end node
    near: tuple[int, int]  # raw midpoint indices, nearest first


@dataclass(frozen=True, eq=False)
class Mesh:
    graph: MetricGraph
    h: float
    trunc_length: float
    n_cells: np.ndarray
    spacing: np.ndarray
    lengths: np.ndarray
    node_offset: np.ndarray
    cell_offset: np.ndarray
    node_x: np.ndarray
    node_edge: np.ndarray
    mid_x: np.ndarray
    cell_edge: np.ndarray
    node_weight: np.ndarray
    cell_width: np.ndarray
    core_cells: np.ndarray
    core_nodes: np.ndarray
    far_nodes: np.ndarray
    vertex_ends: dict[str, tuple[VertexEnd, ...]] = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return int(self.node_offset[-1])

    @property
    def n_midpoints(self) -> int:
        return int(self.cell_offset[-1])

    def edge_nodes(self, e: int) -> slice:
        return slice(int(self.node_offset[e]), int(self.node_offset[e + 1]))

    def edge_cells(self, e: int) -> slice:
        return slice(int(self.cell_offset[e]), int(self.cell_offset[e + 1]))

    @cached_property
    def cell_left(self) -> np.ndarray:
        """Raw index of the left node of every cell."""
        return np.concatenate(
            [np.arange(self.node_offset[e], self.node_offset[e + 1] - 1) for e in range(len(self.n_cells))]
        )

    @cached_property
    def constraints(self):
        """Constraint basis with the Kirchhoff-type conditions (cached)."""
        from .operators import constraint_basis

        return constraint_basis(self)

    def total_cell_length(self) -> float:
        return float(np.sum(self.cell_width))


def build_mesh(graph: MetricGraph, h: float, L: float) -> Mesh:
    """Staggered mesh with target spacing ``h``; half-lines truncated at ``L``."""
    if not h > 0:
        raise ValueError("h must be positive")
    if not L > 0:
        raise ValueError("L must be positive")
    lengths = np.array([e.length if e.is_bounded else L for e in graph.edges], dtype=float)
    n_cells = np.maximum(np.rint(lengths / h).astype(int), 1)
    if np.any(n_cells < 2):
        bad = [i for i in range(len(n_cells)) if n_cells[i] < 2]
        raise SpacingTooCoarse(f"edges {bad} would get fewer than 3 nodes at h={h}")
    spacing = lengths / n_cells
    node_offset = np.concatenate([[0], np.cumsum(n_cells + 1)])
    cell_offset = np.concatenate([[0], np.cumsum(n_cells)])

    node_x, node_edge, node_w = [], [], []
    mid_x, cell_edge, cell_w = [], [], []
    for e, (n, he, ell) in enumerate(zip(n_cells, spacing, lengths)):
        x = np.linspace(0.0, ell, n + 1)
        w = np.full(n + 1, he)
        w[0] = w[-1] = 0.5 * he
        node_x.append(x)
        node_w.append(w)
        node_edge.append(np.full(n + 1, e))
        mid_x.append((np.arange(n) + 0.5) * he)
        cell_w.append(np.full(n, he))
        cell_edge.append(np.full(n, e))
    node_edge_arr = np.concatenate(node_edge)
    cell_edge_arr = np.concatenate(cell_edge)
    bounded = np.array([e.is_bounded for e in graph.edges])

    ends: dict[str, list[VertexEnd]] = {v: [] for v in graph.vertices}
    for e, ed in enumerate(graph.edges):
        n0, c0 = int(node_offset[e]), int(cell_offset[e])
        n1, c1 = int(node_offset[e + 1]) - 1, int(cell_offset[e + 1]) - 1
        ends[ed.tail].append(VertexEnd(e, 0, n0, (c0, c0 + 1)))
        if ed.is_bounded:
            ends[ed.head].append(VertexEnd(e, 1, n1, (c1, c1 - 1)))
    far = np.array([int(node_offset[e + 1]) - 1 for e in graph.half_lines], dtype=int)

    return Mesh(
        graph=graph,
        h=float(h),
        trunc_length=float(L),
        n_cells=n_cells,
        spacing=spacing,
        lengths=lengths,
        node_offset=node_offset,
        cell_offset=cell_offset,
        node_x=np.concatenate(node_x),
        node_edge=node_edge_arr,
        mid_x=np.concatenate(mid_x),
        cell_edge=cell_edge_arr,
        node_weight=np.concatenate(node_w),
        cell_width=np.concatenate(cell_w),
        core_cells=bounded[cell_edge_arr],
        core_nodes=bounded[node_edge_arr],
        far_nodes=far,
        vertex_ends={v: tuple(lst) for v, lst in ends.items()},
    )


# ---------------------------------------------------------------------------
# fields

EdgeFunction = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Complex (or real) values on the raw nodes of a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.mesh.n_nodes,):
            raise DimensionMismatch(f"expected {self.mesh.n_nodes} node values, got {self.values.shape}")

    @classmethod
    def from_function(cls, mesh: Mesh, f: EdgeFunction) -> "ScalarField":
        out = []
        for e in range(len(mesh.n_cells)):
            sl = mesh.edge_nodes(e)
            out.append(np.asarray(f(e, mesh.node_x[sl])) * np.ones(sl.stop - sl.start))
        return cls(mesh, np.concatenate(out))

    @classmethod
    def zeros(cls, mesh: Mesh) -> "ScalarField":
        return cls(mesh, np.zeros(mesh.n_nodes))

    def cell_values(self) -> np.ndarray:
        left = self.mesh.cell_left
        return 0.5 * (self.values[left] + self.values[left + 1])

    def cell_magnitude(self) -> np.ndarray:
        return np.abs(self.cell_values())


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Upper component on raw nodes, lower component on raw midpoints."""

    mesh: Mesh
    upper: np.ndarray
    lower: np.ndarray

    def __post_init__(self):
        if self.upper.shape != (self.mesh.n_nodes,) or self.lower.shape != (self.mesh.n_midpoints,):
            raise DimensionMismatch(
                f"expected ({self.mesh.n_nodes},), ({self.mesh.n_midpoints},); "
                f"got {self.upper.shape}, {self.lower.shape}"
            )

    @classmethod
    def from_functions(cls, mesh: Mesh, f1: EdgeFunction, f2: EdgeFunction | None = None) -> "SpinorField":
        up, lo = [], []
        for e in range(len(mesh.n_cells)):
            sl, cl = mesh.edge_nodes(e), mesh.edge_cells(e)
            up.append(np.asarray(f1(e, mesh.node_x[sl])) * np.ones(sl.stop - sl.start))
            if f2 is None:
                lo.append(np.zeros(cl.stop - cl.start))
            else:
                lo.append(np.asarray(f2(e, mesh.mid_x[cl])) * np.ones(cl.stop - cl.start))
        return cls(mesh, np.concatenate(up), np.concatenate(lo))

    @classmethod
    def zeros(cls, mesh: Mesh) -> "SpinorField":
        return cls(mesh, np.zeros(mesh.n_nodes), np.zeros(mesh.n_midpoints))

    def cell_values(self) -> tuple[np.ndarray, np.ndarray]:
        left = self.mesh.cell_left
        return 0.5 * (self.upper[left] + self.upper[left + 1]), self.lower

    def cell_magnitude(self) -> np.ndarray:
        a, b = self.cell_values()
        return np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)


Field = ScalarField | SpinorField


# ---------------------------------------------------------------------------
# norms


def _region_masks(mesh: Mesh, region: str) -> tuple[np.ndarray, np.ndarray]:
    if region == "G":
        return np.ones(mesh.n_nodes, bool), np.ones(mesh.n_midpoints, bool)
    if region == "K":
        return mesh.core_nodes, mesh.core_cells
    raise ValueError(f"region must be 'G' or 'K', got {region!r}")


def _gradient(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Per-cell forward difference of nodal values."""
    left = mesh.cell_left
    return (values[left + 1] - values[left]) / mesh.cell_width


def lp_integral(field: Field, p: float, region: str = "G") -> float:
    """Midpoint-rule value of the integral of |u|^p."""
    _, cmask = _region_masks(field.mesh, region)
    mag = field.cell_magnitude()[cmask]
    return float(np.sum(field.mesh.cell_width[cmask] * mag**p))


def norm(field: Field, which: str = "L2", region: str = "G", p: float | None = None) -> float:
    """Quadrature norm of a field.

    ``which`` is one of ``"L2"``, ``"Lp"`` (needs ``p >= 1``), ``"Linf"`` and
    ``"H1"``; ``region`` is ``"G"`` (whole graph) or ``"K"`` (compact core).
    Spinor H1 uses the staggered derivative of the Dirac discretisation.
    """
    mesh = field.mesh
    nmask, cmask = _region_masks(mesh, region)
    if which == "Lp":
        if p is None or p < 1:
            raise ValueError("Lp norm needs p >= 1")
        return lp_integral(field, p, region) ** (1.0 / p)
    if which == "Linf":
        if isinstance(field, ScalarField):
            vals = np.abs(field.values[nmask])
        else:
            left = mesh.cell_left
            up = np.maximum(np.abs(field.upper[left]), np.abs(field.upper[left + 1]))
            vals = np.sqrt(up**2 + np.abs(field.lower) ** 2)[cmask]
        return float(vals.max()) if vals.size else 0.0
    if which not in ("L2", "H1"):
        raise ValueError(f"unknown norm {which!r}")

    if isinstance(field, ScalarField):
        sq = np.sum(mesh.node_weight[nmask] * np.abs(field.values[nmask]) ** 2)
        if which == "H1":
            grad = _gradient(mesh, field.values)
            sq += np.sum(mesh.cell_width[cmask] * np.abs(grad[cmask]) ** 2)
        return float(np.sqrt(sq))

    sq = np.sum(mesh.node_weight[nmask] * np.abs(field.upper[nmask]) ** 2)
    sq += np.sum(mesh.cell_width[cmask] * np.abs(field.lower[cmask]) ** 2)
    if which == "H1":
        d_up, d_lo = mesh.constraints.spinor_derivative_raw(field)
        sq += np.sum(mesh.cell_width[cmask] * np.abs(d_up[cmask]) ** 2)
        sq += np.sum(mesh.node_weight[nmask] * np.abs(d_lo[nmask]) ** 2)
    return float(np.sqrt(sq))


def support_measure(field: Field, eps: float = 0.0) -> float:
    """Total width of the cells whose midpoint magnitude exceeds ``eps``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    mag = field.cell_magnitude()
    return float(np.sum(field.mesh.cell_width[mag > eps]))
