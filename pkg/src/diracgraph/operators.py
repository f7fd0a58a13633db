"""Discrete Dirac and Kirchhoff-Schroedinger operators on a staggered mesh.

Reduced coordinates
-------------------
Raw nodal values ``r1`` and midpoint values ``r2`` are first scaled by the
square roots of their quadrature weights, so the Euclidean norm of the scaled
vector is the discrete L2 norm.  The vertex conditions are then imposed by
elimination: :class:`ConstraintBasis` holds orthonormal bases ``Q1`` (upper
component: continuity at vertices, Dirichlet at truncation ends) and ``Q2``
(lower component: zero signed sum of the extrapolated traces).  A reduced
spinor is ``y = (y1, y2)`` with ``r1 = W1^{-1/2} Q1 y1`` and likewise for ``y2``.

Lower-component convention
--------------------------
Spinors are stored with the lower component rotated by a phase,
``u2 = i * v``.  In these variables the Dirac operator
``-i c sigma1 d/dx + m c^2 sigma3`` becomes the real symmetric matrix::

    S = [[ m c^2 I,  -c B^T ],
         [ -c B   , -m c^2 I]]

with ``B = Q2^T G Q1`` the staggered node-to-midpoint derivative.  Hence
``S^2 = diag(m^2 c^4 + c^2 B^T B, m^2 c^4 + c^2 B B^T)`` and every eigenvalue
satisfies ``|nu| >= m c^2`` exactly, while real vectors give the real ansatz
(``u1`` real, ``u2`` purely imaginary).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, RankDeficiency
from .mesh import Mesh, ScalarField, SpinorField

# one-sided second-order extrapolation of midpoint values to the edge end
_EXTRAP = (1.5, -0.5)


def _gradient_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Raw forward differences: midpoints x nodes."""
    left = mesh.cell_left
    inv_h = 1.0 / mesh.cell_width
    rows = np.concatenate([np.arange(mesh.n_midpoints)] * 2)
    cols = np.concatenate([left, left + 1])
    vals = np.concatenate([-inv_h, inv_h])
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_midpoints, mesh.n_nodes))


def _average_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Raw node-to-midpoint averaging."""
    left = mesh.cell_left
    rows = np.concatenate([np.arange(mesh.n_midpoints)] * 2)
    cols = np.concatenate([left, left + 1])
    vals = np.full(2 * mesh.n_midpoints, 0.5)
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_midpoints, mesh.n_nodes))


@dataclass(frozen=True, eq=False)
class ConstraintBasis:
    mesh: Mesh
    dirichlet: tuple[str, ...]
    Q1: sp.csc_matrix
    Q2: sp.csc_matrix
    lower: str = "strong"

    @property
    def n1(self) -> int:
        return self.Q1.shape[1]

    @property
    def n2(self) -> int:
        return self.Q2.shape[1]

    @property
    def dim(self) -> int:
        return self.n1 + self.n2

    # reduced <-> raw maps
    @cached_property
    def T1(self) -> sp.csr_matrix:
        return sp.csr_matrix(sp.diags(1.0 / np.sqrt(self.mesh.node_weight)) @ self.Q1)

    @cached_property
    def T2(self) -> sp.csr_matrix:
        return sp.csr_matrix(sp.diags(1.0 / np.sqrt(self.mesh.cell_width)) @ self.Q2)

    @cached_property
    def R1(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.Q1.T @ sp.diags(np.sqrt(self.mesh.node_weight)))

    @cached_property
    def R2(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.Q2.T @ sp.diags(np.sqrt(self.mesh.cell_width)))

    @cached_property
    def scaled_gradient(self) -> sp.csr_matrix:
        """Node-to-midpoint derivative from reduced upper DOFs to scaled raw midpoints."""
        G = _gradient_matrix(self.mesh)
        return sp.csr_matrix(sp.diags(np.sqrt(self.mesh.cell_width)) @ G @ self.T1)

    @cached_property
    def B(self) -> sp.csr_matrix:
        """Reduced staggered derivative (n2 x n1)."""
        return sp.csr_matrix(self.Q2.T @ self.scaled_gradient)

    def reduce_scalar(self, field: ScalarField) -> np.ndarray:
        return self.R1 @ field.values

    def expand_scalar(self, y1: np.ndarray) -> ScalarField:
        if y1.shape != (self.n1,):
            raise DimensionMismatch(f"expected {self.n1} reduced values, got {y1.shape}")
        return ScalarField(self.mesh, self.T1 @ y1)

    def reduce_spinor(self, field: SpinorField) -> np.ndarray:
        return np.concatenate([self.R1 @ field.upper, self.R2 @ field.lower])

    def expand_spinor(self, y: np.ndarray) -> SpinorField:
        if y.shape != (self.dim,):
            raise DimensionMismatch(f"expected {self.dim} reduced values, got {y.shape}")
        return SpinorField(self.mesh, self.T1 @ y[: self.n1], self.T2 @ y[self.n1 :])

    def spinor_derivative(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Staggered derivative of a reduced spinor, returned in reduced coordinates.

        The upper derivative lives in the lower-component space and vice versa;
        these are exactly the pieces of ``S`` so that
        ``|S y|^2 = c^2 |y'|^2 + m^2 c^4 |y|^2``.
        """
        y1, y2 = y[: self.n1], y[self.n1 :]
        return self.B @ y1, -(self.B.T @ y2)

    def spinor_derivative_raw(self, field: SpinorField) -> tuple[np.ndarray, np.ndarray]:
        d1, d2 = self.spinor_derivative(self.reduce_spinor(field))
        return self.T2 @ d1, self.T1 @ d2

    def constraint_residuals(self, field: SpinorField) -> tuple[float, float]:
        """Max violation of upper continuity and of the lower signed-sum rule."""
        cont = 0.0
        flux = 0.0
        for v, ends in self.mesh.vertex_ends.items():
            vals = np.array([field.upper[e.node] for e in ends])
            cont = max(cont, float(np.max(np.abs(vals - vals[0]))))
            if v in self.dirichlet or not ends:
                continue
            s = 0.0
            for e in ends:
                sign = 1.0 if e.end == 0 else -1.0
                s += sign * (_EXTRAP[0] * field.lower[e.near[0]] + _EXTRAP[1] * field.lower[e.near[1]])
            flux = max(flux, abs(s))
        return cont, flux


def _upper_basis(mesh: Mesh, dirichlet: set[str]) -> sp.csc_matrix:
    sw = np.sqrt(mesh.node_weight)
    removed = np.zeros(mesh.n_nodes, bool)
    removed[mesh.far_nodes] = True
    columns: list[tuple[int, list[int], list[float]]] = []
    for v, ends in mesh.vertex_ends.items():
        nodes = [e.node for e in ends]
        removed[nodes] = True
        if v in dirichlet:
            continue
        w = sw[nodes]
        columns.append((min(nodes), nodes, list(w / np.linalg.norm(w))))
    for i in np.flatnonzero(~removed):
        columns.append((int(i), [int(i)], [1.0]))
    columns.sort(key=lambda t: t[0])
    rows, cols, vals = [], [], []
    for j, (_, nodes, ws) in enumerate(columns):
        rows += nodes
        cols += [j] * len(nodes)
        vals += ws
    return sp.csc_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, len(columns)))


def _lower_basis(mesh: Mesh, dirichlet: set[str], rank_tol: float) -> sp.csc_matrix:
    sw = np.sqrt(mesh.cell_width)
    # one constraint row per (non-Dirichlet) vertex, in scaled coordinates
    rows: list[dict[int, float]] = []
    for v, ends in mesh.vertex_ends.items():
        if v in dirichlet or not ends:
            continue
        row: dict[int, float] = {}
        for e in ends:
            sign = 1.0 if e.end == 0 else -1.0
            for coef, c in zip(_EXTRAP, e.near):
                row[c] = row.get(c, 0.0) + sign * coef / sw[c]
        rows.append(row)

    # group rows that share midpoints so each null space stays local
    parent = list(range(len(rows)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[int, int] = {}
    for i, row in enumerate(rows):
        for c in row:
            if c in owner:
                parent[find(i)] = find(owner[c])
            else:
                owner[c] = i
    groups: dict[int, list[int]] = {}
    for i in range(len(rows)):
        groups.setdefault(find(i), []).append(i)

    touched = np.zeros(mesh.n_midpoints, bool)
    columns: list[tuple[int, np.ndarray, np.ndarray]] = []
    for members in groups.values():
        cells = sorted({c for i in members for c in rows[i]})
        C = np.zeros((len(members), len(cells)))
        pos = {c: k for k, c in enumerate(cells)}
        for r, i in enumerate(members):
            for c, val in rows[i].items():
                C[r, pos[c]] = val
        _, s, vt = np.linalg.svd(C)
        if s[-1] <= rank_tol * s[0]:
            raise RankDeficiency(
                f"vertex constraints on midpoints {cells} are dependent (sigma_min/sigma_max={s[-1] / s[0]:.2e})"
            )
        null = vt[len(members) :].T
        cells_arr = np.array(cells)
        touched[cells_arr] = True
        for k in range(null.shape[1]):
            col = null[:, k]
            keep = np.abs(col) > 1e-15
            columns.append((int(cells_arr[keep].min()), cells_arr[keep], col[keep]))
    for c in np.flatnonzero(~touched):
        columns.append((int(c), np.array([c]), np.array([1.0])))
    columns.sort(key=lambda t: t[0])
    r_idx = np.concatenate([t[1] for t in columns])
    c_idx = np.concatenate([np.full(len(t[1]), j) for j, t in enumerate(columns)])
    vals = np.concatenate([t[2] for t in columns])
    return sp.csc_matrix((vals, (r_idx, c_idx)), shape=(mesh.n_midpoints, len(columns)))


def constraint_basis(mesh: Mesh, dirichlet=(), rank_tol: float = 1e-10, lower: str = "strong") -> ConstraintBasis:
    """Orthonormal bases of the raw DOF vectors obeying the vertex conditions.

    ``dirichlet`` lists vertices where the upper component is set to zero
    instead (used for benchmark problems on compact graphs).

    ``lower="strong"`` eliminates the signed-sum rule for the lower component.
    Every vertex then contributes one kernel vector to ``B`` (the rule's normal
    is the staggered gradient of a two-node pattern at the vertex), i.e. a mode
    at exactly ``+-m c^2``.  ``lower="natural"`` leaves the midpoints free; the
    rule then holds weakly, to first order in ``h``, and ``B^T B`` coincides with
    the Kirchhoff stiffness.
    """
    if lower not in ("strong", "natural"):
        raise ValueError("lower must be 'strong' or 'natural'")
    dset = set(dirichlet)
    unknown = dset - set(mesh.graph.vertices)
    if unknown:
        raise ValueError(f"unknown Dirichlet vertices {sorted(unknown)}")
    return ConstraintBasis(
        mesh=mesh,
        dirichlet=tuple(sorted(dset)),
        Q1=_upper_basis(mesh, dset),
        Q2=_lower_basis(mesh, dset, rank_tol) if lower == "strong" else sp.identity(mesh.n_midpoints, format="csc"),
        lower=lower,
    )


@dataclass(frozen=True, eq=False)
class DiracOperator:
    """Reduced Dirac matrix in the rotated (real) variables, see module docstring."""

    mesh: Mesh
    basis: ConstraintBasis
    m: float
    c: float
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n1(self) -> int:
        return self.basis.n1

    @property
    def rest_energy(self) -> float:
        return self.m * self.c**2

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def physical_matrix(self) -> sp.csr_matrix:
        """Complex Hermitian matrix acting on (u1, u2) with ``u2`` unrotated."""
        n1, n2 = self.basis.n1, self.basis.n2
        U = sp.diags(np.concatenate([np.ones(n1), 1j * np.ones(n2)]))
        return sp.csr_matrix(U @ self.matrix @ U.conj().T)

    def derivative_sq(self, y: np.ndarray) -> float:
        d1, d2 = self.basis.spinor_derivative(y)
        return float(np.vdot(d1, d1).real + np.vdot(d2, d2).real)

    def squared_norm(self, y: np.ndarray) -> float:
        """``|D y|^2`` in the reduced (L2) inner product."""
        z = self.matrix @ y
        return float(np.vdot(z, z).real)


def assemble_dirac(mesh: Mesh, basis: ConstraintBasis | None, m: float, c: float) -> DiracOperator:
    if not (m > 0 and c > 0):
        raise ValueError("m and c must be positive")
    basis = mesh.constraints if basis is None else basis
    B = basis.B
    mc2 = m * c * c
    n1, n2 = basis.n1, basis.n2
    S = sp.bmat(
        [[mc2 * sp.identity(n1), -c * B.T], [-c * B, -mc2 * sp.identity(n2)]],
        format="csr",
    )
    return DiracOperator(mesh, basis, float(m), float(c), S)


@dataclass(frozen=True, eq=False)
class SchrodingerOperator:
    """Kirchhoff Laplacian ``-d^2/dx^2`` in reduced nodal coordinates."""

    mesh: Mesh
    basis: ConstraintBasis
    stiffness: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.stiffness.shape[0]

    @property
    def mass(self) -> sp.csr_matrix:
        # reduced coordinates are L2-orthonormal
        return sp.identity(self.dim, format="csr")

    @property
    def matrix(self) -> sp.csr_matrix:
        return self.stiffness

    def dirichlet_energy(self, y: np.ndarray) -> float:
        """``|g'|^2`` for a reduced nodal vector."""
        d = self.basis.scaled_gradient @ y
        return float(np.vdot(d, d).real)


def assemble_schrodinger(mesh: Mesh, dirichlet=()) -> SchrodingerOperator:
    basis = mesh.constraints if not dirichlet else constraint_basis(mesh, dirichlet)
    Gs = basis.scaled_gradient
    return SchrodingerOperator(mesh, basis, sp.csr_matrix(Gs.T @ Gs))


def apply(op: DiracOperator | SchrodingerOperator, y: np.ndarray) -> np.ndarray:
    """Matrix-vector product in reduced coordinates."""
    y = np.asarray(y)
    if y.shape != (op.dim,):
        raise DimensionMismatch(f"operator has dimension {op.dim}, vector has shape {y.shape}")
    return op.matrix @ y


# ---------------------------------------------------------------------------
# localized nonlinearity  Psi(u) = (1/p) * int_K |u|^p  (midpoint rule)


class CoreNonlinearity:
    """Value, gradient and Hessian of ``(1/p) int_K |u|^p`` in reduced coordinates.

    ``kind`` is ``"spinor"`` (reduced vectors of length ``basis.dim``) or
    ``"scalar"`` (length ``basis.n1``).  Gradients are taken with respect to
    the reduced (L2) inner product, so ``<grad(y), y> = int_K |u|^p`` exactly.
    """

    def __init__(self, basis: ConstraintBasis, p: float, kind: str = "spinor"):
        if kind not in ("spinor", "scalar"):
            raise ValueError("kind must be 'spinor' or 'scalar'")
        self.basis = basis
        self.p = float(p)
        self.kind = kind
        mesh = basis.mesh
        core = np.flatnonzero(mesh.core_cells)
        self.width = mesh.cell_width[core]
        avg = _average_matrix(mesh)[core]
        A_up = sp.csr_matrix(avg @ basis.T1)
        if kind == "spinor":
            A_lo = sp.csr_matrix(basis.T2[core])
            n2 = basis.n2
            self.A_up = sp.hstack([A_up, sp.csr_matrix((len(core), n2))], format="csr")
            self.A_lo = sp.hstack([sp.csr_matrix((len(core), basis.n1)), A_lo], format="csr")
        else:
            self.A_up = A_up
            self.A_lo = None

    def cell_components(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        a = self.A_up @ y
        b = None if self.A_lo is None else self.A_lo @ y
        return a, b

    def _modulus_sq(self, a, b):
        r2 = np.abs(a) ** 2
        if b is not None:
            r2 = r2 + np.abs(b) ** 2
        return r2

    def integral(self, y: np.ndarray, power: float | None = None) -> float:
        """Midpoint value of ``int_K |u|^power`` (default ``p``)."""
        q = self.p if power is None else power
        a, b = self.cell_components(y)
        return float(np.sum(self.width * self._modulus_sq(a, b) ** (q / 2)))

    def value(self, y: np.ndarray) -> float:
        return self.integral(y) / self.p

    def gradient(self, y: np.ndarray) -> np.ndarray:
        a, b = self.cell_components(y)
        wr = self.width * self._modulus_sq(a, b) ** ((self.p - 2) / 2)
        g = self.A_up.T @ (wr * a)
        if b is not None:
            g = g + self.A_lo.T @ (wr * b)
        return g

    def hessian(self, y: np.ndarray) -> sp.csr_matrix:
        """Real Hessian; valid for real ``y``."""
        a, b = self.cell_components(y)
        a = np.real(a)
        r2 = self._modulus_sq(a, None if b is None else np.real(b))
        r = np.sqrt(r2)
        base = self.width * r ** (self.p - 2)
        safe = np.where(r > 0, r, 1.0)
        ua = np.where(r > 0, a / safe, 0.0)
        extra = (self.p - 2) * base
        H = self.A_up.T @ sp.diags(base + extra * ua * ua) @ self.A_up
        if b is not None:
            ub = np.where(r > 0, np.real(b) / safe, 0.0)
            cross = sp.diags(extra * ua * ub)
            H = H + self.A_up.T @ cross @ self.A_lo + self.A_lo.T @ cross @ self.A_up
            H = H + self.A_lo.T @ sp.diags(base + extra * ub * ub) @ self.A_lo
        return sp.csr_matrix(H)
