import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from oracles import star_dirichlet_eigenvalues

from diracgraph import (
    CoreNonlinearity,
    ScalarField,
    apply,
    assemble_dirac,
    assemble_schrodinger,
    build_mesh,
    constraint_basis,
    figure_graph,
    interval_graph,
    line_graph,
    star_graph,
)
from diracgraph.errors import DimensionMismatch


@pytest.fixture(scope="module")
def fig_mesh():
    return build_mesh(figure_graph(), 0.05, 1.5)


def random_reduced(basis, rng):
    return rng.standard_normal(basis.dim)


# ---------------------------------------------------------------------------
# constraint basis


def test_single_edge_lower_trace_conditions():
    mesh = build_mesh(interval_graph(1.0), 0.01, 1.0)
    b = mesh.constraints
    # one signed-sum row per endpoint, each a single-edge trace
    assert b.n2 == mesh.n_midpoints - 2
    assert b.n1 == mesh.n_nodes
    rng = np.random.default_rng(0)
    u = b.expand_spinor(random_reduced(b, rng))
    lo = u.lower
    assert abs(1.5 * lo[0] - 0.5 * lo[1]) < 1e-12
    assert abs(1.5 * lo[-1] - 0.5 * lo[-2]) < 1e-12


def test_degree_three_vertex_counting():
    mesh = build_mesh(star_graph(), 0.05, 1.0)
    assert mesh.constraints.n1 == mesh.n_nodes - 2


@pytest.mark.parametrize("lower", ["strong", "natural"])
def test_orthonormal_and_constraints_exact(fig_mesh, lower):
    b = constraint_basis(fig_mesh, lower=lower)
    for Q in (b.Q1, b.Q2):
        G = (Q.T @ Q).toarray()
        assert np.max(np.abs(G - np.eye(G.shape[0]))) < 1e-12
    rng = np.random.default_rng(1)
    cont, flux = b.constraint_residuals(b.expand_spinor(random_reduced(b, rng)))
    assert cont < 1e-12
    if lower == "strong":
        assert flux < 1e-12


def test_far_ends_are_dirichlet():
    mesh = build_mesh(line_graph(), 0.05, 2.0)
    b = mesh.constraints
    u = b.expand_spinor(np.random.default_rng(2).standard_normal(b.dim))
    assert np.all(u.upper[mesh.far_nodes] == 0)


def test_reduce_expand_round_trip(fig_mesh):
    b = fig_mesh.constraints
    y = np.random.default_rng(3).standard_normal(b.dim)
    assert np.allclose(b.reduce_spinor(b.expand_spinor(y)), y, atol=1e-12)


def test_expand_dimension_checked(fig_mesh):
    with pytest.raises(DimensionMismatch):
        fig_mesh.constraints.expand_spinor(np.zeros(3))
    with pytest.raises(ValueError):
        constraint_basis(fig_mesh, lower="weak")


# ---------------------------------------------------------------------------
# Dirac operator


@pytest.mark.parametrize("c", [1.0, 10.0, 100.0])
def test_dirac_hermitian_and_identity(fig_mesh, c):
    op = assemble_dirac(fig_mesh, None, 1.0, c)
    S = op.matrix
    assert spla.norm(S - S.T) <= 1e-12 * spla.norm(S)
    P = op.physical_matrix()
    assert spla.norm(P - P.conj().T) <= 1e-12 * spla.norm(P)
    rng = np.random.default_rng(4)
    for _ in range(20):
        y = rng.standard_normal(op.dim)
        lhs = op.squared_norm(y)
        rhs = c * c * op.derivative_sq(y) + (op.m * c * c) ** 2 * float(y @ y)
        assert abs(lhs - rhs) <= 1e-10 * lhs


def test_dirac_identity_natural_lower(fig_mesh):
    basis = constraint_basis(fig_mesh, lower="natural")
    op = assemble_dirac(fig_mesh, basis, 2.0, 7.0)
    y = np.random.default_rng(5).standard_normal(op.dim)
    lhs = op.squared_norm(y)
    assert abs(lhs - 49 * op.derivative_sq(y) - (2 * 49) ** 2 * y @ y) <= 1e-10 * lhs


def test_interval_gap():
    mesh = build_mesh(interval_graph(1.0), 0.01, 1.0)
    ev = np.linalg.eigvalsh(assemble_dirac(mesh, None, 1.0, 1.0).dense())
    assert np.min(np.abs(ev)) >= 1 - 1e-10


def test_natural_lower_kernel_matches_kirchhoff_laplacian():
    mesh = build_mesh(star_graph((1.0, 0.7, 0.4)), 0.01, 1.0)
    nat = constraint_basis(mesh, lower="natural")
    K = assemble_schrodinger(mesh).stiffness
    assert spla.norm(nat.B.T @ nat.B - K) < 1e-9 * spla.norm(K)


@pytest.mark.parametrize("graph", [star_graph(), line_graph(), figure_graph(), interval_graph()])
def test_lower_condition_kernels(graph):
    # strong elimination of the signed-sum rule leaves one null vector of B per
    # vertex on top of the constants of compact graphs; the natural variant
    # keeps only the constants
    mesh = build_mesh(graph, 0.02, 1.0)
    constants = 0 if graph.half_lines else 1
    for lower, expected in (("strong", len(graph.vertices) + constants), ("natural", constants)):
        B = constraint_basis(mesh, lower=lower).B.toarray()
        assert B.shape[1] - np.linalg.matrix_rank(B, tol=1e-8 * np.abs(B).max()) == expected


# ---------------------------------------------------------------------------
# Schroedinger operator


def lowest(op, k):
    return np.sort(spla.eigsh(op.stiffness.tocsc(), k=k, sigma=0.0, which="LM")[0])


def test_dirichlet_interval_first_eigenvalue():
    vals = []
    for h in (4e-3, 2e-3, 1e-3):
        mesh = build_mesh(interval_graph(1.0), h, 1.0)
        vals.append(lowest(assemble_schrodinger(mesh, dirichlet=("a", "b")), 1)[0])
    errs = [abs(v - math.pi**2) for v in vals]
    assert errs[-1] / math.pi**2 < 1e-3
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


@pytest.mark.parametrize("lengths,tol", [((1.0, 1.0, 1.0), 1e-6), ((1.0, 0.8, 0.6), 3e-6)])
def test_star_secular_oracle(lengths, tol):
    mesh = build_mesh(star_graph(lengths), 1e-3, 1.0)
    tips = tuple(v for v in mesh.graph.vertices if v != "o")
    got = lowest(assemble_schrodinger(mesh, dirichlet=tips), 3)
    ref = star_dirichlet_eigenvalues(lengths, 3)
    assert np.max(np.abs(got - ref) / ref) < tol


def test_stiffness_kills_constants():
    mesh = build_mesh(interval_graph(1.0), 0.01, 1.0)
    op = assemble_schrodinger(mesh)
    y = op.basis.reduce_scalar(ScalarField(mesh, np.ones(mesh.n_nodes)))
    assert np.max(np.abs(op.stiffness @ y)) < 1e-12


def test_schrodinger_positive_semidefinite():
    mesh = build_mesh(figure_graph(), 0.1, 1.0)
    ev = np.linalg.eigvalsh(assemble_schrodinger(mesh).stiffness.toarray())
    assert ev.min() > 0  # half-lines are Dirichlet-truncated


# ---------------------------------------------------------------------------
# apply


def test_apply_contracts(fig_mesh):
    op = assemble_dirac(fig_mesh, None, 1.0, 3.0)
    assert np.all(apply(op, np.zeros(op.dim)) == 0)
    e = np.zeros(op.dim)
    e[7] = 1
    assert np.array_equal(apply(op, e), op.matrix[:, 7].toarray().ravel())
    rng = np.random.default_rng(6)
    u, v = rng.standard_normal((2, op.dim))
    assert np.allclose(apply(op, 2 * u - 3 * v), 2 * apply(op, u) - 3 * apply(op, v), atol=1e-10)
    with pytest.raises(DimensionMismatch):
        apply(op, np.zeros(op.dim + 1))


# ---------------------------------------------------------------------------
# localized nonlinearity


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), p=st.floats(2.5, 5.5))
def test_nonlinearity_gradient_and_euler(seed, p):
    mesh = build_mesh(line_graph(), 0.1, 1.0)
    psi = CoreNonlinearity(mesh.constraints, p, "spinor")
    rng = np.random.default_rng(seed)
    y, d = rng.standard_normal((2, mesh.constraints.dim))
    # Euler identity for a p-homogeneous functional
    assert float(psi.gradient(y) @ y) == pytest.approx(psi.integral(y), rel=1e-12)
    eps = 1e-5
    fd = (psi.value(y + eps * d) - psi.value(y - eps * d)) / (2 * eps)
    assert fd == pytest.approx(float(psi.gradient(y) @ d), rel=1e-6, abs=1e-9)
    hd = psi.hessian(y) @ d
    fd2 = (psi.gradient(y + eps * d) - psi.gradient(y - eps * d)) / (2 * eps)
    assert np.allclose(hd, fd2, rtol=1e-5, atol=1e-7)
