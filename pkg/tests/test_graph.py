import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracgraph import (
    ScalarField,
    SpinorField,
    build_graph,
    build_mesh,
    figure_graph,
    line_graph,
    load_graph,
    lp_integral,
    norm,
    star_graph,
    support_measure,
)
from diracgraph.errors import (
    DanglingEndpoint,
    Disconnected,
    EmptyCompactCore,
    InvalidGraphSpec,
    SpacingTooCoarse,
)


def sine(ell=1.0):
    return lambda e, x: math.sqrt(2 / ell) * np.sin(np.pi * x / ell) if e == 0 else np.zeros_like(x)


# ---------------------------------------------------------------------------
# build_graph


def test_line_graph_counts():
    g = build_graph(
        {
            "vertices": ["a", "b"],
            "edges": [
                {"from": "a", "to": "b", "length": 1.0, "halfline": False},
                {"from": "a", "halfline": True},
                {"from": "b", "halfline": True},
            ],
        }
    )
    assert g.half_line_count == 2
    assert g.core_length == 1.0


def test_figure_graph_is_valid():
    g = figure_graph()
    assert g.half_line_count == 3
    assert g.core_length > 0
    assert len(g.bounded_edges) == 7
    # the loop counts twice at its vertex
    assert max(g.degree(v) for v in g.vertices) >= 4


def test_only_half_lines_rejected():
    with pytest.raises(EmptyCompactCore):
        build_graph({"vertices": ["a"], "edges": [{"from": "a", "halfline": True}, {"from": "a", "halfline": True}]})


def test_dangling_endpoint():
    with pytest.raises(DanglingEndpoint):
        build_graph({"vertices": ["a"], "edges": [{"from": "a", "to": "z", "length": 1.0, "halfline": False}]})


def test_disconnected():
    spec = {
        "vertices": ["a", "b", "c", "d"],
        "edges": [
            {"from": "a", "to": "b", "length": 1.0, "halfline": False},
            {"from": "c", "to": "d", "length": 1.0, "halfline": False},
        ],
    }
    with pytest.raises(Disconnected):
        build_graph(spec)


@pytest.mark.parametrize(
    "spec",
    [
        {"vertices": ["a", "b"], "edges": [], "extra": 1},
        {"vertices": ["a", "b"], "edges": [{"from": "a", "to": "b", "length": 1.0, "colour": "red"}]},
        {"vertices": ["a", "b"], "edges": [{"from": "a", "to": "b", "length": -1.0}]},
        {"vertices": ["a"], "edges": [{"from": "a", "halfline": True, "length": 3.0}]},
        {"vertices": ["a", "a"], "edges": []},
    ],
)
def test_invalid_specs(spec):
    with pytest.raises(InvalidGraphSpec):
        build_graph(spec)


def test_spec_round_trip(tmp_path):
    g = figure_graph()
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_spec()))
    h = load_graph(path)
    assert h.vertices == g.vertices
    assert h.edges == g.edges


# ---------------------------------------------------------------------------
# build_mesh


def test_unit_edge_arithmetic():
    mesh = build_mesh(line_graph(1.0), 0.25, 1.0)
    sl, cl = mesh.edge_nodes(0), mesh.edge_cells(0)
    assert sl.stop - sl.start == 5
    assert cl.stop - cl.start == 4


def test_half_line_arithmetic():
    mesh = build_mesh(line_graph(1.0), 0.1, 10.0)
    e = mesh.graph.half_lines[0]
    sl = mesh.edge_nodes(e)
    assert sl.stop - sl.start == 101
    assert mesh.n_cells[e] == 100
    assert sl.stop - 1 in set(mesh.far_nodes.tolist())


def test_core_mask():
    mesh = build_mesh(figure_graph(), 0.05, 2.0)
    for e in mesh.graph.half_lines:
        assert not mesh.core_cells[mesh.edge_cells(e)].any()
    for e in mesh.graph.bounded_edges:
        assert mesh.core_cells[mesh.edge_cells(e)].all()


def test_spacing_too_coarse():
    with pytest.raises(SpacingTooCoarse):
        build_mesh(line_graph(0.1), 0.2, 5.0)


def test_spacing_snaps_to_length():
    mesh = build_mesh(figure_graph(), 0.03, 2.0)
    for e, ed in enumerate(mesh.graph.edges):
        ell = ed.length if ed.is_bounded else 2.0
        assert mesh.n_cells[e] * mesh.spacing[e] == pytest.approx(ell, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(h=st.floats(0.01, 0.2), L=st.floats(0.5, 8.0))
def test_total_cell_length(h, L):
    g = figure_graph()
    try:
        mesh = build_mesh(g, h, L)
    except SpacingTooCoarse:
        return
    assert mesh.total_cell_length() == pytest.approx(g.core_length + g.half_line_count * L, rel=1e-13)


# ---------------------------------------------------------------------------
# norms and support


def test_constant_on_unit_edge():
    mesh = build_mesh(line_graph(1.0), 0.01, 3.0)
    f = ScalarField.from_function(mesh, lambda e, x: np.ones_like(x) if e == 0 else np.zeros_like(x))
    assert norm(f, "L2", "K") == pytest.approx(1.0, abs=1e-14)


def test_sine_mass_and_derivative_second_order():
    errs_mass, errs_grad = [], []
    for h in (0.02, 0.01, 0.005):
        mesh = build_mesh(line_graph(1.0), h, 1.0)
        f = ScalarField.from_function(mesh, sine())
        errs_mass.append(abs(norm(f, "L2") - 1))
        errs_grad.append(abs(norm(f, "H1") ** 2 - norm(f, "L2") ** 2 - math.pi**2))
    # the trapezoid rule is exact for sin^2 on a full period; the gradient error is O(h^2)
    assert max(errs_mass) < 1e-12
    assert errs_grad[-1] < 5e-4
    assert 3.5 < errs_grad[0] / errs_grad[1] < 4.5
    assert 3.5 < errs_grad[1] / errs_grad[2] < 4.5


def test_midpoint_quadrature_ratio():
    errs = []
    for h in (0.02, 0.01, 0.005):
        mesh = build_mesh(line_graph(1.0), h, 1.0)
        f = ScalarField.from_function(mesh, sine())
        errs.append(abs(lp_integral(f, 4, "K") - 1.5))  # int 4 sin^4 = 3/2
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_support_examples():
    mesh = build_mesh(line_graph(1.0), 0.01, 5.0)
    tent = ScalarField.from_function(
        mesh, lambda e, x: np.maximum(0.0, 1 - x) if mesh.graph.edges[e].halfline else np.zeros_like(x)
    )
    assert support_measure(tent) == pytest.approx(2.0, abs=1e-12)
    assert support_measure(ScalarField.zeros(mesh)) == 0.0
    assert support_measure(ScalarField.from_function(mesh, sine())) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        support_measure(tent, -1.0)


def test_zero_field_norms():
    mesh = build_mesh(star_graph(), 0.05, 1.0)
    z = SpinorField.zeros(mesh)
    for which in ("L2", "H1", "Linf"):
        assert norm(z, which) == 0.0
    assert norm(z, "Lp", p=3) == 0.0


def test_norm_argument_errors():
    mesh = build_mesh(line_graph(), 0.1, 1.0)
    f = ScalarField.zeros(mesh)
    with pytest.raises(ValueError):
        norm(f, "Lp", p=0.5)
    with pytest.raises(ValueError):
        norm(f, "W2")
    with pytest.raises(ValueError):
        norm(f, "L2", "X")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), p=st.floats(1.0, 8.0))
def test_norm_monotone_in_region(seed, p):
    mesh = build_mesh(figure_graph(), 0.1, 1.5)
    rng = np.random.default_rng(seed)
    f = SpinorField(mesh, rng.standard_normal(mesh.n_nodes), rng.standard_normal(mesh.n_midpoints))
    assert norm(f, "Lp", "K", p=p) <= norm(f, "Lp", "G", p=p) * (1 + 1e-14)
    assert norm(f, "L2", "K") <= norm(f, "L2", "G") * (1 + 1e-14)
