import numpy as np
import pytest

from diracgraph import (
    SpinorField,
    assemble_dirac,
    build_mesh,
    eigendecompose,
    interval_graph,
    line_graph,
    lp_integral,
)
from diracgraph.errors import DomainError
from diracgraph.inequalities import (
    FAMILIES,
    FieldSampler,
    check_projector_bound,
    check_support_inequality,
    estimate_gn_constants,
    rigorous_s_inf,
)


@pytest.fixture(scope="module")
def mesh():
    return build_mesh(line_graph(), 0.02, 2.0)


@pytest.fixture(scope="module")
def dec(mesh):
    return eigendecompose(assemble_dirac(mesh, None, 1.0, 10.0))


def test_indicator_equality():
    mesh = build_mesh(interval_graph(2.0), 0.01, 1.0)
    one = SpinorField.from_functions(mesh, lambda e, x: np.ones_like(x))
    assert lp_integral(one, 4.0) == pytest.approx(2.0, rel=1e-12)
    rep = check_support_inequality(mesh, [one], 4.0)
    assert rep.max_ratio == pytest.approx(1.0, abs=1e-12)
    assert rep.violations == 0


def test_support_inequality_random_and_scaling(mesh):
    fields = FieldSampler(mesh, seed=4).batch(200)
    rep = check_support_inequality(mesh, fields, 3.0)
    assert rep.violations == 0 and rep.passed
    assert rep.max_ratio >= 1.0
    f = fields[rep.witness]
    scaled = SpinorField(mesh, 7.5 * f.upper, 7.5 * f.lower)
    again = check_support_inequality(mesh, [scaled], 3.0)
    assert again.max_ratio == pytest.approx(rep.max_ratio, rel=1e-12)
    with pytest.raises(DomainError):
        check_support_inequality(mesh, fields, 2.0)


def test_sampler_is_deterministic(mesh):
    a = FieldSampler(mesh, seed=9).batch(8)
    b = FieldSampler(mesh, seed=9).batch(8)
    for f, g in zip(a, b):
        assert np.array_equal(f.upper, g.upper) and np.array_equal(f.lower, g.lower)
    for fam in FAMILIES:
        assert np.isfinite(FieldSampler(mesh, 1).draw(fam).upper).all()


def test_gn_constants_bounded(mesh, dec):
    reps = estimate_gn_constants(mesh, dec, 4.0, samples=100, seed=2, ascent=False)
    assert set(reps) == {"S_p", "S_inf", "S_2p2", "C_pK", "C_pG"}
    for r in reps.values():
        assert np.isfinite(r.max_ratio) and r.max_ratio > 0
        assert r.violations == 0
        assert r.details["monotonicity_violations"] == 0
    assert reps["S_inf"].reference == pytest.approx(rigorous_s_inf(mesh))
    assert reps["C_pK"].max_ratio <= reps["C_pG"].max_ratio * (1 + 1e-12)


def test_gn_off_core_field(mesh):
    e = mesh.graph.half_lines[0]
    f = SpinorField.from_functions(mesh, lambda k, x: np.where(k == e, np.sin(np.pi * x / 2) ** 2, 0.0))
    assert lp_integral(f, 4.0, "K") == 0.0
    assert lp_integral(f, 4.0, "G") > 0.0


def test_projector_bound(dec):
    rep = check_projector_bound(dec, 4.0, 0.56, samples=100)
    assert rep.violations == 0
    assert rep.details["h1_step_violations"] == 0
    y = dec.V_plus[:, 0]
    u = dec.op.basis.expand_spinor(y)
    from diracgraph import project

    assert np.linalg.norm(project(dec, y, -1)) < 1e-12
    assert lp_integral(u, 4.0, "K") >= 0


def test_projector_bound_precondition(mesh):
    low = eigendecompose(assemble_dirac(mesh, None, 1.0, 0.5))
    with pytest.raises(DomainError):
        check_projector_bound(low, 4.0, 0.56, samples=10)


def test_constants_stable_under_refinement():
    vals = []
    for h in (0.04, 0.02):
        m = build_mesh(line_graph(), h, 2.0)
        vals.append(estimate_gn_constants(m, None, 4.0, samples=200, seed=0, starts=2)["S_p"].max_ratio)
    assert abs(vals[1] - vals[0]) <= 0.05 * vals[0]
