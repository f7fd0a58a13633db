"""Normalized solutions of the limit Schroedinger problem on the graph.

Sign convention: ``-g'' - lambda g = 2 m chi_K |g|^{p-2} g`` with Kirchhoff
conditions, so bound states have ``lambda < 0``.  In reduced nodal coordinates
(``y = W^{1/2} g`` after eliminating the vertex constraints) the energy is

    E_m(y) = 1/2 y^T A y - (2m/p) int_K |g|^p

and the Euler-Lagrange system is ``A y - 2m grad Psi(y) = lambda y``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, FlowStagnation, NewtonDivergence, NoDecay
from .graph import MetricGraph
from .mesh import Mesh, ScalarField, build_mesh, lp_integral, norm
from .operators import CoreNonlinearity, SchrodingerOperator, assemble_schrodinger

log = logging.getLogger(__name__)

SIGN_CONVENTION = "-g'' - lambda*g = 2*m*chi_K*|g|^(p-2)*g"
TAIL_FRACTION = 0.1
NO_DECAY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class NlseSolution:
    g: ScalarField
    lam: float
    mass: float
    energy: float
    residual: float
    kirchhoff: float
    m: float
    p: float
    flow_steps: int = 0
    newton_iters: int = 0
    y: np.ndarray | None = field(default=None, repr=False)
    op: SchrodingerOperator | None = field(default=None, repr=False)
    energies: tuple[float, ...] = ()

    @property
    def mesh(self) -> Mesh:
        return self.g.mesh


def _check_params(m: float, p: float) -> None:
    if not 2 < p < 6:
        raise DomainError(f"p must lie in (2, 6), got {p}")
    if not m > 0:
        raise DomainError(f"m must be positive, got {m}")


def energy_Em(field: ScalarField, m: float, p: float) -> float:
    """``1/2 |g'|^2 - (2m/p) int_K |g|^p`` by forward differences and the midpoint rule."""
    mesh = field.mesh
    left = mesh.cell_left
    grad = (field.values[left + 1] - field.values[left]) / mesh.cell_width
    kin = 0.5 * float(np.sum(mesh.cell_width * np.abs(grad) ** 2))
    return kin - (2 * m / p) * lp_integral(field, p, "K")


def scaled_energy(field: ScalarField, m: float, p: float) -> float:
    """Right-hand side of the mass-scaling identity, ``(2m)^{-2/(p-2)} E_unit((2m)^{1/(p-2)} u)``.

    ``E_unit`` is the functional with nonlinearity coefficient ``1/p``, i.e.
    ``E_m`` at ``m = 1/2``.
    """
    s = (2 * m) ** (1 / (p - 2))
    return energy_Em(ScalarField(field.mesh, s * field.values), 0.5, p) / s**2


def scaled_mass(m: float, p: float) -> float:
    """Mass ``(2m)^{2/(p-2)}`` at which the unit-coefficient problem matches ``E_m`` at mass 1."""
    return (2 * m) ** (2 / (p - 2))


def kirchhoff_residual(g: ScalarField, dirichlet=()) -> float:
    """Max over vertices of the summed outgoing derivative (one-sided, second order)."""
    mesh = g.mesh
    v = g.values
    worst = 0.0
    for vert, ends in mesh.vertex_ends.items():
        if vert in dirichlet:
            continue
        flux = 0.0
        for e in ends:
            step = 1 if e.end == 0 else -1
            i0 = e.node
            h = mesh.spacing[e.edge]
            flux += (-3 * v[i0] + 4 * v[i0 + step] - v[i0 + 2 * step]) / (2 * h)
        worst = max(worst, abs(flux))
    return float(worst)


def tail_mass(g: ScalarField, fraction: float = TAIL_FRACTION) -> float:
    """Mass on the outer ``fraction`` of every truncated half-line."""
    mesh = g.mesh
    x0 = (1 - fraction) * mesh.trunc_length
    total = 0.0
    for e in mesh.graph.half_lines:
        sl = mesh.edge_nodes(e)
        mask = mesh.node_x[sl] >= x0
        total += float(np.sum(mesh.node_weight[sl][mask] * np.abs(g.values[sl][mask]) ** 2))
    return total


def sine_seed(mesh: Mesh, edge: int | None = None) -> ScalarField:
    """``sqrt(2/l) sin(pi x / l)`` on one core edge (default: longest), zero elsewhere."""
    graph = mesh.graph
    e0 = graph.longest_core_edge if edge is None else edge
    ell = graph.edges[e0].length

    def f(e, x):
        if e != e0:
            return np.zeros_like(x)
        return math.sqrt(2 / ell) * np.sin(np.pi * x / ell)

    return ScalarField.from_function(mesh, f)


class _Problem:
    def __init__(self, op: SchrodingerOperator, m: float, p: float, mass: float):
        self.op = op
        self.A = sp.csc_matrix(op.stiffness)
        self.psi = CoreNonlinearity(op.basis, p, "scalar")
        self.m, self.p, self.mass = m, p, mass

    def energy(self, y):
        return 0.5 * float(y @ (self.A @ y)) - 2 * self.m * self.psi.value(y)

    def gradient(self, y):
        return self.A @ y - 2 * self.m * self.psi.gradient(y)

    def normalize(self, y):
        return y * math.sqrt(self.mass / float(y @ y))

    def multiplier(self, y):
        return float(y @ self.gradient(y)) / float(y @ y)

    def residual(self, y, lam):
        return float(np.linalg.norm(self.gradient(y) - lam * y))


def _flow(prob: _Problem, y, tau, tol, max_steps, history: list | None = None):
    """Semi-implicit normalized gradient flow; step sizes on a x4 ladder with cached factorisations.

    Steps that raise the energy are rejected, so accepted energies (appended to
    ``history`` when given) never increase.
    """
    n = prob.A.shape[0]
    I = sp.identity(n, format="csc")
    factors: dict[float, object] = {}
    E = prob.energy(y)
    if history is not None:
        history.append(E)
    streak = 0
    for k in range(max_steps):
        if tau not in factors:
            factors[tau] = spla.splu(sp.csc_matrix(I + tau * prob.A))
        rhs = y + tau * 2 * prob.m * prob.psi.gradient(y)
        cand = prob.normalize(factors[tau].solve(rhs))
        E_new = prob.energy(cand)
        if E_new > E:
            tau /= 4
            streak = 0
            if tau < 1e-12:
                raise FlowStagnation("step size collapsed before the energy stopped decreasing")
            continue
        drop = E - E_new
        y, E = cand, E_new
        if history is not None:
            history.append(E)
        if drop < tol:
            return y, k + 1
        streak += 1
        if streak >= 5 and tau < 1e4:
            tau *= 4
            streak = 0
    raise FlowStagnation(f"energy still decreasing after {max_steps} steps")


def _newton(prob: _Problem, y, tol, max_iter):
    lam = prob.multiplier(y)
    n = y.size
    # rounding floor of the strong residual: the stiffness scales like 4/h^2
    floor = 64 * np.finfo(float).eps * spla.norm(prob.A, 1) * math.sqrt(prob.mass)
    prev = math.inf
    for it in range(max_iter + 1):
        F = np.concatenate([prob.gradient(y) - lam * y, [0.5 * (prob.mass - float(y @ y))]])
        res = float(np.linalg.norm(F))
        if res <= tol or (res <= floor and res > 0.5 * prev):
            return y, lam, it
        prev = res
        if it == max_iter:
            break
        J = prob.A - 2 * prob.m * prob.psi.hessian(y) - lam * sp.identity(n)
        K = sp.bmat([[J, -y[:, None]], [-y[None, :], None]], format="csc")
        d = spla.spsolve(K, -F)
        step = 1.0
        while step > 1e-4:
            y_t, lam_t = y + step * d[:n], lam + step * d[n]
            F_t = np.concatenate([prob.gradient(y_t) - lam_t * y_t, [0.5 * (prob.mass - float(y_t @ y_t))]])
            if np.linalg.norm(F_t) < (1 - 1e-4 * step) * res:
                break
            step *= 0.5
        y, lam = y_t, lam_t
    raise NewtonDivergence(f"KKT residual {res:.2e} after {max_iter} Newton steps")


def _solve_on_mesh(mesh, m, p, mass, dirichlet, seed, tol, flow_tol, max_flow, max_newton, tau0):
    op = assemble_schrodinger(mesh, dirichlet)
    prob = _Problem(op, m, p, mass)
    y0 = prob.normalize(op.basis.reduce_scalar(seed))
    y, steps = _flow(prob, y0, tau0, flow_tol, max_flow)
    y, lam, its = _newton(prob, y, tol, max_newton)
    y = prob.normalize(y)
    g = op.basis.expand_scalar(y)
    return NlseSolution(
        g=g,
        lam=lam,
        mass=float(y @ y),
        energy=prob.energy(y),
        residual=prob.residual(y, lam),
        kirchhoff=kirchhoff_residual(g, dirichlet),
        m=float(m),
        p=float(p),
        flow_steps=steps,
        newton_iters=its,
        y=y,
        op=op,
    )


def solve_nlse(
    graph: MetricGraph,
    m: float,
    p: float,
    mass: float = 1.0,
    h: float = 1e-2,
    L: float | None = None,
    *,
    dirichlet=(),
    seed_edge: int | None = None,
    multistart: bool = False,
    tol: float = 1e-10,
    flow_tol: float = 1e-12,
    max_flow: int = 20000,
    max_L: float = 200.0,
    max_newton: int = 50,
    tau0: float = 0.05,
    check_decay: bool = True,
) -> NlseSolution:
    """Normalized critical point of ``E_m`` on the mass sphere ``|g|_2^2 = mass``.

    Normalized gradient flow from a sine bump on a core edge, then Newton on the
    bordered KKT system.  With ``L=None`` the truncation length is enlarged until
    ``exp(-kappa L) < 1e-10`` with ``kappa = sqrt(-lambda)``.  ``multistart``
    seeds one run per core edge and returns the lowest energy; all energies are
    kept in ``energies``.
    """
    _check_params(m, p)
    if not mass > 0:
        raise DomainError("mass must be positive")
    auto_L = L is None
    L = 20.0 if auto_L else float(L)
    edges = graph.bounded_edges if multistart else [graph.longest_core_edge if seed_edge is None else seed_edge]

    while True:
        mesh = build_mesh(graph, h, L)
        sols = []
        for e in edges:
            seed = sine_seed(mesh, e)
            sols.append(
                _solve_on_mesh(mesh, m, p, mass, dirichlet, seed, tol, flow_tol, max_flow, max_newton, tau0)
            )
        best = min(sols, key=lambda s: s.energy)
        if auto_L and graph.half_lines and best.lam < 0:
            need = 23.0 / math.sqrt(-best.lam)
            if need > L:
                if need > max_L:
                    raise NoDecay(f"decay rate {math.sqrt(-best.lam):.3g} needs L={need:.3g} > max_L={max_L:g}")
                L = need * 1.05
                log.info("enlarging truncation length to %.3g", L)
                continue
        break

    if multistart:
        best = NlseSolution(**{**best.__dict__, "energies": tuple(s.energy for s in sols)})
    if check_decay and graph.half_lines:
        tm = tail_mass(best.g)
        if tm > NO_DECAY_TOL:
            raise NoDecay(f"mass {tm:.2e} on the outer {TAIL_FRACTION:.0%} of the half-lines; enlarge L")
    return best


def truncation_check(graph: MetricGraph, m: float, p: float, h: float, L: float, **kw) -> float:
    """Change of ``lambda`` when the truncation length is doubled."""
    a = solve_nlse(graph, m, p, h=h, L=L, **kw)
    b = solve_nlse(graph, m, p, h=h, L=2 * L, **kw)
    return abs(a.lam - b.lam)


def rayleigh_multiplier(sol: NlseSolution) -> float:
    """``<g, -g'' - 2m chi_K |g|^{p-2} g> / |g|^2`` evaluated on the discrete solution."""
    prob = _Problem(sol.op, sol.m, sol.p, sol.mass)
    return prob.multiplier(sol.y)


def h1_distance(a: ScalarField, b: ScalarField) -> float:
    return norm(ScalarField(a.mesh, a.values - b.values), "H1")


def richardson_lambda(graph: MetricGraph, m: float, p: float, h: float, L: float | None = None, **kw):
    """Second-order Richardson value ``(4 lambda_{h/2} - lambda_h) / 3`` and both raw values."""
    coarse = solve_nlse(graph, m, p, h=h, L=L, **kw)
    fine = solve_nlse(graph, m, p, h=h / 2, L=coarse.mesh.trunc_length, **kw)
    return (4 * fine.lam - coarse.lam) / 3, coarse.lam, fine.lam
