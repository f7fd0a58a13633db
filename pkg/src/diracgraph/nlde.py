"""Normalized solutions of the nonlinear Dirac equation and the variational level e_c.

Reduced spinors ``y`` use the rotated lower component of :mod:`operators`, so
the real ansatz (``u1`` real, ``u2`` purely imaginary) is simply a real ``y``.
The equation ``D u - omega u = chi_K |u|^{p-2} u`` becomes

    S y - omega y - grad Psi(y) = 0,     |y|^2 = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConcavityLoss, DomainError, GapViolation, NewtonDivergence
from .mesh import Mesh, ScalarField, SpinorField, norm
from .nlse import NlseSolution
from .operators import ConstraintBasis, CoreNonlinearity, DiracOperator, _average_matrix
from .spectral import SpectralDecomposition

GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SolverParams:
    m: float
    c: float
    p: float
    h: float = 0.01
    L: float = 40.0
    tol: float = 1e-10
    max_iter: int = 50
    c_schedule: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.m > 0 and self.c > 0):
            raise DomainError("m and c must be positive")
        if not 2 < self.p < 6:
            raise DomainError(f"p must lie in (2, 6), got {self.p}")

    @property
    def rest_energy(self) -> float:
        return self.m * self.c**2


@dataclass(frozen=True, eq=False)
class NldeSolution:
    u: SpinorField
    omega: float
    mass: float
    action: float
    residual: float
    newton_iters: int
    c: float
    m: float
    p: float
    y: np.ndarray = field(repr=False)
    op: DiracOperator = field(repr=False)

    @property
    def mesh(self) -> Mesh:
        return self.u.mesh

    @property
    def omega_minus_mc2(self) -> float:
        return self.omega - self.m * self.c**2


@dataclass(frozen=True)
class EcEstimate:
    c: float
    m: float
    p: float
    family: str
    a: float | None
    estimate: float
    t_star: float
    t_max: float
    bound: float
    literal_bound: float
    slack: float
    threshold_half: float
    monotone: bool
    values: np.ndarray = field(repr=False)


def _reduced(op_or_basis, field) -> np.ndarray:
    basis = op_or_basis.basis if hasattr(op_or_basis, "basis") else op_or_basis
    if isinstance(field, SpinorField):
        return basis.reduce_spinor(field)
    return np.asarray(field)


# ---------------------------------------------------------------------------
# functionals


def action(dec: SpectralDecomposition | DiracOperator, field, omega: float, p: float) -> float:
    """``I_{omega,c}(u) = 1/2 |u+|_c^2 - 1/2 |u-|_c^2 - omega/2 |u|^2 - Psi(u)``.

    ``|u+|_c^2 - |u-|_c^2 = <D u, u>``, so no decomposition is needed.
    """
    op = dec.op if isinstance(dec, SpectralDecomposition) else dec
    y = _reduced(op, field)
    psi = CoreNonlinearity(op.basis, p, "spinor")
    quad = float(np.real(np.vdot(y, op.matrix @ y)))
    return 0.5 * quad - 0.5 * omega * float(np.vdot(y, y).real) - psi.value(np.real(y) if np.isrealobj(y) else y)


class _Slice:
    """Restriction of ``Psi`` to the affine slice ``v + V_minus z`` (dense)."""

    def __init__(self, dec: SpectralDecomposition, p: float):
        if dec.method != "dense":
            raise ValueError("the reduced map needs the dense decomposition")
        self.dec = dec
        self.psi = CoreNonlinearity(dec.op.basis, p, "spinor")
        # Psi only sees DOFs that touch core cells
        touched = np.unique(np.concatenate([self.psi.A_up.indices, self.psi.A_lo.indices]))
        self.idx = touched
        self.Vm = dec.V_minus
        self.Vm_core = self.Vm[touched]
        self.nu = np.abs(dec.eigenvalues[dec.negative])

    def value(self, v, z):
        u = v + self.Vm @ z
        return -0.5 * float(np.sum(self.nu * z * z)) - self.psi.value(u), u

    def gradient(self, u, z):
        return -self.nu * z - self.Vm.T @ self.psi.gradient(u)

    def hessian(self, u):
        H = self.psi.hessian(u)[self.idx][:, self.idx].toarray()
        return -np.diag(self.nu) - self.Vm_core.T @ H @ self.Vm_core


def reduced_map_h(
    dec: SpectralDecomposition,
    v_plus: np.ndarray,
    p: float,
    w0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    _slice: _Slice | None = None,
) -> np.ndarray:
    """Maximiser ``h_c(v)`` of ``w -> I_{0,c}(v + w)`` over the negative subspace.

    Damped Newton on the coefficients in the negative eigenbasis; the
    restriction is strictly concave, so a failed Cholesky factorisation of the
    negated Hessian raises :class:`ConcavityLoss`.
    """
    sl = _Slice(dec, p) if _slice is None else _slice
    z = np.zeros(sl.nu.size) if w0 is None else sl.Vm.T @ w0
    f, u = sl.value(v_plus, z)
    for _ in range(max_iter):
        g = sl.gradient(u, z)
        if np.linalg.norm(g) <= tol:
            return sl.Vm @ z
        Hn = -sl.hessian(u)
        try:
            cho = sla.cho_factor(Hn)
        except np.linalg.LinAlgError as exc:
            raise ConcavityLoss("restriction to the negative subspace is not strictly concave") from exc
        d = sla.cho_solve(cho, g)
        step = 1.0
        while True:
            f_new, u_new = sl.value(v_plus, z + step * d)
            if f_new >= f - 1e-14 * abs(f) or step < 1e-8:
                break
            step *= 0.5
        z, f, u = z + step * d, f_new, u_new
    g = sl.gradient(u, z)
    if np.linalg.norm(g) <= tol:
        return sl.Vm @ z
    raise ConcavityLoss(f"inner maximisation stalled with gradient {np.linalg.norm(g):.2e}")


def J_c(dec: SpectralDecomposition, v_plus: np.ndarray, p: float, w0=None, _slice=None) -> tuple[float, np.ndarray]:
    """Reduced functional and the maximiser ``h_c(v)``."""
    w = reduced_map_h(dec, v_plus, p, w0=w0, _slice=_slice)
    return action(dec, v_plus + w, 0.0, p), w


# ---------------------------------------------------------------------------
# minimax level


def m0_threshold(p: float, ell: float) -> float:
    """Mass threshold: 0 for ``2 < p < 4`` and ``(p pi^2 / 4) l^{p/2-3}`` for ``4 <= p < 6``."""
    if not 2 < p < 6:
        raise DomainError(f"p must lie in (2, 6), got {p}")
    if not ell > 0:
        raise DomainError("edge length must be positive")
    if p < 4:
        return 0.0
    return p * math.pi**2 / 4 * ell ** (p / 2 - 3)


def sine_test_function(mesh: Mesh, edge: int | None = None) -> SpinorField:
    graph = mesh.graph
    e0 = graph.longest_core_edge if edge is None else edge
    ell = graph.edges[e0].length

    def f(e, x):
        return math.sqrt(2 / ell) * np.sin(np.pi * x / ell) if e == e0 else np.zeros_like(x)

    return SpinorField.from_functions(mesh, f)


def tent_test_function(mesh: Mesh, a: float) -> SpinorField:
    """1 on the core, ``max(0, 1 - a x)`` on the half-lines, normalised; lower component zero."""
    graph = mesh.graph

    def f(e, x):
        if graph.edges[e].halfline:
            return np.maximum(0.0, 1 - a * x)
        return np.ones_like(x)

    N, K = graph.half_line_count, graph.core_length
    scale = 1 / math.sqrt(N / (3 * a) + K)
    phi = SpinorField.from_functions(mesh, f)
    return SpinorField(mesh, scale * phi.upper, phi.lower)


def sine_bound(m: float, c: float, p: float, ell: float) -> float:
    return m * c * c / 2 + math.pi**2 / (4 * m * ell**2) - ell ** (1 - p / 2) / p


def tent_bound(m: float, c: float, p: float, N: int, K: float, a: float, literal: bool = False) -> float:
    """Asymptotic bound for the tent family.

    The reduced functional carries ``1/p`` in front of the core integral; the
    ``literal`` form omits it, as in the printed statement.
    """
    b_a = N * a / (N / (3 * a) + K)
    core = K / (N / (3 * a) + K) ** (p / 2)
    return m * c * c / 2 + b_a / (4 * m) - (core if literal else core / p)


def _golden_max(f, lo, hi, tol=1e-10, max_iter=200):
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo < tol * max(1.0, abs(hi)):
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def estimate_ec(
    dec: SpectralDecomposition,
    params: SolverParams,
    family: str = "sine",
    a: float | None = None,
    n_grid: int = 512,
) -> EcEstimate:
    """Sampled ``sup_t J_c(t v+)`` with ``v+ = P+ phi`` over ``0 <= t <= 1/|v+|_2``."""
    if dec.method != "dense":
        raise ValueError("estimate_ec needs the dense decomposition (at most DENSE_LIMIT unknowns)")
    mesh = dec.op.mesh
    graph = mesh.graph
    m, c, p = dec.op.m, dec.op.c, params.p
    if family == "sine":
        phi = sine_test_function(mesh)
        ell = graph.edges[graph.longest_core_edge].length
        bound = literal = sine_bound(m, c, p, ell)
    elif family == "tent":
        if a is None or not a > 0:
            raise DomainError("the tent family needs a > 0")
        if not graph.half_lines:
            raise DomainError("the tent family needs half-lines")
        if 1 / a > mesh.trunc_length:
            raise DomainError(f"tent support 1/a={1 / a:g} exceeds the truncation length")
        phi = tent_test_function(mesh, a)
        N, K = graph.half_line_count, graph.core_length
        bound = tent_bound(m, c, p, N, K, a)
        literal = tent_bound(m, c, p, N, K, a, literal=True)
    else:
        raise ValueError(f"unknown family {family!r}")

    y = dec.op.basis.reduce_spinor(phi)
    vp = dec.V_plus @ (dec.V_plus.T @ y)
    t_max = 1 / float(np.linalg.norm(vp))
    sl = _Slice(dec, p)
    ts = np.linspace(0.0, t_max, n_grid)
    vals = np.empty(n_grid)
    w = None
    for k, t in enumerate(ts):
        vals[k], w = J_c(dec, t * vp, p, w0=w, _slice=sl)

    k = int(np.argmax(vals))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, n_grid - 1)]
    if hi > lo:
        t_star, best = _golden_max(lambda t: J_c(dec, t * vp, p, _slice=sl)[0], lo, hi)
        if best < vals[k]:
            t_star, best = ts[k], vals[k]
    else:
        t_star, best = ts[k], vals[k]

    # monotone ray: no sample exceeds the endpoint by more than 1e-8
    monotone = bool(np.all(vals[:-1] <= vals[-1] + 1e-8))
    return EcEstimate(
        c=c, m=m, p=p, family=family, a=a, estimate=float(best), t_star=float(t_star), t_max=t_max,
        bound=bound, literal_bound=literal, slack=float(best) - bound,
        threshold_half=m * c * c / 2, monotone=monotone, values=vals,
    )


# ---------------------------------------------------------------------------
# Newton solver


class _SplitNonlinearity:
    """``Psi`` for complex reduced spinors written as ``X = (Re y, Im y)``."""

    def __init__(self, basis: ConstraintBasis, p: float):
        base = CoreNonlinearity(basis, p, "spinor")
        Z = sp.csr_matrix(base.A_up.shape)
        self.maps = [
            sp.hstack([base.A_up, Z], format="csr"),
            sp.hstack([Z, base.A_up], format="csr"),
            sp.hstack([base.A_lo, Z], format="csr"),
            sp.hstack([Z, base.A_lo], format="csr"),
        ]
        self.width = base.width
        self.p = float(p)

    def _parts(self, X):
        r = [M @ X for M in self.maps]
        return r, sum(x * x for x in r)

    def integral(self, X, power=None):
        q = self.p if power is None else power
        _, r2 = self._parts(X)
        return float(np.sum(self.width * r2 ** (q / 2)))

    def value(self, X):
        return self.integral(X) / self.p

    def gradient(self, X):
        r, r2 = self._parts(X)
        wr = self.width * r2 ** ((self.p - 2) / 2)
        return sum(M.T @ (wr * x) for M, x in zip(self.maps, r))

    def hessian(self, X):
        r, r2 = self._parts(X)
        rr = np.sqrt(r2)
        base = self.width * rr ** (self.p - 2)
        safe = np.where(rr > 0, rr, 1.0)
        unit = [np.where(rr > 0, x / safe, 0.0) for x in r]
        extra = (self.p - 2) * base
        H = None
        for i, Mi in enumerate(self.maps):
            for j, Mj in enumerate(self.maps):
                d = extra * unit[i] * unit[j] + (base if i == j else 0.0)
                blk = Mi.T @ sp.diags(d) @ Mj
                H = blk if H is None else H + blk
        return sp.csr_matrix(H)


def initial_guess(nlse: NlseSolution, m: float, c: float, op: DiracOperator | None = None,
                  relation: str = "literal") -> tuple[SpinorField, float]:
    """Seed ``(u, omega0)`` from a Schroedinger solution.

    ``u1 = g`` and ``u2 = -i c g' / (omega0 + m c^2)``.  ``relation`` selects the
    frequency shift: ``"literal"`` gives ``omega0 = m c^2 + lambda/m``;
    ``"expansion"`` gives ``m c^2 + lambda/(2m)``, which is what the
    nonrelativistic expansion of the equation yields under the adopted sign
    convention.
    """
    if relation == "literal":
        shift = nlse.lam / m
    elif relation == "expansion":
        shift = nlse.lam / (2 * m)
    else:
        raise ValueError("relation must be 'literal' or 'expansion'")
    omega0 = m * c * c + shift
    mesh = nlse.mesh
    basis = mesh.constraints if op is None else op.basis
    y1 = basis.reduce_scalar(nlse.g)
    y2 = -c * (basis.B @ y1) / (omega0 + m * c * c)
    y = np.concatenate([y1, y2])
    y /= np.linalg.norm(y)
    return basis.expand_spinor(y), omega0


def _newton_real(op, psi, y, omega, tol, max_iter):
    S = op.matrix
    n = y.size
    floor = 64 * np.finfo(float).eps * spla.norm(S, 1)
    prev = math.inf

    def F_of(y, w):
        return np.concatenate([S @ y - w * y - psi.gradient(y), [0.5 * (1 - float(y @ y))]])

    F = F_of(y, omega)
    for it in range(max_iter + 1):
        res = float(np.linalg.norm(F))
        if res <= tol or (res <= floor and res > 0.5 * prev):
            return y, omega, it, res
        if it == max_iter or not np.isfinite(res):
            break
        prev = res
        J = S - omega * sp.identity(n) - psi.hessian(y)
        K = sp.bmat([[J, -y[:, None]], [-y[None, :], None]], format="csc")
        d = spla.spsolve(K, -F)
        step = 1.0
        while True:
            y_t, w_t = y + step * d[:n], omega + step * d[n]
            F_t = F_of(y_t, w_t)
            if np.linalg.norm(F_t) < (1 - 1e-4 * step) * res or step < 1e-6:
                break
            step *= 0.5
        y, omega, F = y_t, w_t, F_t
    raise NewtonDivergence(f"residual {res:.2e} after {max_iter} Newton steps")


def _newton_complex(op, psi, y, omega, tol, max_iter):
    """Real/imaginary split with a phase condition ``<i y_ref, y> = 0``."""
    S = op.matrix
    n = op.dim
    S2 = sp.block_diag([S, S], format="csr")
    X = np.concatenate([np.real(y), np.imag(y)])
    ref = X.copy()
    gen = np.concatenate([-ref[n:], ref[:n]])  # i * y_ref in split form
    theta = 0.0
    floor = 64 * np.finfo(float).eps * spla.norm(S, 1)
    prev = math.inf

    def F_of(X, w, th):
        r = S2 @ X - w * X - psi.gradient(X) + th * gen
        return np.concatenate([r, [0.5 * (1 - float(X @ X)), float(gen @ X)]])

    F = F_of(X, omega, theta)
    for it in range(max_iter + 1):
        res = float(np.linalg.norm(F))
        if res <= tol or (res <= floor and res > 0.5 * prev):
            return X[:n] + 1j * X[n:], omega, it, res
        if it == max_iter or not np.isfinite(res):
            break
        prev = res
        J = S2 - omega * sp.identity(2 * n) - psi.hessian(X)
        K = sp.bmat(
            [[J, -X[:, None], gen[:, None]], [-X[None, :], None, None], [gen[None, :], None, None]],
            format="csc",
        )
        d = spla.spsolve(K, -F)
        step = 1.0
        while True:
            X_t, w_t, th_t = X + step * d[: 2 * n], omega + step * d[2 * n], theta + step * d[2 * n + 1]
            F_t = F_of(X_t, w_t, th_t)
            if np.linalg.norm(F_t) < (1 - 1e-4 * step) * res or step < 1e-6:
                break
            step *= 0.5
        X, omega, theta, F = X_t, w_t, th_t, F_t
    raise NewtonDivergence(f"residual {res:.2e} after {max_iter} Newton steps")


def solve_nlde(
    op: DiracOperator | SpectralDecomposition,
    p: float,
    guess,
    omega0: float,
    *,
    tol: float = 1e-10,
    max_iter: int = 50,
    complex_mode: bool = False,
) -> NldeSolution:
    """Newton on ``(S y - omega y - grad Psi(y), |y|^2 - 1) = 0`` with damped line search."""
    if isinstance(op, SpectralDecomposition):
        op = op.op
    if not 2 < p < 6:
        raise DomainError(f"p must lie in (2, 6), got {p}")
    y = _reduced(op, guess)
    nrm = float(np.linalg.norm(y))
    if nrm == 0:
        raise DomainError("the zero spinor is the trivial branch")
    y = y / nrm
    if complex_mode:
        psi_split = _SplitNonlinearity(op.basis, p)
        y, omega, its, res = _newton_complex(op, psi_split, y.astype(complex), omega0, tol, max_iter)
    else:
        if np.iscomplexobj(y):
            raise DomainError("complex guess given to the real solver; pass complex_mode=True")
        psi = CoreNonlinearity(op.basis, p, "spinor")
        y, omega, its, res = _newton_real(op, psi, y, omega0, tol, max_iter)
    mc2 = op.rest_energy
    if not 0 <= omega < mc2:
        raise GapViolation(f"omega={omega!r} outside [0, {mc2!r})")
    return NldeSolution(
        u=op.basis.expand_spinor(y),
        omega=float(omega),
        mass=float(np.vdot(y, y).real),
        action=action(op, y, 0.0, p),
        residual=res,
        newton_iters=its,
        c=op.c,
        m=op.m,
        p=float(p),
        y=y,
        op=op,
    )


def continuation(
    nlse: NlseSolution, c_list, p: float | None = None, relation: str = "literal", lower: str = "strong", **kw
):
    """Solve for every ``c`` (largest first, warm-started), returned in ascending ``c``.

    ``lower`` selects the vertex condition of the lower component (see ``constraint_basis``).
    """
    from .operators import assemble_dirac, constraint_basis

    p = nlse.p if p is None else p
    m = nlse.m
    mesh = nlse.mesh
    basis = mesh.constraints if lower == "strong" else constraint_basis(mesh, lower=lower)
    out = {}
    prev = None
    for c in sorted(c_list, reverse=True):
        op = assemble_dirac(mesh, basis, m, c)
        if prev is None:
            guess, omega0 = initial_guess(nlse, m, c, op, relation=relation)
        else:
            guess, omega0 = prev.y, m * c * c + prev.omega_minus_mc2
        prev = solve_nlde(op, p, guess, omega0, **kw)
        out[c] = prev
    return [out[c] for c in sorted(out)]


# ---------------------------------------------------------------------------
# diagnostics


def solution_terms(sol: NldeSolution) -> dict[str, float]:
    """Both sides of ``c^2|u'|^2 + m^2c^4|u|^2 = omega^2|u|^2 + 2 omega int|u|^p + int|u|^{2p-2}``."""
    op = sol.op
    y = np.real(sol.y) if np.isrealobj(sol.y) else sol.y
    mass = float(np.vdot(y, y).real)
    lhs = op.c**2 * op.derivative_sq(y) + op.rest_energy**2 * mass
    psi = CoreNonlinearity(op.basis, sol.p, "spinor")
    ip = psi.integral(y)
    i2 = psi.integral(y, 2 * sol.p - 2)
    rhs = sol.omega**2 * mass + 2 * sol.omega * ip + i2
    grad = psi.gradient(y)
    rhs_discrete = sol.omega**2 * mass + 2 * sol.omega * ip + float(np.vdot(grad, grad).real)
    return {"lhs": lhs, "rhs": rhs, "rhs_discrete": rhs_discrete, "int_p": ip, "int_2p2": i2}


def rayleigh_omega(sol: NldeSolution) -> float:
    """``<u, D u - chi_K |u|^{p-2} u>`` for the unit-mass solution."""
    op = sol.op
    psi = CoreNonlinearity(op.basis, sol.p, "spinor")
    y = sol.y
    return float(np.vdot(y, op.matrix @ y - psi.gradient(y)).real) / float(np.vdot(y, y).real)


def spinor_h1(field: SpinorField) -> float:
    return norm(field, "H1")


def component_norms(sol: NldeSolution, g: ScalarField | None = None) -> dict[str, float]:
    """``|u2|_2``, ``|u2|_{H1}`` and (optionally) ``|u1 - g|_{H1}`` on the raw mesh."""
    mesh = sol.mesh
    basis = sol.op.basis
    lower = sol.u.lower
    l2 = float(np.sqrt(np.sum(mesh.cell_width * np.abs(lower) ** 2)))
    # derivative of the midpoint component, taken through the discrete operator
    _, d_lo = basis.spinor_derivative_raw(SpinorField(mesh, np.zeros(mesh.n_nodes), lower))
    h1 = float(np.sqrt(l2**2 + np.sum(mesh.node_weight * np.abs(d_lo) ** 2)))
    out = {"l2_u2": l2, "h1_u2": h1}
    if g is not None:
        diff = ScalarField(mesh, np.real(sol.u.upper) - g.values)
        out["h1_u1_minus_g"] = norm(diff, "H1")
    return out


@dataclass(frozen=True)
class BoundReport:
    C: float
    h1_norm: float
    sigma: float
    S_p: float
    S_inf: float
    safety: float
    omega: float
    omega_floor: float
    h1_ok: bool
    omega_ok: bool

    @property
    def passed(self) -> bool:
        return self.h1_ok and self.omega_ok


def apriori_constant(sigma: float, m: float, p: float, S_p: float, S_inf: float) -> float:
    """``max{m^{2/(6-p)}, sigma^{2/(p-6)}} (2 S_p + 2p S_inf^{p-2}/(p-2))^{2/(6-p)}``."""
    if not 2 < p < 6:
        raise DomainError(f"p must lie in (2, 6), got {p}")
    e = 2 / (6 - p)
    return max(m**e, sigma ** (-e)) * (2 * S_p + 2 * p * S_inf ** (p - 2) / (p - 2)) ** e


def a_priori_bound_check(
    sol: NldeSolution,
    sigma: float,
    m: float,
    p: float,
    constants: dict[str, float],
    safety: float = 2.0,
    slack: float = 0.1,
    raise_on_fail: bool = False,
) -> BoundReport:
    """Check ``|u|_{H1} < C`` and ``omega >= m c^2 - 2 S_p C^{(p-2)/2} - slack m c^2``.

    ``constants`` holds empirical ``S_p`` and ``S_inf`` (lower estimates of the
    sharp values); both are multiplied by ``safety`` before use.
    """
    from .errors import BoundViolated

    S_p = safety * constants["S_p"]
    S_inf = safety * constants["S_inf"]
    C = apriori_constant(sigma, m, p, S_p, S_inf)
    h1 = spinor_h1(sol.u)
    mc2 = m * sol.c**2
    floor = mc2 - 2 * S_p * C ** ((p - 2) / 2) - slack * mc2
    rep = BoundReport(C, h1, sigma, S_p, S_inf, safety, sol.omega, floor, h1 < C, sol.omega >= floor)
    if raise_on_fail and not rep.passed:
        raise BoundViolated(f"|u|_H1={h1:.4g} vs C={C:.4g}; omega={sol.omega:.6g} vs floor={floor:.6g}")
    return rep


def average_matrix(mesh: Mesh):
    return _average_matrix(mesh)
