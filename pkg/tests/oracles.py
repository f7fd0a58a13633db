"""Independent reference solutions used by the tests."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


# ---------------------------------------------------------------------------
# shooting oracle for the line graph (one edge of length ell between two half-lines)
#
# A symmetric bound state of -g'' - lam g = 2m chi_K g^{p-1} with lam = -kappa^2
# is g = a exp(-kappa x) on each half-line.  Integrating the core equation from
# the vertex with g = a, g' = kappa a (pointing into the core) the profile must
# reach g' = 0 exactly at the edge midpoint.


def _turning_point(a, kappa, m, p, xmax=50.0):
    def rhs(x, y):
        return [y[1], kappa**2 * y[0] - 2 * m * abs(y[0]) ** (p - 2) * y[0], y[0] ** 2]

    def ev(x, y):
        return y[1]

    ev.terminal = True
    ev.direction = -1
    sol = solve_ivp(rhs, [0, xmax], [a, kappa * a, 0.0], rtol=1e-13, atol=1e-16, method="DOP853", events=ev)
    if not sol.t_events[0].size:
        return xmax, None
    return sol.t_events[0][0], sol.y_events[0][0]


def line_mass(kappa, m, p, ell=1.0):
    """Mass of the symmetric profile with decay rate ``kappa``."""

    def f(a):
        return _turning_point(a, kappa, m, p)[0] - ell / 2

    lo, hi = 1e-3, 1.0
    while f(hi) > 0:
        hi *= 2
    while f(lo) < 0:
        lo /= 4
    a = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)
    _, y = _turning_point(a, kappa, m, p)
    return 2 * y[2] + a * a / kappa


def line_lambda(m, p, ell=1.0, mass=1.0):
    """Multiplier of the normalized symmetric bound state; ``None`` if the mass is not attained."""

    def f(k):
        return line_mass(k, m, p, ell) - mass

    ks = np.geomspace(0.02, 60, 25)
    vals = [f(k) for k in ks]
    for i in range(len(vals) - 1):
        if np.sign(vals[i]) != np.sign(vals[i + 1]):
            k = brentq(f, ks[i], ks[i + 1], xtol=1e-14, rtol=1e-14)
            return -k * k
    return None


# ---------------------------------------------------------------------------
# secular equation for a compact star with Dirichlet tips and Kirchhoff centre


def star_dirichlet_eigenvalues(lengths, count, k_max=20.0, grid=20000):
    """Lowest ``count`` eigenvalues, by bisection on ``sum cot(k l_i)`` plus degenerate roots.

    Continuity ``A_i sin(k l_i) = phi`` and the flux sum ``sum A_i cos(k l_i) = 0``
    give ``sum cot(k l_i) = 0`` when no ``sin(k l_i)`` vanishes.  When ``r >= 2``
    edges have ``sin(k l_i) = 0`` the eigenvalue has multiplicity ``r - 1``.
    """
    lengths = np.asarray(lengths, float)

    def f(k):
        return float(np.sum(np.cos(k * lengths) / np.sin(k * lengths)))

    roots = []
    ks = np.linspace(1e-6, k_max, grid)
    vals = np.array([f(k) for k in ks])
    for i in range(grid - 1):
        a, b = vals[i], vals[i + 1]
        # the secular function decreases between poles, so a root is a + -> - crossing
        if a > 0 and b < 0:
            roots.append(brentq(f, ks[i], ks[i + 1], xtol=1e-15))
    # degenerate roots k = n pi / l shared by several edges
    cand = {}
    for ell in lengths:
        n = 1
        while n * math.pi / ell <= k_max:
            k = round(n * math.pi / ell, 12)
            cand[k] = cand.get(k, 0) + 1
            n += 1
    for k, r in cand.items():
        roots.extend([k] * (r - 1))
    return sorted(k * k for k in roots)[:count]
