"""Spectral splitting of the reduced Dirac matrix.

Two backends share one interface:

* ``dense``  -- full eigendecomposition (default up to 3000 reduced DOFs);
  projectors and ``|D|`` come straight from the eigenbasis.
* ``sign``   -- matrix-free.  ``S^2`` is block diagonal, so
  ``sign(S) = S (S^2)^{-1/2}`` with ``A^{-1/2}`` evaluated by the midpoint rule
  on ``A^{-1/2} = (2 sqrt(a) / pi) int_0^{pi/2} (A cos^2 t + a sin^2 t)^{-1} dt``
  (one sparse factorisation per node, reused for every field).
  A window of gap-adjacent eigenpairs can still be requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EigFailure
from .operators import DiracOperator

DENSE_LIMIT = 3000
GAP_TOL = 1e-8


class _InverseSqrt:
    """``v -> A^{-1/2} v`` for sparse SPD ``A`` with spectrum in ``[lo, hi]``."""

    def __init__(self, A: sp.spmatrix, lo: float, hi: float, tol: float = 1e-13, max_nodes: int = 4096):
        self.A = sp.csc_matrix(A)
        self.a = float(np.sqrt(lo * hi))
        self.tol = tol
        self.max_nodes = max_nodes
        self._nodes: list[tuple[float, object]] = []
        self._n = 0
        self._calibrate(lo, hi)

    def _calibrate(self, lo: float, hi: float) -> None:
        # pick the node count on the scalar problem over the spectral interval
        lam = np.geomspace(lo, hi, 64)
        n = 8
        while True:
            t = (np.arange(n) + 0.5) * (np.pi / 2) / n
            approx = (2 * np.sqrt(self.a) / np.pi) * np.sum(
                (np.pi / 2 / n) / (lam[:, None] * np.cos(t) ** 2 + self.a * np.sin(t) ** 2), axis=1
            )
            err = np.max(np.abs(approx * np.sqrt(lam) - 1.0))
            if err < self.tol or n >= self.max_nodes:
                break
            n *= 2
        if err >= self.tol:
            raise EigFailure(f"inverse square root quadrature did not reach {self.tol:g} (err={err:.1e})")
        self._n = n
        I = sp.identity(self.A.shape[0], format="csc")
        for tk in (np.arange(n) + 0.5) * (np.pi / 2) / n:
            lu = spla.splu(sp.csc_matrix(self.A * np.cos(tk) ** 2 + self.a * np.sin(tk) ** 2 * I))
            self._nodes.append((tk, lu))

    @property
    def node_count(self) -> int:
        return self._n

    def __call__(self, v: np.ndarray) -> np.ndarray:
        w = (np.pi / 2) / self._n
        out = np.zeros_like(v, dtype=np.result_type(v, float))
        for _, lu in self._nodes:
            out = out + lu.solve(v)
        return (2 * np.sqrt(self.a) / np.pi) * w * out


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    op: DiracOperator
    method: str
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None
    _inv_sqrt: tuple | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.op.dim

    @cached_property
    def positive(self) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues > 0)

    @cached_property
    def negative(self) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues < 0)

    @cached_property
    def V_plus(self) -> np.ndarray:
        return self.eigenvectors[:, self.positive]

    @cached_property
    def V_minus(self) -> np.ndarray:
        return self.eigenvectors[:, self.negative]

    def coefficients(self, y: np.ndarray) -> np.ndarray:
        return self.eigenvectors.T @ y

    def _inv_abs_sqrt_apply(self, y: np.ndarray) -> np.ndarray:
        n1 = self.op.n1
        f1, f2 = self._inv_sqrt
        return np.concatenate([f1(y[:n1]), f2(y[n1:])])

    def sign(self, y: np.ndarray) -> np.ndarray:
        if self.method == "dense":
            coef = self.coefficients(y)
            return self.eigenvectors @ (np.sign(self.eigenvalues) * coef)
        return self.op.matrix @ self._inv_abs_sqrt_apply(y)

    def abs_apply(self, y: np.ndarray) -> np.ndarray:
        """``|D| y``."""
        if self.method == "dense":
            coef = self.coefficients(y)
            return self.eigenvectors @ (np.abs(self.eigenvalues) * coef)
        return self.op.matrix @ self.sign(y)

    def window(self, k: int) -> np.ndarray:
        """The ``k`` eigenvalues closest to the gap (sorted).

        Ties between ``+mc^2`` and ``-mc^2`` may be resolved either way.
        """
        if self.method == "dense":
            idx = np.argsort(np.abs(self.eigenvalues))[:k]
            return np.sort(self.eigenvalues[idx])
        # S^2 = diag(A1, A2): the positive spectrum is +sqrt(spec A1), the negative -sqrt(spec A2)
        f1, f2 = self._inv_sqrt
        vals = np.concatenate([np.sqrt(_lowest(f1.A, k)), -np.sqrt(_lowest(f2.A, k))])
        return np.sort(vals[np.argsort(np.abs(vals), kind="stable")[:k]])


def _lowest(A: sp.spmatrix, k: int, tol: float = 1e-12, max_iter: int = 5000) -> np.ndarray:
    """``k`` smallest eigenvalues of sparse SPD ``A`` with multiplicity.

    Block inverse iteration with Rayleigh-Ritz: a block wider than the
    largest cluster resolves repeated eigenvalues that single-vector Lanczos
    can miss.
    """
    n = A.shape[0]
    k = min(k, n)
    b = min(2 * k + 10, n)
    if n <= 4 * b:
        return np.sort(np.linalg.eigvalsh(A.toarray()))[:k]
    lu = spla.splu(sp.csc_matrix(A))
    # residuals bottom out at rounding level; eigenvalue error is quadratic in them
    floor = 64 * np.finfo(float).eps * spla.norm(A, 1)
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((n, b)))
    for _ in range(max_iter):
        Q, _ = np.linalg.qr(lu.solve(Q))
        AQ = A @ Q
        theta, W = np.linalg.eigh(Q.T @ AQ)
        Q, AQ = Q @ W, AQ @ W
        res = np.linalg.norm(AQ[:, :k] - Q[:, :k] * theta[:k], axis=0)
        if np.all(res <= np.maximum(tol * theta[:k], floor)):
            return theta[:k]
    raise EigFailure(f"block inverse iteration stalled (residual {res.max():.1e})")


def eigendecompose(op: DiracOperator, method: str = "auto") -> SpectralDecomposition:
    """Spectral decomposition of the reduced Dirac matrix.

    ``method`` is ``"dense"``, ``"sign"`` or ``"auto"`` (dense up to
    ``DENSE_LIMIT`` reduced DOFs).
    """
    if method == "auto":
        method = "dense" if op.dim <= DENSE_LIMIT else "sign"
    mc2 = op.rest_energy
    if method == "dense":
        try:
            vals, vecs = sla.eigh(op.dense())
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise EigFailure(str(exc)) from exc
        if np.min(np.abs(vals)) < mc2 * (1 - GAP_TOL):
            raise EigFailure(f"eigenvalue {np.min(np.abs(vals))!r} inside the gap of half-width {mc2!r}")
        return SpectralDecomposition(op, "dense", vals, vecs)
    if method != "sign":
        raise ValueError(f"unknown method {method!r}")

    B = op.basis.B
    c, m = op.c, op.m
    smax2 = float(spla.norm(B, 1) * spla.norm(B, np.inf))  # bound on |B|^2
    lo, hi = (m * c * c) ** 2, (m * c * c) ** 2 + c * c * smax2
    n1, n2 = op.basis.n1, op.basis.n2
    A1 = (m * c * c) ** 2 * sp.identity(n1) + c * c * (B.T @ B)
    A2 = (m * c * c) ** 2 * sp.identity(n2) + c * c * (B @ B.T)
    inv = (_InverseSqrt(A1, lo, hi), _InverseSqrt(A2, lo, hi))
    return SpectralDecomposition(op, "sign", _inv_sqrt=inv)


def project(dec: SpectralDecomposition, y: np.ndarray, sign: int | str) -> np.ndarray:
    """Positive (``+1``/``"+"``) or negative (``-1``/``"-"``) spectral part of ``y``."""
    s = {"+": 1, "-": -1}.get(sign, sign)
    if s not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if dec.method == "dense":
        V = dec.V_plus if s > 0 else dec.V_minus
        return V @ (V.T @ y)
    return 0.5 * (y + s * dec.sign(y))


def split(dec: SpectralDecomposition, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    yp = project(dec, y, 1)
    return yp, y - yp


def c_inner(dec: SpectralDecomposition, y: np.ndarray, z: np.ndarray) -> float:
    """``(y, z)_c = Re <|D|^{1/2} y, |D|^{1/2} z>``."""
    return float(np.real(np.vdot(y, dec.abs_apply(z))))


def c_norm(dec: SpectralDecomposition, y: np.ndarray) -> float:
    if dec.method == "dense":
        coef = dec.coefficients(y)
        return float(np.sqrt(np.sum(np.abs(dec.eigenvalues) * np.abs(coef) ** 2)))
    return float(np.sqrt(max(c_inner(dec, y, y), 0.0)))
