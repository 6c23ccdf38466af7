"""Dense symmetric kernels: SPD factorization, generalized eigenproblems, norms.

Everything downstream (projections, operator norms, inf-sup constants) reduces
to three primitives on double-precision dense matrices:

* ``spd_factor``        -- Cholesky factorization of a symmetric positive
                           definite matrix, with solves.
* ``sym_generalized_eigs`` -- all eigenpairs of ``A v = lambda G v`` with A
                           symmetric and G SPD, via reduction to standard
                           symmetric form with the Cholesky factor of G.
* ``subordinate_norm``  -- the operator norm of a matrix between two
                           inner-product spaces, i.e. the largest Rayleigh
                           quotient ``sqrt(x^T T^T G_cod T x / x^T G_dom x)``.

Intended scale is "desk size" (dimensions up to a couple thousand); no sparse
formats, no iterative solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

# Relative tolerance for accepting a matrix as symmetric; inputs within the
# tolerance are symmetrized to keep assembly round-off from tripping errors.
SYMMETRY_RTOL = 1e-12

# Relative singular-value threshold below which directions count as dependent.
RANK_RTOL = 1e-10


class LinalgError(Exception):
    """Base class for numerical-kernel failures."""


class NotSymmetric(LinalgError):
    """Matrix expected to be symmetric is not, beyond round-off."""


class NotPositiveDefinite(LinalgError):
    """Matrix expected to be SPD has a non-positive pivot.

    ``pivot`` is the zero-based index of the failing Cholesky pivot; it points
    at the leading minor that certifies indefiniteness.
    """

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class DimensionMismatch(LinalgError):
    """Operands have incompatible shapes."""


def as_matrix(a, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce ``a`` to a float64 2-d array with finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got array of ndim {m.ndim}")
    if not np.all(np.isfinite(m)):
        raise LinalgError("matrix has non-finite entries")
    if rows is not None and m.shape[0] != rows:
        raise DimensionMismatch(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionMismatch(f"expected {cols} columns, got {m.shape[1]}")
    return m


def require_symmetric(a, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Check symmetry within ``rtol`` (relative to the largest entry), then
    return the symmetrized matrix (A + A^T)/2."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {m.shape}")
    if m.size:
        scale = np.abs(m).max()
        gap = np.abs(m - m.T).max()
        if gap > rtol * max(scale, 1e-300):
            raise NotSymmetric(f"asymmetry {gap:.3e} exceeds {rtol:.1e} * {scale:.3e}")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class SpdFactorization:
    """Cholesky factorization ``source = factor @ factor.T`` (factor lower)."""

    source: np.ndarray
    factor: np.ndarray

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``source @ x = rhs`` (vector or matrix right-hand side)."""
        y = self.lower_solve(rhs)
        return self.lower_t_solve(y)

    def lower_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``factor @ y = rhs``."""
        if self.dim == 0:
            return np.zeros_like(np.asarray(rhs, dtype=float))
        return solve_triangular(self.factor, np.asarray(rhs, dtype=float), lower=True)

    def lower_t_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``factor.T @ y = rhs``."""
        if self.dim == 0:
            return np.zeros_like(np.asarray(rhs, dtype=float))
        return solve_triangular(self.factor.T, np.asarray(rhs, dtype=float), lower=False)


def spd_factor(m) -> SpdFactorization:
    """Factor a symmetric positive definite matrix.

    Raises ``NotSymmetric`` for asymmetric input and ``NotPositiveDefinite``
    (carrying the failing pivot index) for indefinite input.  The column-wise
    Cholesky keeps the pivot index exact; BLAS does the inner updates.
    """
    a = require_symmetric(m)
    n = a.shape[0]
    lower = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - lower[j, :j] @ lower[j, :j]
        if not np.isfinite(d) or d <= 0.0:
            raise NotPositiveDefinite(j)
        lower[j, j] = np.sqrt(d)
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return SpdFactorization(source=a, factor=lower)


def sym_generalized_eigs(a, g) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of ``A v = lambda G v`` with A symmetric, G SPD.

    Returns eigenvalues in descending order and eigenvectors as columns,
    G-orthonormal (``V.T @ G @ V = I``).  The problem is reduced to standard
    symmetric form ``L^{-1} A L^{-T}`` with the Cholesky factor of G, which is
    unconditionally stable at the intended scale.
    """
    a = require_symmetric(a)
    fac = spd_factor(g)
    if a.shape[0] != fac.dim:
        raise DimensionMismatch(f"A is {a.shape[0]}x{a.shape[0]} but G is {fac.dim}x{fac.dim}")
    if fac.dim == 0:
        return np.zeros(0), np.zeros((0, 0))
    reduced = fac.lower_solve(fac.lower_solve(a).T)
    reduced = 0.5 * (reduced + reduced.T)
    values, vecs = np.linalg.eigh(reduced)
    order = np.argsort(values)[::-1]
    values = values[order]
    vecs = fac.lower_t_solve(vecs[:, order])
    return values, vecs


def subordinate_norm(t, g_dom, g_cod) -> float:
    """Operator norm of ``t`` between the spaces with Grams g_dom and g_cod.

    Equals the square root of the largest generalized eigenvalue of
    ``(t^T G_cod t, G_dom)``; the maximizing direction is the top eigenvector.
    """
    t = as_matrix(t)
    g_dom = as_matrix(g_dom)
    g_cod = as_matrix(g_cod)
    if t.shape != (g_cod.shape[0], g_dom.shape[0]):
        raise DimensionMismatch(
            f"operator {t.shape} incompatible with Grams {g_dom.shape} -> {g_cod.shape}"
        )
    if t.shape[1] == 0:
        return 0.0
    quad = t.T @ g_cod @ t
    values, _ = sym_generalized_eigs(0.5 * (quad + quad.T), g_dom)
    return float(np.sqrt(max(values[0], 0.0)))


def singular_values(a) -> np.ndarray:
    m = as_matrix(a)
    if 0 in m.shape:
        return np.zeros(0)
    return np.linalg.svd(m, compute_uv=False)


def numerical_rank(a, rtol: float = RANK_RTOL) -> int:
    s = singular_values(a)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def least_squares(a, b) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution of ``a x = b`` and the euclidean
    residual norm ``|a x - b|`` (largest over columns for matrix b)."""
    a = as_matrix(a)
    b = np.asarray(b, dtype=float)
    x, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    resid = a @ x - b
    if resid.ndim == 1:
        return x, float(np.linalg.norm(resid))
    if resid.shape[1] == 0:
        return x, 0.0
    return x, float(np.linalg.norm(resid, axis=0).max())
