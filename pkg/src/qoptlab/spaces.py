"""Finite-dimensional inner-product spaces, subspaces, projections and angles.

A ``GramSpace`` is a space of coefficient vectors together with an SPD Gram
matrix encoding the scalar product of the basis; the induced norm plays the
role of the (extended) energy norm.  A ``Subspace`` stores its basis as
coefficient columns in the ambient basis, deliberately *not* orthonormalized
so that model formulas stay readable; orthonormal bases are derived on demand.

``HilbertSetup`` bundles the ambient extended space together with the
continuous space V, the discrete space S and their intersection, and is the
geometric input of every method/analysis computation: orthogonal (Ritz)
projections, orthogonal complements, principal angles and intersections.

The continuous space V is a finite-dimensional proxy; computed suprema are
restrictions of the true ones to the proxy and reports carry the proxy
dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    RANK_RTOL,
    DimensionMismatch,
    LinalgError,
    SpdFactorization,
    as_matrix,
    least_squares,
    spd_factor,
    subordinate_norm,
)

# Cosines at least this close to 1 mean the subspaces share a direction and the
# angle is reported as degenerate (data, not an error).
DEGENERATE_COS = 1.0 - 1e-12

MEMBERSHIP_TOL = 1e-10


class TrivialSubspace(LinalgError):
    """An operation that needs a nontrivial subspace got dimension zero."""


@dataclass(frozen=True)
class GramSpace:
    """Coefficient space with SPD Gram matrix; gram[i, j] is the scalar
    product of basis vectors i and j."""

    gram: np.ndarray
    label: str = ""
    factorization: SpdFactorization = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gram = as_matrix(self.gram)
        fac = spd_factor(gram)  # validates symmetry and definiteness
        object.__setattr__(self, "gram", fac.source)
        object.__setattr__(self, "factorization", fac)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def inner(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.asarray(x, dtype=float) @ self.gram @ np.asarray(y, dtype=float))

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(x, x), 0.0)))


@dataclass(frozen=True)
class Subspace:
    """Subspace of a GramSpace, spanned by the columns of ``basis`` (ambient
    coefficients).  Columns must be linearly independent."""

    ambient: GramSpace
    basis: np.ndarray
    tag: str = "other"

    def __post_init__(self):
        basis = as_matrix(self.basis, rows=self.ambient.dim)
        object.__setattr__(self, "basis", basis)
        if basis.shape[1]:
            # independence is judged in the geometry of the ambient scalar
            # product (whitened basis), where the threshold is scale-free
            white = self.ambient.factorization.factor.T @ basis
            svals = np.linalg.svd(white, compute_uv=False)
            if svals[-1] <= RANK_RTOL * svals[0]:
                raise LinalgError(
                    f"basis columns nearly dependent (sv ratio {svals[-1] / svals[0]:.2e})"
                )

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def induced_gram(self) -> np.ndarray:
        g = self.basis.T @ self.ambient.gram @ self.basis
        return 0.5 * (g + g.T)

    def orthonormal_basis(self) -> np.ndarray:
        """Basis of the same span, orthonormal in the ambient scalar product."""
        if self.dim == 0:
            return self.basis
        fac = spd_factor(self.induced_gram())
        # columns of basis @ L^{-T} have Gram L^{-1} G L^{-T} = I
        return np.linalg.solve(fac.factor, self.basis.T).T

    def coefficients_of(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        """Coefficients of the orthogonal projection of ``x`` onto this
        subspace, plus the ambient-norm distance of x from the subspace.
        For members the distance vanishes and the coefficients are exact."""
        x = np.asarray(x, dtype=float)
        if self.dim == 0:
            return np.zeros(0), self.ambient.norm(x)
        fac = spd_factor(self.induced_gram())
        coeffs = fac.solve(self.basis.T @ (self.ambient.gram @ x))
        resid = x - self.basis @ coeffs
        return coeffs, self.ambient.norm(resid)


def full_subspace(space: GramSpace, tag: str = "other") -> Subspace:
    return Subspace(ambient=space, basis=np.eye(space.dim), tag=tag)


@dataclass(frozen=True)
class OperatorMatrix:
    """Linear map between subspaces in coefficient form: ``matrix`` sends
    domain coefficients to codomain coefficients."""

    matrix: np.ndarray
    domain: Subspace
    codomain: Subspace

    def __post_init__(self):
        object.__setattr__(
            self, "matrix", as_matrix(self.matrix, rows=self.codomain.dim, cols=self.domain.dim)
        )

    def norm(self) -> float:
        """Subordinate norm with the induced Grams of domain and codomain."""
        return subordinate_norm(self.matrix, self.domain.induced_gram(), self.codomain.induced_gram())


@dataclass(frozen=True)
class AngleResult:
    """Principal angle between two subspaces; ``degenerate`` flags cosines at
    unity (shared directions), reported as data rather than an error."""

    radians: float
    cosine: float
    degenerate: bool


@dataclass(frozen=True)
class HilbertSetup:
    """Extended space vhat = V + S with its distinguished subspaces.

    V and the nonconforming part of S must together span the ambient space,
    and every column of the conforming basis must lie in both V and S.
    """

    vhat: GramSpace
    v: Subspace
    s: Subspace
    s_conforming: Subspace

    def __post_init__(self):
        for sub in (self.v, self.s, self.s_conforming):
            if sub.ambient is not self.vhat and not np.array_equal(sub.ambient.gram, self.vhat.gram):
                raise DimensionMismatch("subspace ambient does not match vhat")
        stacked = np.hstack([self.v.basis, self.s.basis])
        white = self.vhat.factorization.factor.T @ stacked
        svals = np.linalg.svd(white, compute_uv=False) if white.size else np.zeros(0)
        rank = int(np.count_nonzero(svals > RANK_RTOL * svals[0])) if svals.size else 0
        if rank != self.vhat.dim:
            raise LinalgError(f"V + S spans rank {rank} < ambient dimension {self.vhat.dim}")
        for k in range(self.s_conforming.dim):
            col = self.s_conforming.basis[:, k]
            for sub, name in ((self.v, "V"), (self.s, "S")):
                _, dist = sub.coefficients_of(col)
                if dist > MEMBERSHIP_TOL * max(1.0, self.vhat.norm(col)):
                    raise LinalgError(f"conforming basis column {k} lies outside {name} (distance {dist:.2e})")


def ritz_projection(setup: HilbertSetup, target: Subspace) -> OperatorMatrix:
    """Orthogonal projection onto ``target`` in the ambient scalar product.

    The returned map sends ambient coefficients to target coefficients; the
    residual x - basis @ R @ x is orthogonal to the target, and members are
    reproduced exactly.
    """
    if target.dim == 0:
        matrix = np.zeros((0, setup.vhat.dim))
    else:
        fac = spd_factor(target.induced_gram())
        matrix = fac.solve(target.basis.T @ setup.vhat.gram)
    return OperatorMatrix(matrix=matrix, domain=full_subspace(setup.vhat), codomain=target)


def _complement_basis(space: GramSpace, basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis (ambient scalar product) of the orthogonal complement
    of span(basis)."""
    lf = space.factorization.factor
    white = lf.T @ basis
    n, k = space.dim, basis.shape[1]
    if k == 0:
        q_comp = np.eye(n)
    else:
        u, svals, _ = np.linalg.svd(white, full_matrices=True)
        rank = int(np.count_nonzero(svals > RANK_RTOL * svals[0])) if svals.size else 0
        q_comp = u[:, rank:]
    if q_comp.shape[1] == 0:
        return np.zeros((n, 0))
    return np.linalg.solve(lf.T, q_comp)


def orthogonal_complement(setup: HilbertSetup, y: Subspace) -> Subspace:
    """Orthogonal complement of ``y`` in vhat, with orthonormal basis."""
    comp = _complement_basis(setup.vhat, y.basis)
    return Subspace(ambient=setup.vhat, basis=comp, tag="other")


def subspace_angle(setup: HilbertSetup, y1: Subspace, y2: Subspace) -> AngleResult:
    """Smallest principal angle between two nontrivial subspaces.

    The cosine is the largest singular value of the cross-Gram of orthonormal
    bases, clamped to [0, 1]; a cosine at unity is flagged degenerate.
    """
    if y1.dim == 0 or y2.dim == 0:
        raise TrivialSubspace("angle needs two nontrivial subspaces")
    cross = y1.orthonormal_basis().T @ setup.vhat.gram @ y2.orthonormal_basis()
    cos = float(np.clip(np.linalg.svd(cross, compute_uv=False)[0], 0.0, 1.0))
    return AngleResult(radians=float(np.arccos(cos)), cosine=cos, degenerate=cos >= DEGENERATE_COS)


def intersect_subspaces(setup: HilbertSetup, y1: Subspace, y2: Subspace) -> Subspace:
    """Intersection of two subspaces via the null space of the stacked-basis
    system [B1 | -B2]; may be zero-dimensional."""
    if y1.dim == 0 or y2.dim == 0:
        return Subspace(ambient=setup.vhat, basis=np.zeros((setup.vhat.dim, 0)), tag="other")
    b1 = y1.orthonormal_basis()
    b2 = y2.orthonormal_basis()
    lf = setup.vhat.factorization.factor
    stacked = np.hstack([lf.T @ b1, -(lf.T @ b2)])
    _, svals, vt = np.linalg.svd(stacked, full_matrices=True)
    null_count = stacked.shape[1] - (
        int(np.count_nonzero(svals > RANK_RTOL * svals[0])) if svals.size else 0
    )
    if null_count == 0:
        return Subspace(ambient=setup.vhat, basis=np.zeros((setup.vhat.dim, 0)), tag="other")
    null_vectors = vt[vt.shape[0] - null_count :, :].T
    basis = b1 @ null_vectors[: y1.dim, :]
    # re-orthonormalize the projected null directions in the ambient product
    sub = Subspace(ambient=setup.vhat, basis=basis, tag="other")
    return Subspace(ambient=setup.vhat, basis=sub.orthonormal_basis(), tag="other")


def membership_residuals(sub: Subspace, vectors: np.ndarray) -> np.ndarray:
    """Ambient-norm distance of each column of ``vectors`` from ``sub``."""
    vectors = as_matrix(vectors, rows=sub.ambient.dim)
    out = np.zeros(vectors.shape[1])
    for k in range(vectors.shape[1]):
        _, out[k] = sub.coefficients_of(vectors[:, k])
    return out


def exact_coefficients(sub: Subspace, vectors: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Coefficients of columns of ``vectors`` that are members of ``sub``;
    raises if any column is farther than ``tol`` (relative) from the span."""
    vectors = as_matrix(vectors, rows=sub.ambient.dim)
    coeffs = np.zeros((sub.dim, vectors.shape[1]))
    for k in range(vectors.shape[1]):
        c, dist = sub.coefficients_of(vectors[:, k])
        scale = max(1.0, sub.ambient.norm(vectors[:, k]))
        if dist > tol * scale:
            raise LinalgError(f"column {k} is not a member (distance {dist:.2e})")
        coeffs[:, k] = c
    return coeffs


def euclidean_space(dim: int, label: str = "") -> GramSpace:
    return GramSpace(gram=np.eye(dim), label=label)


def span(space: GramSpace, columns, tag: str = "other") -> Subspace:
    """Subspace spanned by the given ambient coefficient columns."""
    basis = np.asarray(columns, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    return Subspace(ambient=space, basis=basis, tag=tag)


def least_squares_in_basis(basis: np.ndarray, vectors: np.ndarray) -> tuple[np.ndarray, float]:
    """Euclidean least-squares representation of ``vectors`` in ``basis``."""
    return least_squares(basis, vectors)
