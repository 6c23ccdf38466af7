"""Nonconforming variational methods with smoothing.

A method is the triple (S, b, E): the discrete space S, a nondegenerate
discrete bilinear form b on S x S, and a smoother E mapping S into the
continuous space V.  The discrete problem for a load functional ell reads

    find U in S such that  b(U, sigma) = <ell, E sigma>  for all sigma in S,

so the load enters only through the smoother.  This module solves the
discrete problem, builds the approximation operator P (exact solution ->
discrete solution), checks the structural properties a method may or may not
have (full algebraic consistency, the Galerkin restriction property,
injectivity of the smoother, representability of the identity smoother), and
constructs the two extensions on which the quasi-optimality analysis rests:

* the extended bilinear form ``b_ext`` on vhat x S, the unique common
  extension of b and of (v, sigma) -> a(v, E sigma); it exists exactly when
  the method is fully algebraically consistent;
* the extended projection ``p_ext`` from vhat onto S, characterized by
  b(p_ext x, sigma) = b_ext(x, sigma); it restricts to the identity on S and
  to P on V, and satisfies the generalized Galerkin orthogonality
  b_ext(x - p_ext x, sigma) = 0.

Coefficient conventions: b(s, sigma) = s_coeffs^T @ b_matrix @ sigma_coeffs
with the *trial* function in the first slot (the discrete problem places the
unknown there, so solves use the transpose), and smoother column j holds the
V-coefficients of E applied to the j-th S basis function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    LinalgError,
    as_matrix,
    least_squares,
    numerical_rank,
    singular_values,
    spd_factor,
)
from .spaces import (
    HilbertSetup,
    OperatorMatrix,
    Subspace,
    exact_coefficients,
    full_subspace,
    ritz_projection,
)

CONSISTENCY_TOL = 1e-9
NONDEGENERACY_RTOL = 1e-10


class DegenerateB(LinalgError):
    """The discrete bilinear form is (numerically) degenerate."""


class InconsistentMethod(LinalgError):
    """The method is not fully algebraically consistent, so no common
    extension of b and the smoothed load pairing exists."""


class SmootherUnavailable(LinalgError):
    """The requested smoother cannot be realized as a map into V."""


@dataclass(frozen=True)
class MethodSpec:
    """Discrete method (S, b, E) over a HilbertSetup."""

    setup: HilbertSetup
    b_matrix: np.ndarray
    smoother: np.ndarray

    def __post_init__(self):
        k = self.setup.s.dim
        b = as_matrix(self.b_matrix, rows=k, cols=k)
        object.__setattr__(self, "b_matrix", b)
        object.__setattr__(
            self, "smoother", as_matrix(self.smoother, rows=self.setup.v.dim, cols=k)
        )
        svals = singular_values(b)
        if svals.size and svals[-1] <= NONDEGENERACY_RTOL * svals[0]:
            raise DegenerateB(f"b is degenerate (sv ratio {svals[-1] / svals[0]:.2e})")

    def consistency_scale(self) -> float:
        """Magnitude reference for consistency residuals across differently
        scaled problems."""
        scale = max(
            np.abs(self.b_matrix).max(initial=0.0),
            np.abs(self.setup.v.induced_gram()).max(initial=0.0),
        )
        return max(scale, 1e-300)


@dataclass(frozen=True)
class LoadFunctional:
    """Load given by its values on the V basis: values[i] = <ell, phi_i>."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise LinalgError("load values must be a finite vector")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ExtendedOperators:
    """Approximation operator with its extensions to vhat."""

    p: OperatorMatrix  # V coefficients -> S coefficients
    p_ext: OperatorMatrix  # ambient -> ambient, range inside S
    b_ext: np.ndarray  # rows: ambient basis, columns: S basis
    p_ext_s: np.ndarray  # ambient -> S coefficients


@dataclass(frozen=True)
class ConsistencyCheck:
    ok: bool
    residual: float  # max gap |b(u, sigma) - a(u, E sigma)| over basis pairs
    projection_residual: float  # max energy error of P u = u on S cap V


@dataclass(frozen=True)
class SmootherDiagnostics:
    injective: bool
    smoother_rank: int
    method_range_rank: int

    def __bool__(self) -> bool:
        return self.injective


def load_dual_norm(setup: HilbertSetup, load: LoadFunctional) -> float:
    """Dual energy norm of the load, sqrt(values^T G_V^{-1} values); equals
    the energy norm of the exact solution."""
    fac = spd_factor(setup.v.induced_gram())
    return float(np.sqrt(max(load.values @ fac.solve(load.values), 0.0)))


def riesz_load(setup: HilbertSetup, v_coeffs: np.ndarray) -> LoadFunctional:
    """The functional a(v, .) for v given by V coefficients."""
    return LoadFunctional(values=setup.v.induced_gram() @ np.asarray(v_coeffs, dtype=float))


def solve_discrete(m: MethodSpec, load: LoadFunctional) -> np.ndarray:
    """S coefficients of the discrete solution: b(U, sigma_j) = <ell, E sigma_j>."""
    if load.values.shape[0] != m.setup.v.dim:
        raise LinalgError("load length does not match the V basis")
    rhs = m.smoother.T @ load.values
    return np.linalg.solve(m.b_matrix.T, rhs)


def approximation_operator(m: MethodSpec) -> OperatorMatrix:
    """The operator P sending exact solutions to discrete ones.

    Column j solves the discrete problem with load a(phi_j, .), hence
    P = B^{-T} E^T G_V in coefficients.
    """
    g_v = m.setup.v.induced_gram()
    matrix = np.linalg.solve(m.b_matrix.T, m.smoother.T @ g_v)
    return OperatorMatrix(matrix=matrix, domain=m.setup.v, codomain=m.setup.s)


def derive_smoother(setup: HilbertSetup, p_matrix: np.ndarray, b_matrix: np.ndarray) -> np.ndarray:
    """Unique smoother E with a(v, E sigma) = b(P v, sigma) for all v, so the
    induced approximation operator reproduces the prescribed P."""
    p_matrix = as_matrix(p_matrix, rows=setup.s.dim, cols=setup.v.dim)
    fac = spd_factor(setup.v.induced_gram())
    return fac.solve(p_matrix.T @ as_matrix(b_matrix, rows=setup.s.dim, cols=setup.s.dim))


def consistency_correction(
    setup: HilbertSetup, b_matrix: np.ndarray, smoother: np.ndarray
) -> np.ndarray:
    """Minimally correct a smoother so the method (S, b, E) becomes fully
    algebraically consistent.

    The correction of E sigma is the orthogonal projection onto S cap V of the
    consistency defect, so smoothers that already fix the conforming part stay
    fixed there and consistent methods are returned unchanged.
    """
    uc = setup.s_conforming
    if uc.dim == 0:
        return np.array(smoother, dtype=float)
    uc_s = exact_coefficients(setup.s, uc.basis)
    uc_v = exact_coefficients(setup.v, uc.basis)
    g_v = setup.v.induced_gram()
    defect = uc_s.T @ b_matrix - uc_v.T @ (g_v @ smoother)
    conf_coeffs = spd_factor(uc.induced_gram()).solve(defect)
    return smoother + uc_v @ conf_coeffs


def check_full_consistency(m: MethodSpec) -> ConsistencyCheck:
    """Whether b(u, sigma) = a(u, E sigma) for every u in S cap V and sigma in
    S, together with the equivalent property P u = u on S cap V."""
    uc = m.setup.s_conforming
    if uc.dim == 0:
        return ConsistencyCheck(ok=True, residual=0.0, projection_residual=0.0)
    uc_s = exact_coefficients(m.setup.s, uc.basis)
    uc_v = exact_coefficients(m.setup.v, uc.basis)
    g_v = m.setup.v.induced_gram()
    gap = uc_s.T @ m.b_matrix - uc_v.T @ (g_v @ m.smoother)
    residual = float(np.abs(gap).max(initial=0.0))

    p = approximation_operator(m)
    proj_gap = m.setup.s.basis @ (p.matrix @ uc_v - uc_s)
    proj_residual = 0.0
    for k in range(uc.dim):
        err = m.setup.vhat.norm(proj_gap[:, k]) / max(1.0, m.setup.vhat.norm(uc.basis[:, k]))
        proj_residual = max(proj_residual, err)

    ok = residual <= CONSISTENCY_TOL * m.consistency_scale() and proj_residual <= 1e-8
    return ConsistencyCheck(ok=ok, residual=residual, projection_residual=proj_residual)


def assemble_bext(m: MethodSpec) -> np.ndarray:
    """Assemble the extended bilinear form on vhat x S.

    Row i, column j holds b_ext(phi_i, sigma_j) in the ambient basis.  The
    assembly solves, for each sigma_j, the functional interpolation problem
    constrained on V by a(., E sigma_j) and on S by b(., sigma_j); the stacked
    system is solvable exactly when the method is fully algebraically
    consistent, and any residual beyond round-off certifies inconsistency.
    """
    check = check_full_consistency(m)
    if not check.ok:
        raise InconsistentMethod(
            f"no common extension exists (consistency residual {check.residual:.3e})"
        )
    setup = m.setup
    stacked = np.vstack([setup.v.basis.T, setup.s.basis.T])
    rhs = np.vstack([setup.v.induced_gram() @ m.smoother, m.b_matrix])
    b_ext, resid = least_squares(stacked, rhs)
    if resid > CONSISTENCY_TOL * m.consistency_scale():
        raise InconsistentMethod(f"extension residual {resid:.3e} beyond tolerance")
    return b_ext


def extended_projection(m: MethodSpec) -> ExtendedOperators:
    """Extend P to the projection of vhat onto S characterized by
    b(p_ext x, sigma) = b_ext(x, sigma) for all sigma.

    One nondegenerate S-solve per ambient basis vector; the construction
    doubles as a numerical check of the generalized Galerkin orthogonality.
    """
    b_ext = assemble_bext(m)
    p = approximation_operator(m)
    p_ext_s = np.linalg.solve(m.b_matrix.T, b_ext.T)
    ambient = m.setup.s.basis @ p_ext_s
    p_ext = OperatorMatrix(
        matrix=ambient,
        domain=full_subspace(m.setup.vhat),
        codomain=full_subspace(m.setup.vhat),
    )
    return ExtendedOperators(p=p, p_ext=p_ext, b_ext=b_ext, p_ext_s=p_ext_s)


def check_smoother_injectivity(m: MethodSpec) -> SmootherDiagnostics:
    """Injectivity of the smoother, which holds exactly when the range of the
    method is all of S; the realized range rank is computed from P over the
    spanning family of Riesz loads."""
    svals = singular_values(m.smoother)
    injective = bool(svals.size and svals[-1] > NONDEGENERACY_RTOL * svals[0])
    p = approximation_operator(m)
    return SmootherDiagnostics(
        injective=injective,
        smoother_rank=numerical_rank(m.smoother),
        method_range_rank=numerical_rank(p.matrix),
    )


def check_nonconforming_galerkin(m: MethodSpec) -> bool:
    """Whether b and the load map restrict to the continuous problem on the
    conforming part: b = a on (S cap V)^2 and E u = u for u in S cap V."""
    uc = m.setup.s_conforming
    if uc.dim == 0:
        return True
    uc_s = exact_coefficients(m.setup.s, uc.basis)
    uc_v = exact_coefficients(m.setup.v, uc.basis)
    form_gap = np.abs(uc_s.T @ m.b_matrix @ uc_s - uc.induced_gram()).max()
    if form_gap > CONSISTENCY_TOL * m.consistency_scale():
        return False
    smoothed = m.setup.v.basis @ (m.smoother @ uc_s)
    for k in range(uc.dim):
        err = m.setup.vhat.norm(smoothed[:, k] - uc.basis[:, k])
        if err > CONSISTENCY_TOL * max(1.0, m.setup.vhat.norm(uc.basis[:, k])):
            return False
    return True


def check_id_smoother_representability(setup: HilbertSetup) -> np.ndarray:
    """Energy distance of each S basis function from V.

    A residual above 1e-8 certifies that the identity smoother cannot be
    realized as a map into V for that direction; conforming directions give
    zero.
    """
    residuals = np.zeros(setup.s.dim)
    for k in range(setup.s.dim):
        _, residuals[k] = setup.v.coefficients_of(setup.s.basis[:, k])
    return residuals


def ritz_method(setup: HilbertSetup) -> MethodSpec:
    """Method with b the restriction of the extended scalar product to S and
    the orthogonal projection onto V as smoother; its approximation operator
    is the best approximation onto S."""
    r_v = ritz_projection(setup, setup.v)
    return MethodSpec(
        setup=setup,
        b_matrix=setup.s.induced_gram(),
        smoother=r_v.matrix @ setup.s.basis,
    )


def identity_smoother(setup: HilbertSetup, tol: float = 1e-8) -> np.ndarray:
    """V-coefficients realizing E = id on S, available only when S is
    conforming; raises with the offending residuals otherwise."""
    residuals = check_id_smoother_representability(setup)
    if residuals.size and residuals.max() > tol:
        raise SmootherUnavailable(
            "identity smoother needs a conforming discrete space; "
            f"distance to V per basis column: {np.array2string(residuals, precision=3)}"
        )
    return exact_coefficients(setup.v, setup.s.basis)


def conforming_galerkin(setup: HilbertSetup) -> MethodSpec:
    """Classical Galerkin method for conforming S: b = a restricted to S and
    the identity smoother."""
    return MethodSpec(
        setup=setup,
        b_matrix=setup.s.induced_gram(),
        smoother=identity_smoother(setup),
    )
