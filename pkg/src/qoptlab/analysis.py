"""Stability and quasi-optimality constants, consistency measures, cross-checks.

For a fully algebraically consistent method the quasi-optimality constant is
the operator norm of the extended projection, and this module computes it by
three independent routes:

* ``opnorm``   -- subordinate norm of the extended projection on vhat;
* ``dualnorm`` -- sup over discrete test functions of the ratio between the
                  extended-dual norm of b_ext(., sigma) and the dual norm of
                  b(., sigma);
* ``angle``    -- 1/sin(alpha) with alpha the principal angle between S and
                  the range of (id - P) on V.

It also computes the stability constant (norm of the method from loads to
discrete solutions), the two consistency measures delta_V and delta_S
(restrictions of the extended projection to the orthogonal complements of S
and of V), the classical continuity/inf-sup upper bound, and the consistency
residual of a given exact solution.  Exact identities and two-sided bounds
relate all of these:

    c_qopt = sqrt(1 + delta_V^2) = |p_ext| = |id - p_ext| = 1/sin(alpha),
    max(c_stab, delta_S) <= c_qopt <= sqrt(c_stab^2 + delta_S^2) <= c_bext/beta,

and every identity is re-checked numerically; the gaps are collected in the
report and exposed as named checks.  Methods that are not fully consistent
get the infinity sentinel for all quasi-optimality quantities; infinities
never enter the linear algebra, only the report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import as_matrix, spd_factor, subordinate_norm, sym_generalized_eigs
from .method import (
    ExtendedOperators,
    MethodSpec,
    check_full_consistency,
    check_id_smoother_representability,
    check_nonconforming_galerkin,
    check_smoother_injectivity,
    extended_projection,
)
from .spaces import (
    GramSpace,
    HilbertSetup,
    Subspace,
    _complement_basis,
    orthogonal_complement,
    ritz_projection,
    subspace_angle,
)

INFINITY = float("inf")


@dataclass(frozen=True)
class ClassicalBound:
    c_bext: float  # continuity constant of the extended form
    beta: float  # inf-sup constant of b on S
    ratio: float


@dataclass(frozen=True)
class AngleRoute:
    c_qopt: float
    alpha: float  # radians, in (0, pi/2]
    degenerate: bool


@dataclass(frozen=True)
class RestrictionCheck:
    """Norm of an operator against the norms of its restrictions to a
    subspace and its orthogonal complement: max(c, delta) <= norm <=
    sqrt(c^2 + delta^2)."""

    c: float
    delta: float
    norm: float
    lower_ok: bool
    upper_ok: bool


@dataclass(frozen=True)
class StructureDiagnostics:
    nonconforming_galerkin: bool
    smoother_injective: bool
    smoother_rank: int
    method_range_rank: int
    id_smoother_residual_max: float


@dataclass(frozen=True)
class AnalysisReport:
    """Every constant of one method instance, with cross-check gaps.

    Infinite values mark methods that are not fully algebraically consistent
    (no finite quasi-optimality constant exists).  ``identity_residuals``
    holds the raw gap of each named identity/bound; ``proxy_dim`` records the
    dimension of the finite-dimensional stand-in for the continuous space.
    """

    c_stab: float
    c_qopt_opnorm: float
    c_qopt_dualnorm: float
    c_qopt_angle: float
    delta_v: float
    delta_s: float
    angle_alpha: float
    classical_bound: float
    inf_sup_beta: float
    continuity_cbext: float
    consistency_residual_sup: float
    identity_residuals: dict[str, float]
    proxy_dim: int
    consistent: bool
    form_scale: float
    structure: StructureDiagnostics


def b_dual_norm(m: MethodSpec, sigma: np.ndarray) -> float:
    """Dual norm of the functional b(., sigma) on S with the energy norm:
    sqrt(w^T G_S^{-1} w) with w_i = b(s_i, sigma)."""
    sigma = np.asarray(sigma, dtype=float)
    w = m.b_matrix @ sigma
    fac = spd_factor(m.setup.s.induced_gram())
    return float(np.sqrt(max(w @ fac.solve(w), 0.0)))


def _b_dual_gram(m: MethodSpec) -> np.ndarray:
    """Gram of sigma -> |b(., sigma)|_{S'}^2, i.e. B^T G_S^{-1} B."""
    fac = spd_factor(m.setup.s.induced_gram())
    h = m.b_matrix.T @ fac.solve(m.b_matrix)
    return 0.5 * (h + h.T)


def compute_cstab(m: MethodSpec) -> float:
    """Stability constant sup_sigma |E sigma| / |b(., sigma)|_{S'}, the norm
    of the method from the full dual space to S."""
    g_v = m.setup.v.induced_gram()
    num = m.smoother.T @ g_v @ m.smoother
    values, _ = sym_generalized_eigs(0.5 * (num + num.T), _b_dual_gram(m))
    return float(np.sqrt(max(values[0], 0.0)))


def compute_cqopt_opnorm(ops: ExtendedOperators, setup: HilbertSetup) -> float:
    """Quasi-optimality constant as the norm of the extended projection."""
    gram = setup.vhat.gram
    return subordinate_norm(ops.p_ext.matrix, gram, gram)


def complement_projection_norm(ops: ExtendedOperators, setup: HilbertSetup) -> float:
    """Norm of id - p_ext; equals the norm of p_ext for any projection that
    is neither zero nor the identity."""
    gram = setup.vhat.gram
    eye = np.eye(setup.vhat.dim)
    return subordinate_norm(eye - ops.p_ext.matrix, gram, gram)


def compute_cqopt_dualnorm(m: MethodSpec, ops: ExtendedOperators) -> float:
    """Quasi-optimality constant via dual norms:
    sup_sigma |b_ext(., sigma)|_{vhat'} / |b(., sigma)|_{S'}."""
    ghat_fac = m.setup.vhat.factorization
    num = ops.b_ext.T @ ghat_fac.solve(ops.b_ext)
    values, _ = sym_generalized_eigs(0.5 * (num + num.T), _b_dual_gram(m))
    return float(np.sqrt(max(values[0], 0.0)))


def _range_of_id_minus_p(setup: HilbertSetup, ops: ExtendedOperators) -> Subspace:
    """Subspace spanned by (id - P) applied to the V basis, rank-reduced."""
    columns = setup.v.basis - setup.s.basis @ ops.p.matrix
    lf = setup.vhat.factorization.factor
    white = lf.T @ columns
    u, svals, _ = np.linalg.svd(white, full_matrices=False)
    rank = int(np.count_nonzero(svals > 1e-10 * svals[0])) if svals.size and svals[0] > 0 else 0
    basis = np.linalg.solve(lf.T, u[:, :rank]) if rank else np.zeros((setup.vhat.dim, 0))
    return Subspace(ambient=setup.vhat, basis=basis, tag="other")


def compute_cqopt_angle(setup: HilbertSetup, ops: ExtendedOperators) -> AngleRoute:
    """Quasi-optimality constant as 1/sin(alpha), alpha the angle between S
    and the range of (id - P); a degenerate angle (shared direction) means no
    finite constant and yields infinity.  A trivial range (the method is
    exact on the proxy) gives alpha = pi/2 and constant 1."""
    rng = _range_of_id_minus_p(setup, ops)
    if rng.dim == 0:
        return AngleRoute(c_qopt=1.0, alpha=float(np.pi / 2), degenerate=False)
    angle = subspace_angle(setup, rng, setup.s)
    if angle.degenerate:
        return AngleRoute(c_qopt=INFINITY, alpha=angle.radians, degenerate=True)
    return AngleRoute(c_qopt=float(1.0 / np.sin(angle.radians)), alpha=angle.radians, degenerate=False)


def _restricted_norm(setup: HilbertSetup, ops: ExtendedOperators, y: Subspace) -> float:
    """Norm of the extended projection restricted to the orthogonal
    complement of ``y`` (zero when the complement is trivial)."""
    comp = _complement_basis(setup.vhat, y.basis)
    if comp.shape[1] == 0:
        return 0.0
    restricted = ops.p_ext.matrix @ comp
    return subordinate_norm(restricted, np.eye(comp.shape[1]), setup.vhat.gram)


def compute_delta_v(setup: HilbertSetup, ops: ExtendedOperators) -> float:
    """Consistency measure mixed with stability: the smallest constant with
    |Pi_S v - P v| <= delta_V |v - Pi_S v|, computed as the norm of the
    extended projection restricted to the orthogonal complement of S."""
    return _restricted_norm(setup, ops, setup.s)


def compute_delta_s(setup: HilbertSetup, ops: ExtendedOperators) -> float:
    """Consistency measure independent of stability: the smallest constant
    with |s - P Pi_V s| <= delta_S |s - Pi_V s|, computed as the norm of the
    extended projection restricted to the orthogonal complement of V (zero
    for conforming S, where that complement is trivial)."""
    return _restricted_norm(setup, ops, setup.v)


def compute_classical_bound(m: MethodSpec, ops: ExtendedOperators) -> ClassicalBound:
    """Continuity constant of the extended form, inf-sup constant of b, and
    their ratio, which bounds the quasi-optimality constant from above (often
    with slack)."""
    ghat_fac = m.setup.vhat.factorization
    num = ops.b_ext.T @ ghat_fac.solve(ops.b_ext)
    values, _ = sym_generalized_eigs(0.5 * (num + num.T), m.setup.s.induced_gram())
    c_bext = float(np.sqrt(max(values[0], 0.0)))
    beta = inf_sup_constant(m)
    return ClassicalBound(c_bext=c_bext, beta=beta, ratio=c_bext / beta if beta > 0 else INFINITY)


def consistency_residual(m: MethodSpec, ops: ExtendedOperators, v_coeffs: np.ndarray) -> float:
    """Size of the consistency defect of the exact solution v: the functional
    sigma -> b(Pi_S v, sigma) - a(v, E sigma), measured in the dual norm
    normalized by |b(., sigma)|_{S'}.  That dual norm equals the energy norm
    of Pi_S v - P v; bounded by delta_V |v - Pi_S v|."""
    v_coeffs = np.asarray(v_coeffs, dtype=float)
    setup = m.setup
    r_s = ritz_projection(setup, setup.s)
    diff = r_s.matrix @ (setup.v.basis @ v_coeffs) - ops.p.matrix @ v_coeffs
    g_s = setup.s.induced_gram()
    return float(np.sqrt(max(diff @ g_s @ diff, 0.0)))


def consistency_residual_sup(setup: HilbertSetup, ops: ExtendedOperators) -> float:
    """Largest consistency residual over exact solutions of unit energy,
    i.e. the norm of Pi_S - P as a map from V into vhat."""
    r_s = ritz_projection(setup, setup.s)
    diff = setup.s.basis @ (r_s.matrix @ setup.v.basis - ops.p.matrix)
    return subordinate_norm(diff, setup.v.induced_gram(), setup.vhat.gram)


def verify_restriction_lemma(t, gram, y_basis) -> RestrictionCheck:
    """Check the restriction bounds for an operator ``t`` on the space with
    Gram ``gram`` and the subspace spanned by ``y_basis``."""
    space = GramSpace(gram=as_matrix(gram))
    t = as_matrix(t, rows=space.dim, cols=space.dim)
    y = Subspace(ambient=space, basis=np.asarray(y_basis, dtype=float), tag="other")
    c = subordinate_norm(t @ y.basis, y.induced_gram(), space.gram)
    comp = _complement_basis(space, y.basis)
    delta = subordinate_norm(t @ comp, np.eye(comp.shape[1]), space.gram) if comp.shape[1] else 0.0
    norm = subordinate_norm(t, space.gram, space.gram)
    tol = 1e-9 * max(1.0, norm)
    return RestrictionCheck(
        c=c,
        delta=delta,
        norm=norm,
        lower_ok=max(c, delta) <= norm + tol,
        upper_ok=norm <= float(np.hypot(c, delta)) + tol,
    )


def _structure(m: MethodSpec) -> StructureDiagnostics:
    inj = check_smoother_injectivity(m)
    id_res = check_id_smoother_representability(m.setup)
    return StructureDiagnostics(
        nonconforming_galerkin=check_nonconforming_galerkin(m),
        smoother_injective=inj.injective,
        smoother_rank=inj.smoother_rank,
        method_range_rank=inj.method_range_rank,
        id_smoother_residual_max=float(id_res.max(initial=0.0)),
    )


def analyze_method(setup: HilbertSetup, m: MethodSpec) -> AnalysisReport:
    """Run the full constant/cross-check pipeline for one method."""
    c_stab = compute_cstab(m)
    structure = _structure(m)
    cons = check_full_consistency(m)
    scale = m.consistency_scale()

    if not cons.ok:
        # no extension exists: quasi-optimality quantities are infinite and
        # the identity checks are vacuous
        residuals = {
            "cqopt-eq-sqrt1-plus-deltaV2": 0.0,
            "buckholtz-norm-identity": 0.0,
            "route-agreement-dualnorm": 0.0,
            "angle-route": 0.0,
            "deltaS-two-sided-bound": 0.0,
            "classical-upper-bound": 0.0,
            "galerkin-orthogonality": 0.0,
        }
        return AnalysisReport(
            c_stab=c_stab,
            c_qopt_opnorm=INFINITY,
            c_qopt_dualnorm=INFINITY,
            c_qopt_angle=INFINITY,
            delta_v=INFINITY,
            delta_s=INFINITY,
            angle_alpha=0.0,
            classical_bound=INFINITY,
            inf_sup_beta=inf_sup_constant(m),
            continuity_cbext=INFINITY,
            consistency_residual_sup=INFINITY,
            identity_residuals=residuals,
            proxy_dim=setup.v.dim,
            consistent=False,
            form_scale=scale,
            structure=structure,
        )

    ops = extended_projection(m)
    opnorm = compute_cqopt_opnorm(ops, setup)
    comp_norm = complement_projection_norm(ops, setup)
    dualnorm = compute_cqopt_dualnorm(m, ops)
    angle = compute_cqopt_angle(setup, ops)
    delta_v = compute_delta_v(setup, ops)
    delta_s = compute_delta_s(setup, ops)
    classical = compute_classical_bound(m, ops)
    cres = consistency_residual_sup(setup, ops)

    orth = np.abs((np.eye(setup.vhat.dim) - ops.p_ext.matrix).T @ ops.b_ext).max(initial=0.0)
    target = float(np.sqrt(1.0 + delta_v * delta_v))
    lower_viol = max(0.0, max(c_stab, delta_s) - opnorm)
    upper_viol = max(0.0, opnorm - float(np.hypot(c_stab, delta_s)))
    angle_gap = abs(opnorm - angle.c_qopt) if np.isfinite(angle.c_qopt) else INFINITY
    proper = 0 < setup.s.dim < setup.vhat.dim

    residuals = {
        "cqopt-eq-sqrt1-plus-deltaV2": abs(opnorm - target),
        "buckholtz-norm-identity": abs(opnorm - comp_norm) if proper else 0.0,
        "route-agreement-dualnorm": abs(opnorm - dualnorm),
        "angle-route": angle_gap,
        "deltaS-two-sided-bound": max(lower_viol, upper_viol),
        "classical-upper-bound": max(0.0, opnorm - classical.ratio),
        "galerkin-orthogonality": float(orth),
    }
    return AnalysisReport(
        c_stab=c_stab,
        c_qopt_opnorm=opnorm,
        c_qopt_dualnorm=dualnorm,
        c_qopt_angle=angle.c_qopt,
        delta_v=delta_v,
        delta_s=delta_s,
        angle_alpha=angle.alpha,
        classical_bound=classical.ratio,
        inf_sup_beta=classical.beta,
        continuity_cbext=classical.c_bext,
        consistency_residual_sup=cres,
        identity_residuals=residuals,
        proxy_dim=setup.v.dim,
        consistent=True,
        form_scale=scale,
        structure=structure,
    )


def inf_sup_constant(m: MethodSpec) -> float:
    """Inf-sup constant of b on S with the energy norm: the smallest singular
    value of b whitened by the S Gram (defined with or without consistency)."""
    s_fac = spd_factor(m.setup.s.induced_gram())
    whitened = s_fac.lower_solve(s_fac.lower_solve(m.b_matrix).T).T
    svals = np.linalg.svd(whitened, compute_uv=False)
    return float(svals[-1]) if svals.size else 0.0


# ---------------------------------------------------------------------------
# named checks (stable strings; CI and the CLI select suites by these names)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float


def _scale(report: AnalysisReport) -> float:
    c = report.c_qopt_opnorm
    return max(1.0, c) if np.isfinite(c) else 1.0


def _check_simple(key: str):
    def run(report: AnalysisReport, tol: float) -> CheckResult:
        residual = report.identity_residuals[key]
        tolerance = tol * _scale(report)
        return CheckResult(key, residual <= tolerance, residual, tolerance)

    return run


def _check_two_sided(report: AnalysisReport, tol: float) -> CheckResult:
    name = "deltaS-two-sided-bound"
    residual = report.identity_residuals[name]
    if not report.consistent:
        return CheckResult(name, True, 0.0, tol)
    lower_viol = max(0.0, max(report.c_stab, report.delta_s) - report.c_qopt_opnorm)
    upper_viol = max(0.0, report.c_qopt_opnorm - float(np.hypot(report.c_stab, report.delta_s)))
    scale = _scale(report)
    passed = lower_viol <= 1e-9 * scale and upper_viol <= tol * scale
    return CheckResult(name, passed, residual, tol * scale)


def _check_orthogonality(report: AnalysisReport, tol: float) -> CheckResult:
    name = "galerkin-orthogonality"
    residual = report.identity_residuals[name]
    tolerance = tol * report.form_scale
    return CheckResult(name, residual <= tolerance, residual, tolerance)


CHECKS: dict[str, tuple[str, float, Callable[[AnalysisReport, float], CheckResult]]] = {
    "cqopt-eq-sqrt1-plus-deltaV2": (
        "c_qopt equals sqrt(1 + delta_V^2)",
        1e-8,
        _check_simple("cqopt-eq-sqrt1-plus-deltaV2"),
    ),
    "buckholtz-norm-identity": (
        "norm of the extended projection equals the norm of its complement",
        1e-8,
        _check_simple("buckholtz-norm-identity"),
    ),
    "route-agreement-dualnorm": (
        "operator-norm and dual-norm routes agree",
        1e-8,
        _check_simple("route-agreement-dualnorm"),
    ),
    "angle-route": (
        "operator-norm and 1/sin(angle) routes agree",
        1e-7,
        _check_simple("angle-route"),
    ),
    "deltaS-two-sided-bound": (
        "max(c_stab, delta_S) <= c_qopt <= sqrt(c_stab^2 + delta_S^2)",
        1e-8,
        _check_two_sided,
    ),
    "classical-upper-bound": (
        "c_qopt <= continuity/inf-sup ratio",
        1e-8,
        _check_simple("classical-upper-bound"),
    ),
    "galerkin-orthogonality": (
        "generalized Galerkin orthogonality of the extended projection",
        1e-9,
        _check_orthogonality,
    ),
}


def evaluate_checks(
    report: AnalysisReport,
    names: list[str] | None = None,
    tolerance_overrides: dict[str, float] | None = None,
) -> list[CheckResult]:
    """Evaluate named checks against a report, in the given order."""
    overrides = tolerance_overrides or {}
    selected = list(CHECKS) if names is None else names
    results = []
    for name in selected:
        if name not in CHECKS:
            raise KeyError(name)
        _, default_tol, fn = CHECKS[name]
        results.append(fn(report, overrides.get(name, default_tol)))
    return results
