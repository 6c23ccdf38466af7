"""Built-in problem instances exercising the analysis pipeline.

Three families:

* ``sequence-example``: a truncated sequence-space model.  The ambient space
  is R^N with the euclidean product, V is spanned by e_1..e_{N-1}, and the
  discrete space combines the conforming directions e_1..e_{n-1} with one
  nonconforming direction alpha*e_0 + e_n.  The approximation operator is
  prescribed in closed form -- variant 1 ignores the nonconforming direction,
  variant 2 exploits it (with strength beta), variant "zero" maps everything
  to zero -- and the smoother is derived from it.  All constants are exact
  and independent of the truncation as long as N >= n + 2.

* ``poisson-1d``: the Dirichlet problem -u'' = f on (0,1).  The continuous
  space is proxied by conforming P1 on a fine mesh; the discrete space is
  conforming or broken P1 on a nested coarse mesh.  The extended scalar
  product adds jump penalties eta/h * [u][v] at interior nodes, so its
  restriction to conforming pairs is the plain stiffness form.  Smoothers:
  nodal averaging into the fine space (kept exact on conforming functions and
  corrected inside S cap V so the method is fully algebraically consistent),
  the orthogonal projection onto V, or the identity (conforming spaces only).

* ``synthetic-2d``: tiny closed-form geometries -- the identity, the rank-one
  orthogonal projection with matrix 0.5*ones((2,2)), and a skewed method
  whose error range meets the discrete space at 45 degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .method import (
    MethodSpec,
    consistency_correction,
    conforming_galerkin,
    derive_smoother,
    identity_smoother,
    ritz_method,
)
from .spaces import (
    GramSpace,
    HilbertSetup,
    OperatorMatrix,
    Subspace,
    euclidean_space,
    full_subspace,
)


class UnknownModel(Exception):
    """No registered model generator under this name."""


@dataclass(frozen=True)
class SequenceExampleParams:
    """Parameters of the sequence-space model.

    ``truncation`` defaults to n + 2, the smallest dimension at which the
    variant-2 operator sees every coefficient it uses; results are then exact
    and do not change under further truncation growth.  ``b_weight`` scales
    the nonconforming direction of the discrete bilinear form (trial and test
    symmetrically); it leaves the method's operators unchanged but skews the
    continuity/inf-sup bound, which is useful to exhibit its slack.
    """

    n: int = 2
    alpha: float = 1.0
    beta: float = 1.0
    truncation: int = 0  # 0 means "use n + 2"
    variant: str = "1"
    b_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variant", str(self.variant))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "truncation", int(self.truncation) or self.n + 2)
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.b_weight <= 0:
            raise ValueError("b_weight must be positive")
        if self.truncation < self.n + 2:
            raise ValueError("truncation must be at least n + 2")
        if self.variant not in ("1", "2", "zero"):
            raise ValueError(f"variant must be 1, 2 or zero, got {self.variant!r}")


def build_sequence_example(p: SequenceExampleParams) -> tuple[HilbertSetup, MethodSpec]:
    n, alpha, big_n = p.n, p.alpha, p.truncation
    space = GramSpace(gram=np.eye(big_n), label=f"l2 truncated at {big_n}")
    eye = np.eye(big_n)

    v = Subspace(ambient=space, basis=eye[:, 1:], tag="V")
    nonconforming = alpha * eye[:, 0] + eye[:, n]
    s_basis = np.column_stack([eye[:, 1:n], nonconforming])
    s = Subspace(ambient=space, basis=s_basis, tag="S")
    s_conf = Subspace(ambient=space, basis=eye[:, 1:n], tag="S∩V")
    setup = HilbertSetup(vhat=space, v=v, s=s, s_conforming=s_conf)

    # prescribed approximation operator, S coefficients x V coefficients
    # (V basis column i is e_{i+1}, S column n-1 is the nonconforming one)
    p_matrix = np.zeros((n, big_n - 1))
    if p.variant in ("1", "2"):
        for j in range(n - 1):
            p_matrix[j, j] = 1.0
    if p.variant == "2":
        p_matrix[n - 1, n - 1] = 1.0
        p_matrix[n - 1, n] = p.beta / (1.0 + alpha * alpha)

    weights = np.ones(n)
    weights[n - 1] = p.b_weight
    b_matrix = weights[:, None] * s.induced_gram() * weights[None, :]
    smoother = derive_smoother(setup, p_matrix, b_matrix)
    return setup, MethodSpec(setup=setup, b_matrix=b_matrix, smoother=smoother)


@dataclass(frozen=True)
class Poisson1dParams:
    """Parameters of the 1D Poisson model.

    The fine mesh has coarse_cells * fine_refinement cells and nests the
    coarse one; ``penalty_weight`` is the jump-penalty factor eta in the
    extended scalar product (and therefore in b).
    """

    coarse_cells: int = 4
    fine_refinement: int = 4
    discrete_space: str = "broken-P1"
    penalty_weight: float = 1.0
    smoother: str = "identity-on-conforming-average"

    def __post_init__(self):
        object.__setattr__(self, "coarse_cells", int(self.coarse_cells))
        object.__setattr__(self, "fine_refinement", int(self.fine_refinement))
        if self.coarse_cells < 2:
            raise ValueError("need at least 2 coarse cells")
        if self.fine_refinement < 2:
            raise ValueError("fine_refinement must be at least 2")
        if self.penalty_weight <= 0:
            raise ValueError("penalty_weight must be positive")
        if self.discrete_space not in ("conforming-P1", "broken-P1"):
            raise ValueError(f"unknown discrete_space {self.discrete_space!r}")
        if self.smoother not in ("identity-on-conforming-average", "ritz", "none"):
            raise ValueError(f"unknown smoother {self.smoother!r}")


def _fine_stiffness(n_cells: int) -> np.ndarray:
    """Stiffness matrix of conforming P1 with zero boundary values."""
    h = 1.0 / n_cells
    n = n_cells - 1
    a = np.zeros((n, n))
    np.fill_diagonal(a, 2.0 / h)
    idx = np.arange(n - 1)
    a[idx, idx + 1] = -1.0 / h
    a[idx + 1, idx] = -1.0 / h
    return a


def _coarse_hat_values(coarse_node: int, refinement: int, fine_interior: int) -> np.ndarray:
    """Fine-node values of the coarse hat function at the given coarse node."""
    j = np.arange(1, fine_interior + 1)
    return np.maximum(0.0, 1.0 - np.abs(j - coarse_node * refinement) / refinement)


def build_poisson_1d(p: Poisson1dParams) -> tuple[HilbertSetup, MethodSpec]:
    cells, ref = p.coarse_cells, p.fine_refinement
    fine_cells = cells * ref
    n_v = fine_cells - 1
    h = 1.0 / fine_cells
    big_h = 1.0 / cells
    stiffness = _fine_stiffness(fine_cells)
    hats = np.column_stack([_coarse_hat_values(k, ref, n_v) for k in range(1, cells)])

    if p.discrete_space == "conforming-P1":
        space = GramSpace(gram=stiffness, label="poisson-1d conforming")
        v = full_subspace(space, tag="V")
        s = Subspace(ambient=space, basis=hats, tag="S")
        s_conf = Subspace(ambient=space, basis=hats, tag="S∩V")
        setup = HilbertSetup(vhat=space, v=v, s=s, s_conforming=s_conf)
        if p.smoother == "ritz":
            return setup, ritz_method(setup)
        return setup, conforming_galerkin(setup)

    # broken P1 on the coarse mesh, zero boundary values.  Ambient basis:
    # the fine hats followed by one "ramp" per interior coarse node k (linear
    # 0 -> 1 on coarse cell k, zero elsewhere, jump -1 at node k).
    n_ramps = cells - 1
    dim = n_v + n_ramps
    gram = np.zeros((dim, dim))
    gram[:n_v, :n_v] = stiffness
    for k in range(1, cells):
        col = n_v + k - 1
        gram[k * ref - 1, col] += 1.0 / big_h  # fine-node index k*ref is row k*ref - 1
        if k >= 2:
            gram[(k - 1) * ref - 1, col] -= 1.0 / big_h
        gram[col, col] = 1.0 / big_h + p.penalty_weight / h
    gram[n_v:, :n_v] = gram[:n_v, n_v:].T

    space = GramSpace(gram=gram, label="poisson-1d broken")
    v = Subspace(ambient=space, basis=np.vstack([np.eye(n_v), np.zeros((n_ramps, n_v))]), tag="V")

    # left-end DOF of cell j (j = 2..cells) is coarse hat (j-1) minus ramp (j-1);
    # right-end DOF of cell j (j = 1..cells-1) is ramp j itself
    def ambient(hat_values: np.ndarray | None, ramp_index: int | None, ramp_coeff: float) -> np.ndarray:
        out = np.zeros(dim)
        if hat_values is not None:
            out[:n_v] = hat_values
        if ramp_index is not None:
            out[n_v + ramp_index - 1] = ramp_coeff
        return out

    left_dofs = [ambient(hats[:, j - 2], j - 1, -1.0) for j in range(2, cells + 1)]
    right_dofs = [ambient(None, j, 1.0) for j in range(1, cells)]
    s_basis = np.column_stack(left_dofs + right_dofs)
    s = Subspace(ambient=space, basis=s_basis, tag="S")
    s_conf_basis = np.vstack([hats, np.zeros((n_ramps, cells - 1))])
    s_conf = Subspace(ambient=space, basis=s_conf_basis, tag="S∩V")
    setup = HilbertSetup(vhat=space, v=v, s=s, s_conforming=s_conf)

    if p.smoother == "ritz":
        return setup, ritz_method(setup)
    if p.smoother == "none":
        # fails for genuinely broken spaces; the error carries the distances
        return setup, MethodSpec(
            setup=setup, b_matrix=s.induced_gram(), smoother=identity_smoother(setup)
        )

    # nodal averaging into the fine conforming space: ramp k contributes its
    # interior values and the mean of its one-sided limits (1 and 0) at node k
    averaging = np.zeros((n_v, dim))
    averaging[:, :n_v] = np.eye(n_v)
    for k in range(1, cells):
        col = n_v + k - 1
        inside = np.arange((k - 1) * ref + 1, k * ref)
        averaging[inside - 1, col] = (inside - (k - 1) * ref) / ref
        averaging[k * ref - 1, col] = 0.5
    b_matrix = s.induced_gram()
    smoother = consistency_correction(setup, b_matrix, averaging @ s_basis)
    return setup, MethodSpec(setup=setup, b_matrix=b_matrix, smoother=smoother)


@dataclass(frozen=True)
class Synthetic2dParams:
    case: str = "angle-pi-4"

    def __post_init__(self):
        if self.case not in ("identity-T1", "half-ones-T2", "angle-pi-4"):
            raise ValueError(f"unknown synthetic case {self.case!r}")


@dataclass(frozen=True)
class SyntheticCase:
    """A 2x2 closed-form instance: always a setup and a method; the T1/T2
    cases additionally carry the operator and the subspace used by the
    restriction-norm bounds."""

    setup: HilbertSetup
    method: MethodSpec
    operator: OperatorMatrix | None = None
    restriction_subspace: Subspace | None = None


def build_synthetic_2d(case: str) -> SyntheticCase:
    params = Synthetic2dParams(case=case)
    space = euclidean_space(2, label=f"synthetic {params.case}")
    eye = np.eye(2)
    ordinate = Subspace(ambient=space, basis=eye[:, 1:], tag="other")

    if params.case == "identity-T1":
        v = full_subspace(space, tag="V")
        s = full_subspace(space, tag="S")
        setup = HilbertSetup(vhat=space, v=v, s=s, s_conforming=full_subspace(space, tag="S∩V"))
        op = OperatorMatrix(matrix=eye, domain=v, codomain=v)
        return SyntheticCase(setup=setup, method=conforming_galerkin(setup), operator=op,
                             restriction_subspace=ordinate)

    if params.case == "half-ones-T2":
        v = full_subspace(space, tag="V")
        diagonal = Subspace(ambient=space, basis=np.array([[1.0], [1.0]]), tag="S")
        s_conf = Subspace(ambient=space, basis=np.array([[1.0], [1.0]]), tag="S∩V")
        setup = HilbertSetup(vhat=space, v=v, s=diagonal, s_conforming=s_conf)
        op = OperatorMatrix(matrix=0.5 * np.ones((2, 2)), domain=v, codomain=v)
        return SyntheticCase(setup=setup, method=conforming_galerkin(setup), operator=op,
                             restriction_subspace=ordinate)

    # angle-pi-4: S is the abscissa; the method sends v to (v1 - v2) e1, so
    # the error range is the diagonal and meets S at 45 degrees
    v = full_subspace(space, tag="V")
    s = Subspace(ambient=space, basis=eye[:, :1], tag="S")
    s_conf = Subspace(ambient=space, basis=eye[:, :1], tag="S∩V")
    setup = HilbertSetup(vhat=space, v=v, s=s, s_conforming=s_conf)
    b_matrix = np.array([[1.0]])
    smoother = derive_smoother(setup, np.array([[1.0, -1.0]]), b_matrix)
    return SyntheticCase(setup=setup, method=MethodSpec(setup=setup, b_matrix=b_matrix, smoother=smoother))


# ---------------------------------------------------------------------------
# registry: models addressable by name from configurations
# ---------------------------------------------------------------------------


def _build_synthetic(p: Synthetic2dParams) -> tuple[HilbertSetup, MethodSpec]:
    case = build_synthetic_2d(p.case)
    return case.setup, case.method


MODEL_REGISTRY = {
    "sequence-example": (SequenceExampleParams, build_sequence_example),
    "poisson-1d": (Poisson1dParams, build_poisson_1d),
    "synthetic-2d": (Synthetic2dParams, _build_synthetic),
}


def model_params(name: str, values: dict) -> object:
    """Instantiate the parameter set of a registered model from a mapping,
    rejecting unknown keys."""
    if name not in MODEL_REGISTRY:
        raise UnknownModel(f"unknown model {name!r}; known: {', '.join(sorted(MODEL_REGISTRY))}")
    params_cls, _ = MODEL_REGISTRY[name]
    valid = {f.name for f in fields(params_cls)}
    unknown = set(values) - valid
    if unknown:
        raise ValueError(
            f"unknown parameter(s) {sorted(unknown)} for model {name!r}; valid: {sorted(valid)}"
        )
    return params_cls(**values)


def build_model(name: str, values: dict) -> tuple[HilbertSetup, MethodSpec]:
    params = model_params(name, values)
    _, builder = MODEL_REGISTRY[name]
    return builder(params)
