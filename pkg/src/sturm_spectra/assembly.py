"""Discrete least-squares system over fully discontinuous spectral elements.

Every quantity is built from "rows": each element contributes the
sqrt(weight)-scaled residual operator sampled at Gauss points, and every
jump/boundary/interface condition contributes one penalty row. With K the
stack of all rows and M the matching stack of r-weighted value rows,

    A = K^T K,   B = K^T M                       (lsq_weighted)
    B = sum_l  S_l^T M_l                         (plain_mass)

so A is symmetric positive semidefinite by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidCoefficientError, MisuseError, UnknownVariantError
from .problem import BoundaryKind, BoundarySpec, CoefficientSet, InterfaceSpec, Mesh, ProblemSpec, element_map
from .reference_element import (
    QuadratureRule,
    differentiation_matrix,
    gauss_rule,
    gll_rule,
    interpolate_coefficient,
    lagrange_matrix,
    reference_gram,
    sample,
)

B_VARIANTS = ("lsq_weighted", "plain_mass")
_VARIANT_ALIASES = {"lsq": "lsq_weighted", "mass": "plain_mass"}


def canonical_variant(variant: str) -> str:
    v = _VARIANT_ALIASES.get(variant, variant)
    if v not in B_VARIANTS:
        raise UnknownVariantError(f"unknown B variant {variant!r}; expected one of {B_VARIANTS}")
    return v


def residual_rule(W: int) -> QuadratureRule:
    """Gauss rule exact for the squared residual (degree <= 4W - 2)."""
    return gauss_rule(2 * W)


@dataclass(frozen=True, eq=False)
class ElementOperator:
    """Rows of one element: ``E @ c`` is sqrt(w_k) * (L^a u)(xi_k) and
    ``R @ c`` is sqrt(w_k) * r_hat(xi_k) * J^(1/4) * u(xi_k)."""

    index: int
    E: np.ndarray
    R: np.ndarray
    S: np.ndarray
    rule: QuadratureRule

    def apply(self, c: np.ndarray) -> np.ndarray:
        """Pointwise values of L^a u at the quadrature nodes (no sqrt weight)."""
        return (self.E @ c) / np.sqrt(self.rule.weights)


def element_operator(mesh: Mesh, coeffs: CoefficientSet, l: int) -> ElementOperator:
    W = mesh.W
    emap = element_map(mesh, l)
    e = mesh.elements[l]
    h, J = e.h, emap.jacobian

    p = coeffs.p.piece_on(e.x_left, e.x_right)
    q = coeffs.q.piece_on(e.x_left, e.x_right)
    r = coeffs.r.piece_on(e.x_left, e.x_right)
    try:
        p_hat = interpolate_coefficient(lambda xi: sample(p, emap(xi)), W - 1)
        q_hat = interpolate_coefficient(lambda xi: sample(q, emap(xi)), W - 1)
        r_hat = interpolate_coefficient(lambda xi: sample(r, emap(xi)) * J**0.25, W - 1)
    except InvalidCoefficientError as exc:
        raise InvalidCoefficientError(f"element {l} on ({e.x_left}, {e.x_right}): {exc}") from exc

    rule = residual_rule(W)
    xi = rule.nodes
    nodes = gll_rule(W)
    D = differentiation_matrix(nodes)
    V = lagrange_matrix(nodes.nodes, xi)
    V1 = V @ D
    V2 = V1 @ D
    sw = np.sqrt(rule.weights)[:, None]

    pk = p_hat(xi)[:, None]
    dpk = p_hat.derivative()(xi)[:, None]
    qk = q_hat(xi)[:, None]
    rk = r_hat(xi)[:, None]

    # -(2/h)^2 d/dxi (p dU/dxi) = -(2/h)^2 (p U'' + p' U')
    E = sw * np.sqrt(J) * (-(2.0 / h) ** 2 * (pk * V2 + dpk * V1) + qk * V)
    R = sw * rk * J**0.25 * V
    S = sw * V
    return ElementOperator(l, E, R, S, rule)


@dataclass(frozen=True, eq=False)
class PenaltyRow:
    kind: str
    index: np.ndarray
    values: np.ndarray
    target: float = 0.0

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.values @ np.asarray(x)[self.index])

    def dense(self, n: int) -> np.ndarray:
        v = np.zeros(n)
        np.add.at(v, self.index, self.values)
        return v


def _row(kind, parts, target=0.0) -> PenaltyRow:
    index = np.concatenate([p[0] for p in parts])
    values = np.concatenate([p[1] for p in parts])
    return PenaltyRow(kind, index, values, float(target))


class _Traces:
    """Value and physical-derivative traces of element l at xi = -1 / +1."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.W = mesh.W
        self.D = differentiation_matrix(gll_rule(mesh.W))

    def value(self, l, side, scale=1.0):
        k = 0 if side < 0 else self.W
        return np.array([l * (self.W + 1) + k]), np.array([scale])

    def slope(self, l, side, scale=1.0):
        k = 0 if side < 0 else self.W
        h = self.mesh.elements[l].h
        return l * (self.W + 1) + np.arange(self.W + 1), self.D[k] * (2.0 / h) * scale


def _neg(part):
    return part[0], -part[1]


def jump_rows(mesh: Mesh) -> list[PenaltyRow]:
    """[u]_i = u_{i+1}(-1) - u_i(1) and the 2/h-scaled slope jump for every
    interior node except the interface node."""
    t = _Traces(mesh)
    rows = []
    for i in range(mesh.n_elements - 1):
        if i == mesh.interface_node:
            continue
        rows.append(_row("value_jump", [t.value(i + 1, -1), _neg(t.value(i, +1))]))
        rows.append(_row("derivative_jump", [t.slope(i + 1, -1), _neg(t.slope(i, +1))]))
    return rows


def boundary_rows(mesh: Mesh, bc) -> list[PenaltyRow]:
    kind = bc.kind if isinstance(bc, BoundarySpec) else BoundaryKind(bc)
    t = _Traces(mesh)
    last = mesh.n_elements - 1
    if kind is BoundaryKind.DIRICHLET:
        return [_row("boundary", [t.value(0, -1)]), _row("boundary", [t.value(last, +1)])]
    if kind is BoundaryKind.NEUMANN:
        return [_row("boundary", [t.slope(0, -1)]), _row("boundary", [t.slope(last, +1)])]
    return [
        _row("boundary", [t.value(0, -1), _neg(t.value(last, +1))]),
        _row("boundary", [t.slope(0, -1), _neg(t.slope(last, +1))]),
    ]


def interface_rows(mesh: Mesh, coeffs: CoefficientSet, interface: InterfaceSpec | None) -> list[PenaltyRow]:
    """Value row u1(1) - u2(-1) and flux row with one-sided p values."""
    if interface is None or mesh.interface_node is None:
        raise MisuseError("interface rows requested for a problem without an interface")
    i = mesh.interface_node
    left, right = mesh.elements[i], mesh.elements[i + 1]
    p_minus = float(sample(coeffs.p.piece_on(left.x_left, left.x_right), np.array([left.x_right]))[0])
    p_plus = float(sample(coeffs.p.piece_on(right.x_left, right.x_right), np.array([right.x_left]))[0])
    t = _Traces(mesh)
    return [
        _row("interface_value", [t.value(i, +1), _neg(t.value(i + 1, -1))], interface.jump_value),
        _row("interface_flux", [t.slope(i, +1, p_minus), _neg(t.slope(i + 1, -1, p_plus))], interface.jump_flux),
    ]


def penalty_rows(mesh: Mesh, coeffs: CoefficientSet, bc, interface: InterfaceSpec | None = None) -> list[PenaltyRow]:
    rows = jump_rows(mesh) + boundary_rows(mesh, bc)
    if interface is not None:
        rows += interface_rows(mesh, coeffs, interface)
    return rows


def dof_map(mesh: Mesh) -> np.ndarray:
    """dof_map[l, j] = global index of node j of element l."""
    W1 = mesh.W + 1
    return np.arange(mesh.n_elements * W1).reshape(mesh.n_elements, W1)


def _scatter(blocks: Sequence[np.ndarray], n: int) -> np.ndarray:
    out = np.zeros((n, n))
    W1 = blocks[0].shape[0]
    for l, blk in enumerate(blocks):
        s = slice(l * W1, (l + 1) * W1)
        out[s, s] += blk
    return out


def assemble_A(mesh: Mesh, coeffs: CoefficientSet, bc, interface: InterfaceSpec | None = None):
    """A = sum_l E_l^T E_l + sum_rows row^T row. Returns (A, rows)."""
    ops = [element_operator(mesh, coeffs, l) for l in range(mesh.n_elements)]
    rows = penalty_rows(mesh, coeffs, bc, interface)
    A = _scatter([op.E.T @ op.E for op in ops], mesh.n_dofs)
    for row in rows:
        v = row.dense(mesh.n_dofs)
        A += np.outer(v, v)
    return 0.5 * (A + A.T), rows


def assemble_B(mesh: Mesh, coeffs: CoefficientSet, variant: str = "lsq_weighted", ops=None) -> np.ndarray:
    variant = canonical_variant(variant)
    if ops is None:
        ops = [element_operator(mesh, coeffs, l) for l in range(mesh.n_elements)]
    if variant == "lsq_weighted":
        # B[I, J] = sum_l (r_hat phi_J, L^a phi_I)
        blocks = [op.E.T @ op.R for op in ops]
    else:
        blocks = [op.S.T @ op.R for op in ops]
    return _scatter(blocks, mesh.n_dofs)


def assemble_preconditioner(mesh: Mesh, W: int | None = None) -> np.ndarray:
    W = mesh.W if W is None else W
    G = reference_gram(W).full
    return scipy.linalg.block_diag(*([G] * mesh.n_elements))


def weighted_mass(mesh: Mesh, coeffs: CoefficientSet) -> np.ndarray:
    """Matrix of the physical b-norm  int r u v dx  (true r, exact rule)."""
    W = mesh.W
    rule = residual_rule(W)
    V = lagrange_matrix(gll_rule(W).nodes, rule.nodes)
    blocks = []
    for l in range(mesh.n_elements):
        emap = element_map(mesh, l)
        e = mesh.elements[l]
        rk = sample(coeffs.r.piece_on(e.x_left, e.x_right), emap(rule.nodes))
        wk = rule.weights * rk * emap.jacobian
        blocks.append(V.T @ (wk[:, None] * V))
    return _scatter(blocks, mesh.n_dofs)


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Matrices of one discretization.

    ``K`` and ``M`` are the stacked least-squares rows (elements first, then
    penalty rows); ``A = K^T K`` and, for lsq_weighted, ``B = K^T M``.
    ``load`` collects row^T * target for nonhomogeneous jump data.
    """

    problem: ProblemSpec
    mesh: Mesh
    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    K: np.ndarray
    M: np.ndarray
    mass: np.ndarray
    dof_map: np.ndarray
    rows: list
    element_ops: list
    b_variant: str
    symmetrized: bool = False
    load: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def homogeneous(self) -> bool:
        return all(row.target == 0.0 for row in self.rows)

    def quadratic_form(self, x: np.ndarray) -> float:
        """V-form: squared element residuals plus squared penalty rows."""
        return float(np.sum((self.K @ x) ** 2))

    def residual_form(self, x: np.ndarray, lam: float) -> float:
        """Squared least-squares residual of L^a u - lam r_hat u plus penalties."""
        return float(np.sum((self.K @ x - lam * (self.M @ x)) ** 2))


def assemble(problem: ProblemSpec, mesh: Mesh, b_variant: str = "lsq_weighted", symmetrize: bool = False) -> AssembledSystem:
    variant = canonical_variant(b_variant)
    coeffs = problem.coefficients
    n = mesh.n_dofs
    ops = [element_operator(mesh, coeffs, l) for l in range(mesh.n_elements)]
    rows = penalty_rows(mesh, coeffs, problem.bc, problem.interface)

    nq = ops[0].E.shape[0]
    K = np.zeros((mesh.n_elements * nq + len(rows), n))
    M = np.zeros_like(K)
    W1 = mesh.W + 1
    for l, op in enumerate(ops):
        K[l * nq:(l + 1) * nq, l * W1:(l + 1) * W1] = op.E
        M[l * nq:(l + 1) * nq, l * W1:(l + 1) * W1] = op.R
    load = np.zeros(n)
    for j, row in enumerate(rows):
        v = row.dense(n)
        K[mesh.n_elements * nq + j] = v
        load += v * row.target

    A = K.T @ K
    A = 0.5 * (A + A.T)
    B = assemble_B(mesh, coeffs, variant, ops)
    if symmetrize:
        B = 0.5 * (B + B.T)
    return AssembledSystem(
        problem=problem,
        mesh=mesh,
        A=A,
        B=B,
        P=assemble_preconditioner(mesh),
        K=K,
        M=M,
        mass=weighted_mass(mesh, coeffs),
        dof_map=dof_map(mesh),
        rows=rows,
        element_ops=ops,
        b_variant=variant,
        symmetrized=symmetrize,
        load=load,
    )


def dump_matrix(matrix: np.ndarray, fh) -> None:
    """Dense row-major text dump with an ``<n> rows, <m> cols`` header."""
    matrix = np.atleast_2d(matrix)
    fh.write(f"{matrix.shape[0]} rows, {matrix.shape[1]} cols\n")
    for row in matrix:
        fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix(fh) -> np.ndarray:
    header = fh.readline().split(",")
    n_rows = int(header[0].split()[0])
    n_cols = int(header[1].split()[0])
    data = [[float(v) for v in fh.readline().split()] for _ in range(n_rows)]
    out = np.array(data, dtype=float).reshape(n_rows, n_cols)
    return out
