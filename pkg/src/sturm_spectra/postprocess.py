"""Conforming correction, normalization, H^1 errors and W-convergence studies."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assembly import assemble, weighted_mass
from .eigensolve import EigenPair, SolveOptions, solve_gevp
from .errors import InvalidOrderError, ReferenceUnavailableError, RefinementRequestError, SizeError
from .norms import orient, weighted_norm
from .problem import BoundaryKind, BoundarySpec, CoefficientSet, Mesh, ProblemSpec, build_mesh, element_map
from .reference_element import differentiation_matrix, gauss_rule, gll_rule, lagrange_matrix

log = logging.getLogger(__name__)

SATURATION_FACTOR = 5.0
SATURATION_FLOOR = 1e-11
FIT_WINDOWS = ("all", "pre_saturation")
NORMALIZATIONS = ("b_norm", "euclidean")


@dataclass(frozen=True, eq=False)
class ElementFunction:
    """Per-element polynomial of degree W in nodal form; ``values[l, j]`` is
    the value at GLL node j of element l. Not necessarily continuous."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(self.mesh.n_elements, self.mesh.W + 1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dofs(self) -> np.ndarray:
        return self.values.ravel()

    def traces(self) -> np.ndarray:
        """(n_elements, 2) array of values at xi = -1 and xi = +1."""
        return self.values[:, [0, -1]]

    def value_jumps(self) -> np.ndarray:
        t = self.traces()
        return t[1:, 0] - t[:-1, 1]

    def _locate(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.searchsorted(self.mesh.breakpoints, x, side="right") - 1
        return x, np.clip(idx, 0, self.mesh.n_elements - 1)

    def _evaluate(self, x, order):
        shape = np.shape(x)
        x, idx = self._locate(x)
        nodes = gll_rule(self.mesh.W).nodes
        D = differentiation_matrix(gll_rule(self.mesh.W))
        out = np.empty(x.shape)
        for l in np.unique(idx):
            emap = element_map(self.mesh, int(l))
            mask = idx == l
            c = self.values[l]
            for _ in range(order):
                c = (D @ c) / emap.jacobian
            out[mask] = lagrange_matrix(nodes, emap.inverse(x[mask])) @ c
        return out.reshape(shape)

    def __call__(self, x):
        return self._evaluate(x, 0)

    def derivative(self, x):
        """u'(x); at an interior breakpoint the right element is used."""
        return self._evaluate(x, 1)

    def scaled(self, c: float):
        return dataclasses.replace(self, values=c * self.values)


class ConformingFunction(ElementFunction):
    """An element function whose value traces agree at every breakpoint."""


def _as_element_function(u, mesh: Mesh | None) -> ElementFunction:
    if isinstance(u, ElementFunction):
        return u
    if mesh is None:
        raise ValueError("a mesh is required to interpret a coefficient vector")
    dofs = u.dofs if isinstance(u, EigenPair) else np.asarray(u, dtype=float)
    return ElementFunction(mesh, dofs)


def conforming_correction(pair, mesh: Mesh, bc, interface=None) -> ConformingFunction:
    """Add to each element the linear (in xi) function that moves its two
    traces onto target values: the mean of the adjacent traces at interior
    breakpoints (the interface included), 0 at Dirichlet ends, the mean of
    both end traces for periodic ends and the unchanged trace at Neumann ends.

    ``interface`` is accepted for symmetry with the problem description; the
    interface node is treated like every other interior breakpoint.
    """
    u = _as_element_function(pair, mesh)
    kind = bc.kind if isinstance(bc, BoundarySpec) else BoundaryKind(bc)
    t = u.traces()
    n = mesh.n_elements
    targets = np.empty(n + 1)
    targets[1:n] = 0.5 * (t[:-1, 1] + t[1:, 0])
    if kind is BoundaryKind.DIRICHLET:
        targets[0] = targets[n] = 0.0
    elif kind is BoundaryKind.PERIODIC:
        targets[0] = targets[n] = 0.5 * (t[0, 0] + t[-1, 1])
    else:
        targets[0], targets[n] = t[0, 0], t[-1, 1]

    xi = gll_rule(mesh.W).nodes
    left = (1.0 - xi) / 2.0
    right = (1.0 + xi) / 2.0
    dl = targets[:-1] - t[:, 0]
    dr = targets[1:] - t[:, 1]
    values = u.values + dl[:, None] * left[None, :] + dr[:, None] * right[None, :]
    # make the traces bit-exact
    values[:, 0] = targets[:-1]
    values[:, -1] = targets[1:]
    return ConformingFunction(mesh, values)


def normalize(u, coeffs: CoefficientSet | None = None, mesh: Mesh | None = None, method: str = "b_norm"):
    """Scale u to unit norm and fix its sign (first clearly nonzero nodal
    value positive). Returns the same type as ``u``.

    ``b_norm`` gives int r u^2 dx = 1 by exact quadrature and needs
    ``coeffs``; ``euclidean`` gives a unit nodal coefficient vector.
    """
    if method not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {method!r}; expected one of {NORMALIZATIONS}")
    if isinstance(u, ElementFunction):
        mesh = u.mesh
        dofs = u.dofs
    elif isinstance(u, EigenPair):
        dofs = u.dofs
    else:
        dofs = np.asarray(u, dtype=float)

    if method == "b_norm":
        if coeffs is None or mesh is None:
            raise ValueError("b_norm normalization needs coefficients and a mesh")
        x = dofs / weighted_norm(dofs, weighted_mass(mesh, coeffs))
    else:
        x = dofs / weighted_norm(dofs, np.eye(len(dofs)))
    x = orient(x)

    if isinstance(u, ElementFunction):
        return type(u)(u.mesh, x)
    if isinstance(u, EigenPair):
        return dataclasses.replace(u, dofs=x)
    return x


def _reference_values(u_ref, x):
    try:
        with np.errstate(all="raise"):
            v = np.asarray(u_ref(x), dtype=float)
            dv = np.asarray(u_ref.derivative(x), dtype=float)
    except Exception as exc:  # any failure inside user-supplied callables
        raise ReferenceUnavailableError(f"reference evaluation failed: {exc}") from exc
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(dv))):
        raise ReferenceUnavailableError("reference evaluation returned non-finite values")
    return v, dv


def _h1_parts(u: ElementFunction, u_ref, sign: float, n_points: int):
    W = u.mesh.W
    rule = gauss_rule(n_points)
    nodes = gll_rule(W)
    V = lagrange_matrix(nodes.nodes, rule.nodes)
    V1 = V @ differentiation_matrix(nodes)
    l2 = h1 = 0.0
    for l in range(u.mesh.n_elements):
        emap = element_map(u.mesh, l)
        x = emap(rule.nodes)
        v, dv = _reference_values(u_ref, x)
        e0 = V @ u.values[l] - sign * v
        e1 = (V1 @ u.values[l]) / emap.jacobian - sign * dv
        l2 += emap.jacobian * np.dot(rule.weights, e0**2)
        h1 += emap.jacobian * np.dot(rule.weights, e1**2)
    return l2, h1


def h1_norm(u_ref, mesh: Mesh, n_points: int | None = None) -> float:
    """Element-wise H^1 norm of an evaluable reference on ``mesh``."""
    zero = ElementFunction(mesh, np.zeros(mesh.n_dofs))
    l2, h1 = _h1_parts(zero, u_ref, -1.0, n_points or 2 * mesh.W + 8)
    return math.sqrt(l2 + h1)


def h1_error(u_num, u_ref, mesh: Mesh | None = None, n_points: int | None = None,
             relative: bool = False, align: bool = True) -> float:
    """Broken H^1 distance between a nodal function and an evaluable
    reference (callable with a ``derivative`` method).

    Uses a Gauss rule with at least 2W+8 points per element. With ``align``
    the sign of the reference is chosen to minimize the error.
    """
    u = _as_element_function(u_num, mesh)
    n_points = max(n_points or 0, 2 * u.mesh.W + 8)
    signs = (1.0, -1.0) if align else (1.0,)
    err = min(math.sqrt(sum(_h1_parts(u, u_ref, s, n_points))) for s in signs)
    if relative:
        err /= h1_norm(u_ref, u.mesh, n_points)
    return err


class _Scaled:
    def __init__(self, f, c):
        self.f, self.c = f, c

    def __call__(self, x):
        return self.c * np.asarray(self.f(x), dtype=float)

    def derivative(self, x):
        return self.c * np.asarray(self.f.derivative(x), dtype=float)


def nodal_samples(u_ref, mesh: Mesh) -> np.ndarray:
    """Reference values at every element's GLL nodes (shared nodes repeated)."""
    xi = gll_rule(mesh.W).nodes
    return np.concatenate([_reference_values(u_ref, element_map(mesh, l)(xi))[0] for l in range(mesh.n_elements)])


def match_pairs(computed: Sequence[float], reference: Sequence[float]) -> list:
    """One-to-one greedy matching in ascending reference order: each
    reference eigenvalue takes the nearest unused computed one.
    Returns, per reference entry, the computed index or None."""
    free = list(range(len(computed)))
    out = []
    for lam_ref in reference:
        if not free:
            out.append(None)
            continue
        j = min(free, key=lambda c: (abs(computed[c] - lam_ref), c))
        free.remove(j)
        out.append(j)
    return out


def fit_slope(W: Sequence[float], errors: Sequence[float], window: str = "all"):
    """Least-squares slope of log10(error) against W.

    ``all`` uses every finite, positive error. ``pre_saturation`` also drops
    points within SATURATION_FACTOR of the smallest error or below
    SATURATION_FLOOR. Returns (slope, W_lo, W_hi), with nan entries when
    fewer than two points remain.
    """
    if window not in FIT_WINDOWS:
        raise ValueError(f"unknown fit window {window!r}; expected one of {FIT_WINDOWS}")
    W = np.asarray(W, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = np.isfinite(e) & (e > 0)
    if window == "pre_saturation" and np.any(keep):
        floor = SATURATION_FACTOR * np.min(e[keep])
        keep &= (e > floor) & (e >= SATURATION_FLOOR)
    if np.count_nonzero(keep) < 2:
        return math.nan, math.nan, math.nan
    slope = np.polyfit(W[keep], np.log10(e[keep]), 1)[0]
    return float(slope), float(W[keep].min()), float(W[keep].max())


@dataclass
class StudyRow:
    W: int
    dof: int
    i: int
    lambda_num: float
    lambda_ref: float
    lambda_abs_err: float
    h1_err: float


@dataclass
class ConvergenceReport:
    W_list: list
    k: int
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    fit_window: str = "all"
    normalization: str = "euclidean"

    ERROR_COLUMNS = ("W", "dof", "i", "lambda_num", "lambda_ref", "lambda_abs_err", "h1_err")
    SLOPE_COLUMNS = ("i", "slope", "window_lo", "window_hi")

    def table(self, column: str) -> np.ndarray:
        """(k, len(W_list)) array of one column; missing entries are nan."""
        out = np.full((self.k, len(self.W_list)), np.nan)
        col = {W: j for j, W in enumerate(self.W_list)}
        for row in self.rows:
            out[row.i - 1, col[row.W]] = getattr(row, column)
        return out

    def log10_h1(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log10(self.table("h1_err"))

    def missing(self) -> list:
        return [(r.W, r.i) for r in self.rows if math.isnan(r.lambda_num)]

    def write_errors_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.ERROR_COLUMNS)
        for r in self.rows:
            w.writerow([r.W, r.dof, r.i] + [fmt(v) for v in (r.lambda_num, r.lambda_ref, r.lambda_abs_err, r.h1_err)])

    def write_slopes_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.SLOPE_COLUMNS)
        for i in sorted(self.slopes):
            slope, lo, hi = self.slopes[i]
            w.writerow([i, fmt(slope), fmt_w(lo), fmt_w(hi)])


def fmt(v: float) -> str:
    return f"{v:.12g}"


def fmt_w(v: float) -> str:
    return "nan" if math.isnan(v) else str(int(v))


def convergence_study(problem: ProblemSpec, n_elements, W_list: Sequence[int], reference, k: int,
                      b_variant: str = "lsq_weighted", symmetrize: bool = False,
                      opts: SolveOptions | None = None, normalization: str = "euclidean",
                      fit_window: str = "all", correct: bool = True) -> ConvergenceReport:
    """Eigenvalue and H^1 eigenfunction errors over a sweep of W.

    ``reference`` is a sequence of reference pairs (objects with ``lam`` and,
    optionally, a callable eigenfunction with ``derivative``) or plain
    eigenvalues; without eigenfunctions the H^1 column is nan.

    ``normalization="euclidean"`` scales the corrected nodal vector and the
    reference sampled at the same nodes to unit Euclidean length before
    comparing; ``"b_norm"`` uses int r u^2 = 1 on both sides.
    """
    W_list = [int(W) for W in W_list]
    if len(W_list) < 1 or any(W < 3 for W in W_list):
        raise InvalidOrderError(f"W_list entries must be >= 3, got {W_list}")
    if W_list != sorted(set(W_list)):
        raise InvalidOrderError("W_list must be strictly ascending")
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    refs = list(reference)
    if len(refs) < k:
        raise RefinementRequestError(f"reference provides {len(refs)} eigenpairs, {k} requested")
    refs = refs[:k]
    ref_lams = [float(getattr(r, "lam", r)) for r in refs]
    opts = dataclasses.replace(opts or SolveOptions(), k=k)

    report = ConvergenceReport(W_list, k, fit_window=fit_window, normalization=normalization)
    for W in W_list:
        mesh = build_mesh(problem, n_elements, W)
        system = assemble(problem, mesh, b_variant, symmetrize)
        try:
            # ask for spares so that a missing low mode cannot shift the matching
            pairs = solve_gevp(system, dataclasses.replace(opts, k=min(system.n, k + 2)))
        except SizeError:
            pairs = solve_gevp(system, opts)
        match = match_pairs([p.lam for p in pairs], ref_lams)
        for i, (ref, lam_ref, j) in enumerate(zip(refs, ref_lams, match), start=1):
            if j is None:
                report.rows.append(StudyRow(W, mesh.n_dofs, i, math.nan, lam_ref, math.nan, math.nan))
                continue
            pair = pairs[j]
            h1 = math.nan
            if callable(ref):
                u = conforming_correction(pair, mesh, problem.bc, problem.interface) if correct else ElementFunction(mesh, pair.dofs)
                if normalization == "euclidean":
                    u = normalize(u, method="euclidean")
                    samples = nodal_samples(ref, mesh)
                    u_ref = _Scaled(ref, 1.0 / np.linalg.norm(samples))
                else:
                    u = normalize(u, problem.coefficients)
                    u_ref = ref
                h1 = h1_error(u, u_ref)
            report.rows.append(StudyRow(W, mesh.n_dofs, i, pair.lam, lam_ref, abs(pair.lam - lam_ref), h1))
    if report.missing():
        log.warning("missing eigenpairs (W, i): %s", report.missing())

    h1 = report.table("h1_err")
    for i in range(1, k + 1):
        report.slopes[i] = fit_slope(W_list, h1[i - 1], fit_window)
    return report
