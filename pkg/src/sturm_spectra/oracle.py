"""Independent reference spectra.

Closed forms and a dispersion relation cover piecewise-constant problems with
at most one interface; a conservative finite-difference scheme covers
general coefficients.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import GridAlignmentError, ReferenceUnavailableError, RefinementRequestError
from .problem import BoundaryKind, BoundarySpec, ProblemSpec

BISECT_RTOL = 1e-13
BRACKETS_PER_PERIOD = 20
MIN_FD_GRID = 50
DEFAULT_FD_GRID = 2000


@dataclass(frozen=True)
class DispersionProblem:
    """-beta u'' + shift u = lambda r u with beta constant per subdomain.

    ``betas`` has one entry without an interface and two (left, right of
    ``zeta``) with one.
    """

    interval: tuple
    betas: tuple
    bc: BoundaryKind = BoundaryKind.DIRICHLET
    zeta: float | None = None
    shift: float = 0.0
    r: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryKind(self.bc.kind if isinstance(self.bc, BoundarySpec) else self.bc))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        a, b = self.interval
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got {self.interval}")
        if any(not beta > 0 for beta in self.betas) or not self.r > 0:
            raise ValueError("beta and r must be positive")
        if len(self.betas) != (1 if self.zeta is None else 2):
            raise ValueError("need one beta per subdomain")
        if self.zeta is not None:
            if not a < self.zeta < b:
                raise ValueError(f"zeta={self.zeta} is not inside {self.interval}")
            if self.bc is not BoundaryKind.DIRICHLET:
                raise ReferenceUnavailableError("the interface relation is implemented for Dirichlet ends only")

    @classmethod
    def from_problem(cls, spec: ProblemSpec) -> "DispersionProblem":
        """Reduce a ProblemSpec, or raise ReferenceUnavailableError."""
        c = spec.coefficients
        if not c.piecewise_constant:
            raise ReferenceUnavailableError("dispersion oracle needs piecewise-constant coefficients")
        if len(c.q.constants) != 1 or len(c.r.constants) != 1:
            raise ReferenceUnavailableError("dispersion oracle needs constant q and r")
        zeta = None
        if spec.interface is not None:
            if not spec.interface.homogeneous:
                raise ReferenceUnavailableError("dispersion oracle needs homogeneous interface data")
            zeta = spec.interface.zeta
        p = c.p
        if len(p.breakpoints) > 1 or (p.breakpoints and p.breakpoints[0] != zeta):
            raise ReferenceUnavailableError("p may only jump at the interface")
        if zeta is None:
            betas = p.constants[:1]
        elif p.breakpoints:
            betas = p.constants
        else:
            betas = (p.constants[0], p.constants[0])
        return cls(spec.interval, betas, spec.bc.kind, zeta, c.q.constants[0], c.r.constants[0])


@dataclass(frozen=True, eq=False)
class ReferenceEigenpair:
    """Eigenvalue with a closed-form eigenfunction normalized to int r u^2 = 1.

    Calling the pair evaluates u; ``derivative`` and ``second_derivative``
    evaluate u' and u''.
    """

    lam: float
    u: Callable
    du: Callable
    d2u: Callable | None = None
    index: int = 0

    def __call__(self, x):
        return self.u(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.du(np.asarray(x, dtype=float))

    def second_derivative(self, x):
        if self.d2u is None:
            raise NotImplementedError("no second derivative available")
        return self.d2u(np.asarray(x, dtype=float))


def _trig_pair(lam, kind, omega, a, scale, index):
    if omega == 0.0:
        return ReferenceEigenpair(lam, lambda x: np.full(np.shape(x), scale), lambda x: np.zeros(np.shape(x)),
                                  lambda x: np.zeros(np.shape(x)), index)
    if kind == "sin":
        return ReferenceEigenpair(
            lam,
            lambda x: scale * np.sin(omega * (x - a)),
            lambda x: scale * omega * np.cos(omega * (x - a)),
            lambda x: -scale * omega**2 * np.sin(omega * (x - a)),
            index,
        )
    return ReferenceEigenpair(
        lam,
        lambda x: scale * np.cos(omega * (x - a)),
        lambda x: -scale * omega * np.sin(omega * (x - a)),
        lambda x: -scale * omega**2 * np.cos(omega * (x - a)),
        index,
    )


def _closed_form(prob: DispersionProblem, k: int) -> list:
    a, b = prob.interval
    L = b - a
    beta = prob.betas[0]
    out = []
    amp = math.sqrt(2.0 / (prob.r * L))
    if prob.bc is BoundaryKind.DIRICHLET:
        for n in range(1, k + 1):
            w = n * math.pi / L
            out.append(_trig_pair((beta * w * w + prob.shift) / prob.r, "sin", w, a, amp, n))
    elif prob.bc is BoundaryKind.NEUMANN:
        for n in range(k):
            w = n * math.pi / L
            scale = amp if n else 1.0 / math.sqrt(prob.r * L)
            out.append(_trig_pair((beta * w * w + prob.shift) / prob.r, "cos", w, a, scale, n))
    else:
        out.append(_trig_pair(prob.shift / prob.r, "cos", 0.0, a, 1.0 / math.sqrt(prob.r * L), 0))
        n = 1
        while len(out) < k:
            w = 2.0 * n * math.pi / L
            lam = (beta * w * w + prob.shift) / prob.r
            out.append(_trig_pair(lam, "cos", w, a, amp, n))
            out.append(_trig_pair(lam, "sin", w, a, amp, n))
            n += 1
    return out[:k]


def _char(s, a1, a2, sb1, sb2):
    """g(lambda) / sqrt(lambda) written in s = sqrt(lambda)."""
    return sb1 * np.cos(a1 * s) * np.sin(a2 * s) + sb2 * np.cos(a2 * s) * np.sin(a1 * s)


def interface_count(lam0: float, prob: DispersionProblem) -> int:
    """Number of eigenvalues below lam0 of -beta u'' = lam0 u (q = 0, r = 1)
    from the Pruefer phase of the solution with u(a) = 0."""
    a, b = prob.interval
    b1, b2 = prob.betas
    s = math.sqrt(lam0)
    k1, k2 = s / math.sqrt(b1), s / math.sqrt(b2)
    phi = k1 * (prob.zeta - a)
    # right of zeta write u = R sin(psi), p u' = b2 k2 R cos(psi); psi stays in
    # the same half-period as phi so the phase is continuous
    m = math.floor(phi / math.pi)
    theta = phi - m * math.pi
    psi = m * math.pi + math.atan2(b2 * k2 * math.sin(theta), b1 * k1 * math.cos(theta))
    psi += k2 * (b - prob.zeta)
    return max(math.ceil(psi / math.pi) - 1, 0)


def _bisect(f, lo, hi, flo):
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        # relative 1e-13 in lambda = s^2 needs half that in s
        if hi - lo <= 0.5 * BISECT_RTOL * lo:
            break
    return 0.5 * (lo + hi)


def interface_roots(prob: DispersionProblem, k: int, step: float | None = None) -> np.ndarray:
    """First k positive roots s = sqrt(lambda_0) of the interface relation."""
    a, b = prob.interval
    b1, b2 = prob.betas
    a1, a2 = (prob.zeta - a) / math.sqrt(b1), (b - prob.zeta) / math.sqrt(b2)
    sb1, sb2 = math.sqrt(b1), math.sqrt(b2)
    if step is None:
        step = math.pi / (BRACKETS_PER_PERIOD * max(a1, a2))

    def f(s):
        return float(_char(s, a1, a2, sb1, sb2))

    roots = []
    s_lo, f_lo = step, f(step)
    while len(roots) < k:
        grid = s_lo + step * np.arange(1, 1025)
        vals = _char(grid, a1, a2, sb1, sb2)
        for s_hi, f_hi in zip(grid, vals):
            if f_lo == 0.0:
                roots.append(s_lo)
            elif f_lo * f_hi < 0:
                roots.append(_bisect(f, s_lo, s_hi, f_lo))
            s_lo, f_lo = s_hi, f_hi
            if len(roots) >= k:
                break
    return np.array(roots[:k])


def _interface_pair(prob: DispersionProblem, s: float, index: int) -> ReferenceEigenpair:
    a, b = prob.interval
    z = prob.zeta
    b1, b2 = prob.betas
    k1, k2 = s / math.sqrt(b1), s / math.sqrt(b2)
    L1, L2 = z - a, b - z
    s1, c1 = math.sin(k1 * L1), math.cos(k1 * L1)
    s2, c2 = math.sin(k2 * L2), math.cos(k2 * L2)
    # u = sin(k1 (x - a)) on the left and C sin(k2 (b - x)) on the right;
    # value and flux matching are consistent at a root, so solve them jointly
    # in the least-squares sense to stay stable when either one degenerates
    fv, ff = s2, -b2 * k2 * c2
    C = (s1 * fv + b1 * k1 * c1 * ff) / (fv * fv + ff * ff)
    I1 = L1 / 2 - math.sin(2 * k1 * L1) / (4 * k1)
    I2 = L2 / 2 - math.sin(2 * k2 * L2) / (4 * k2)
    amp = 1.0 / math.sqrt(prob.r * (I1 + C * C * I2))

    def u(x):
        return amp * np.where(x < z, np.sin(k1 * (x - a)), C * np.sin(k2 * (b - x)))

    def du(x):
        return amp * np.where(x < z, k1 * np.cos(k1 * (x - a)), -C * k2 * np.cos(k2 * (b - x)))

    def d2u(x):
        return -amp * np.where(x < z, k1 * k1 * np.sin(k1 * (x - a)), C * k2 * k2 * np.sin(k2 * (b - x)))

    return ReferenceEigenpair((s * s + prob.shift) / prob.r, u, du, d2u, index)


def dispersion_eigenvalues(prob, k: int, check: bool = True) -> list:
    """First k exact eigenpairs of a piecewise-constant problem.

    Accepts a DispersionProblem or a reducible ProblemSpec. With one
    interface the roots are bracketed on a uniform sqrt(lambda) grid and
    refined by bisection; ``check`` compares the root count below each root
    against an independent phase count and raises RefinementRequestError on
    a mismatch.
    """
    if isinstance(prob, ProblemSpec):
        prob = DispersionProblem.from_problem(prob)
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return []
    if prob.zeta is None:
        return _closed_form(prob, k)
    roots = interface_roots(prob, k)
    if check:
        for n, s in enumerate(roots, start=1):
            nxt = roots[n] if n < len(roots) else s + math.pi / (2 * sum(prob.betas))
            probe = (0.5 * (s + min(nxt, s * 1.01))) ** 2
            if interface_count(probe, prob) != n:
                raise RefinementRequestError(
                    f"root count mismatch near lambda={s * s:.6g}: bracketing grid too coarse"
                )
    return [_interface_pair(prob, s, n) for n, s in enumerate(roots, start=1)]


def _grid_index(x: float, a: float, h: float, n: int, what: str) -> int:
    j = (x - a) / h
    jr = int(round(j))
    if abs(j - jr) > 1e-9 * n:
        denom = Fraction((x - a) / (n * h)).limit_denominator(10_000).denominator
        raise GridAlignmentError(f"{what} {x} is not a grid node for n_grid={n}; use a multiple of {denom}")
    return jr


def aligned_grid(spec: ProblemSpec, minimum: int = DEFAULT_FD_GRID, limit: int = 20_000) -> int:
    """Smallest n >= minimum that puts every breakpoint on a grid node."""
    a, b = spec.interval
    points = set(spec.coefficients.breakpoints)
    if spec.interface is not None:
        points.add(spec.interface.zeta)
    denom = 1
    for x in points:
        frac = Fraction((x - a) / (b - a)).limit_denominator(1000)
        if abs(float(frac) - (x - a) / (b - a)) > 1e-12:
            raise GridAlignmentError(f"breakpoint {x} has no small rational position")
        denom = denom * frac.denominator // math.gcd(denom, frac.denominator)
    n = -(-minimum // denom) * denom
    if n > limit:
        raise GridAlignmentError(f"aligned grid size {n} exceeds {limit}")
    return n


def _cell_values(coeff, xm: np.ndarray) -> np.ndarray:
    return np.asarray(coeff(xm), dtype=float)


def fd_eigenvalues(problem: ProblemSpec, n_grid: int, k: int) -> np.ndarray:
    """First k eigenvalues of a conservative 3-point scheme on n_grid cells.

    p is sampled at cell midpoints; q and r are lumped onto nodes as the mean
    of the adjacent midpoint values, so nothing is sampled on a breakpoint.
    The grid must contain the interface and every coefficient breakpoint.
    """
    if n_grid < MIN_FD_GRID:
        raise ValueError(f"n_grid must be >= {MIN_FD_GRID}, got {n_grid}")
    if k <= 0:
        return np.array([])
    a, b = problem.interval
    n = int(n_grid)
    h = (b - a) / n
    for x in problem.coefficients.breakpoints:
        _grid_index(x, a, h, n, "coefficient breakpoint")
    if problem.interface is not None:
        if not problem.interface.homogeneous:
            raise ReferenceUnavailableError("the FD oracle needs homogeneous interface data")
        _grid_index(problem.interface.zeta, a, h, n, "interface")

    x = a + h * np.arange(n + 1)
    xm = 0.5 * (x[:-1] + x[1:])
    c = problem.coefficients
    pm = _cell_values(c.p, xm)
    qm = _cell_values(c.q, xm)
    rm = _cell_values(c.r, xm)
    # node weights: half of each adjacent cell
    qn = np.zeros(n + 1)
    rn = np.zeros(n + 1)
    qn[:-1] += 0.5 * h * qm
    qn[1:] += 0.5 * h * qm
    rn[:-1] += 0.5 * h * rm
    rn[1:] += 0.5 * h * rm
    kind = problem.bc.kind

    # stiffness: S = sum over cells of (p_m / h) [[1, -1], [-1, 1]] plus lumped q
    diag = qn.copy()
    diag[:-1] += pm / h
    diag[1:] += pm / h
    off = -pm / h

    if kind is BoundaryKind.DIRICHLET:
        d, e, m = diag[1:-1], off[1:-1], rn[1:-1]
    elif kind is BoundaryKind.NEUMANN:
        d, e, m = diag, off, rn
    else:
        d = diag[:-1].copy()
        d[0] += diag[-1]  # node n is node 0
        m = rn[:-1].copy()
        m[0] += rn[-1]
        S = np.diag(d) + np.diag(off[:-1], 1) + np.diag(off[:-1], -1)
        S[0, -1] += off[-1]
        S[-1, 0] += off[-1]
        isq = 1.0 / np.sqrt(m)
        S = isq[:, None] * S * isq[None, :]
        kk = min(k, len(m))
        return scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=[0, kk - 1])

    isq = 1.0 / np.sqrt(m)
    kk = min(k, len(m))
    return scipy.linalg.eigh_tridiagonal(d * isq * isq, e * isq[:-1] * isq[1:], eigvals_only=True,
                                         select="i", select_range=(0, kk - 1))


def observed_order(values: np.ndarray, exact: float | None = None) -> float:
    """Observed order from three results on grids refined by a factor 2."""
    v = np.asarray(values, dtype=float)
    if exact is None:
        return float(math.log2(abs(v[0] - v[1]) / abs(v[1] - v[2])))
    return float(math.log2(abs(v[0] - exact) / abs(v[1] - exact)))


@dataclass(frozen=True)
class OracleResult:
    method: str
    eigenvalues: np.ndarray
    pairs: list | None = None


def reference_for(problem: ProblemSpec, k: int, fd_grid: int | None = None) -> OracleResult:
    """Dispersion oracle when it applies, otherwise finite differences.

    An explicit ``fd_grid`` forces the FD path. Raises
    ReferenceUnavailableError when neither applies.
    """
    if fd_grid is None:
        try:
            pairs = dispersion_eigenvalues(problem, k)
            return OracleResult("dispersion", np.array([p.lam for p in pairs]), pairs)
        except ReferenceUnavailableError:
            pass
    try:
        n = fd_grid if fd_grid is not None else aligned_grid(problem)
        return OracleResult("fd", fd_eigenvalues(problem, n, k))
    except GridAlignmentError as exc:
        raise ReferenceUnavailableError(f"no oracle applies: {exc}") from exc


def write_oracle_csv(fh, result: OracleResult) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("i", "lambda", "method"))
    for i, lam in enumerate(result.eigenvalues, start=1):
        w.writerow((i, f"{lam:.12g}", result.method))


def write_eigenfunction_csv(fh, pair: ReferenceEigenpair, x) -> None:
    x = np.asarray(x, dtype=float)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("x", "u", "du"))
    for xi, u, du in zip(x, pair(x), pair.derivative(x)):
        w.writerow((f"{xi:.12g}", f"{u:.12g}", f"{du:.12g}"))


def read_reference_csv(fh) -> np.ndarray:
    """Eigenvalues from a CSV with ``i`` and ``lambda`` columns."""
    rows = list(csv.DictReader(fh))
    if not rows or "lambda" not in rows[0]:
        raise ReferenceUnavailableError("reference CSV needs a 'lambda' column")
    rows.sort(key=lambda r: int(r.get("i", 0) or 0))
    return np.array([float(r["lambda"]) for r in rows])
