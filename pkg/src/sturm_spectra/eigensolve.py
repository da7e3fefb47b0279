"""Generalized eigenproblem  A x = lambda B x  and spurious-mode filtering."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import AssembledSystem
from .errors import SizeError, SolverError, SolverPathError
from .norms import orient, weighted_norm

log = logging.getLogger(__name__)

METHODS = ("auto", "lsq_pencil", "qz", "symmetric")
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SolveOptions:
    """``target`` is "smallest" or a float shift sigma (nearest eigenvalues).

    ``res_tol`` bounds the relative least-squares residual
    ||K x - lam M x|| / (|lam| ||M x||); see :func:`filter_spurious`.
    """

    k: int = 6
    im_tol: float = 1e-8
    res_tol: float = 0.5
    target: str | float = "smallest"
    method: str = "auto"

    def __post_init__(self):
        if self.k < 0:
            raise SizeError(f"k must be >= 0, got {self.k}")
        if self.im_tol <= 0 or self.res_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in METHODS:
            raise SolverPathError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if isinstance(self.target, str) and self.target != "smallest":
            raise ValueError(f"target must be 'smallest' or a number, got {self.target!r}")


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    dofs: np.ndarray
    residual: float
    v_residual: float
    imag_part: float

    def element_values(self, W: int) -> np.ndarray:
        return self.dofs.reshape(-1, W + 1)


def resolve_method(system: AssembledSystem, method: str = "auto") -> str:
    if method != "auto":
        return method
    if system.b_variant == "plain_mass":
        return "symmetric"
    if system.symmetrized:
        return "qz"
    return "lsq_pencil"


def raw_eigenpairs(system: AssembledSystem, method: str = "auto"):
    """All n eigenpairs of the pencil, unfiltered. Returns (lam, X) complex."""
    method = resolve_method(system, method)
    if method == "lsq_pencil":
        if system.b_variant != "lsq_weighted" or system.symmetrized:
            raise SolverPathError("lsq_pencil needs the unsymmetrized lsq_weighted B; use method='qz'")
        # K^T K x = lam K^T M x  <=>  R x = lam Q^T M x  for K = Q R (R nonsingular);
        # avoids squaring the condition number of K
        Q, R = scipy.linalg.qr(system.K, mode="economic")
        lam, X = scipy.linalg.eig(R, Q.T @ system.M)
        return lam, X
    if method == "qz":
        lam, X = scipy.linalg.eig(system.A, system.B)
        return lam, X
    if method == "symmetric":
        B = system.B
        if not np.allclose(B, B.T, rtol=0.0, atol=SYMMETRY_TOL * np.abs(B).max()):
            raise SolverPathError("symmetric-definite path needs a symmetric B; use method='qz'")
        try:
            lam, X = scipy.linalg.eigh(system.A, 0.5 * (B + B.T))
        except np.linalg.LinAlgError as exc:
            raise SolverPathError(
                f"B is not positive definite to working precision ({exc}); use method='qz'"
            ) from exc
        return lam.astype(complex), X.astype(complex)
    raise SolverPathError(f"unknown method {method!r}")


def _real_vector(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        j = int(np.argmax(np.abs(x)))
        x = (x * np.conj(x[j]) / abs(x[j])).real
    return np.asarray(x, dtype=float)


def filter_spurious(raw, system: AssembledSystem, opts: SolveOptions) -> list[EigenPair]:
    """Keep finite, real, positive eigenvalues whose relative residual is at
    most ``opts.res_tol``; normalize, sort ascending and truncate to k."""
    lam, X = raw
    kept = []
    dropped = 0
    for j in range(len(lam)):
        lj = lam[j]
        if not np.isfinite(lj) or abs(lj.imag) > opts.im_tol * (1.0 + abs(lj)):
            dropped += 1
            continue
        value = float(lj.real)
        if value <= 0.0:
            dropped += 1
            continue
        x = _real_vector(X[:, j])
        Kx = system.K @ x
        Mx = system.M @ x
        res = np.linalg.norm(Kx - value * Mx)
        scale = value * np.linalg.norm(Mx)
        rel = res / scale if scale > 0 else np.inf
        if not rel <= opts.res_tol:
            dropped += 1
            continue
        pnorm = np.sqrt(max(x @ system.P @ x, 0.0))
        x = orient(x / weighted_norm(x, system.mass))
        kept.append(EigenPair(value, x, float(rel), float(res / pnorm), float(lj.imag)))
    log.debug("filter_spurious kept %d of %d pairs", len(kept), len(lam))

    if not isinstance(opts.target, str):
        kept.sort(key=lambda p: abs(p.lam - float(opts.target)))
        kept = kept[: opts.k]
    kept.sort(key=lambda p: p.lam)
    if isinstance(opts.target, str):
        kept = kept[: opts.k]
    if len(kept) < opts.k:
        log.info("only %d of %d requested eigenpairs survived filtering", len(kept), opts.k)
    return kept


def solve_gevp(system: AssembledSystem, opts: SolveOptions | None = None) -> list[EigenPair]:
    opts = opts or SolveOptions()
    n = system.n
    if system.A.shape != system.B.shape or system.A.shape != (n, n):
        raise SizeError("A and B must be square and of equal size")
    if opts.k > n:
        raise SizeError(f"k={opts.k} exceeds the number of unknowns n={n}")
    if opts.k == 0:
        return []
    if not system.homogeneous:
        raise SolverError("the eigenproblem needs homogeneous jump data; nonzero targets define a source problem")
    return filter_spurious(raw_eigenpairs(system, opts.method), system, opts)


def condition_estimate(system: AssembledSystem) -> dict:
    """Spectral condition numbers of A and of the P-preconditioned A."""
    ev = scipy.linalg.eigvalsh(system.A)
    evp = scipy.linalg.eigvalsh(system.A, system.P)
    return {
        "cond_A": float(ev[-1] / ev[0]) if ev[0] > 0 else np.inf,
        "cond_PinvA": float(evp[-1] / evp[0]) if evp[0] > 0 else np.inf,
    }


def backward_error(system: AssembledSystem, pair: EigenPair) -> float:
    """||A x - lam B x|| / (||A x|| + |lam| ||B x||)."""
    Ax = system.A @ pair.dofs
    Bx = system.B @ pair.dofs
    return float(np.linalg.norm(Ax - pair.lam * Bx) / (np.linalg.norm(Ax) + abs(pair.lam) * np.linalg.norm(Bx)))
