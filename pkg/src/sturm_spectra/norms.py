"""Normalization helpers shared by the solver and postprocessing."""

import numpy as np

from .errors import NormalizationError

SIGN_TOL = 1e-8


def weighted_norm(x: np.ndarray, mass: np.ndarray) -> float:
    value = float(x @ mass @ x)
    if not value > 0.0 or not np.isfinite(value):
        raise NormalizationError("cannot normalize a zero function")
    return np.sqrt(value)


def orient(x: np.ndarray) -> np.ndarray:
    """Flip the sign so the first clearly nonzero entry is positive.

    "Clearly nonzero" means above SIGN_TOL times the largest magnitude, so
    that roundoff-sized entries (e.g. weakly imposed Dirichlet traces) do not
    decide the sign.
    """
    x = np.asarray(x, dtype=float)
    amax = np.max(np.abs(x))
    if amax == 0.0:
        raise NormalizationError("cannot orient a zero vector")
    j = int(np.argmax(np.abs(x) > SIGN_TOL * amax))
    return -x if x[j] < 0 else x
