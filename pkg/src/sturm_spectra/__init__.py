"""Least-squares spectral element eigensolver for one-dimensional
Sturm-Liouville problems  -(p u')' + q u = lambda r u  with Dirichlet,
Neumann, periodic and interface conditions."""

from .assembly import AssembledSystem, assemble
from .eigensolve import EigenPair, SolveOptions, condition_estimate, filter_spurious, solve_gevp
from .errors import SturmSpectraError
from .oracle import DispersionProblem, ReferenceEigenpair, dispersion_eigenvalues, fd_eigenvalues, reference_for
from .postprocess import (
    ConformingFunction,
    ConvergenceReport,
    conforming_correction,
    convergence_study,
    h1_error,
    normalize,
)
from .problem import (
    BoundaryKind,
    BoundarySpec,
    Coefficient,
    CoefficientSet,
    InterfaceSpec,
    Mesh,
    ProblemSpec,
    build_mesh,
    element_map,
    validate,
)
from .reference_element import gll_rule

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem",
    "BoundaryKind",
    "BoundarySpec",
    "Coefficient",
    "CoefficientSet",
    "ConformingFunction",
    "ConvergenceReport",
    "DispersionProblem",
    "EigenPair",
    "InterfaceSpec",
    "Mesh",
    "ProblemSpec",
    "ReferenceEigenpair",
    "SolveOptions",
    "SturmSpectraError",
    "assemble",
    "build_mesh",
    "condition_estimate",
    "conforming_correction",
    "convergence_study",
    "dispersion_eigenvalues",
    "element_map",
    "fd_eigenvalues",
    "filter_spurious",
    "gll_rule",
    "h1_error",
    "normalize",
    "reference_for",
    "solve_gevp",
    "validate",
]
