"""Continuous problem  -(p u')' + q u = lambda r u  on (a, b), its boundary
and interface conditions, and the spectral element partition."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidOrderError, InvalidProblemError, MeshError
from .reference_element import sample

DEFAULT_SAMPLES = 1000


class BoundaryKind(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class BoundarySpec:
    kind: BoundaryKind

    def __post_init__(self):
        object.__setattr__(self, "kind", BoundaryKind(self.kind))


@dataclass(frozen=True, eq=False)
class Coefficient:
    """Piecewise smooth scalar function.

    ``pieces[i]`` is used on the i-th interval cut out by ``breakpoints``
    (interior points only). The function is right-continuous at breakpoints;
    use :meth:`piece_on` to get one-sided values on an element.
    """

    pieces: tuple
    breakpoints: tuple = ()
    constants: tuple | None = None
    label: str = ""

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise InvalidProblemError("need exactly one piece more than breakpoints")
        if list(self.breakpoints) != sorted(set(self.breakpoints)):
            raise InvalidProblemError("coefficient breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "Coefficient":
        value = float(value)
        return cls((_const(value),), (), (value,), label=f"{value:g}")

    @classmethod
    def piecewise_constant(cls, values: Sequence[float], breakpoints: Sequence[float]) -> "Coefficient":
        values = tuple(float(v) for v in values)
        return cls(tuple(_const(v) for v in values), tuple(float(b) for b in breakpoints), values)

    @classmethod
    def from_function(cls, f: Callable, breakpoints: Sequence[float] = (), label: str = "") -> "Coefficient":
        """Wrap one smooth function (or a list of per-piece functions)."""
        if callable(f):
            pieces = (f,) * (len(breakpoints) + 1)
        else:
            pieces = tuple(f)
        return cls(pieces, tuple(float(b) for b in breakpoints), None, label)

    @property
    def is_piecewise_constant(self) -> bool:
        return self.constants is not None

    def piece_index(self, x) -> np.ndarray:
        return np.searchsorted(np.asarray(self.breakpoints), np.asarray(x, dtype=float), side="right")

    def piece_on(self, x_left: float, x_right: float) -> Callable:
        """The smooth piece covering the element [x_left, x_right]."""
        idx = int(self.piece_index(0.5 * (x_left + x_right)))
        for bp in self.breakpoints:
            if x_left < bp < x_right:
                raise MeshError(f"coefficient breakpoint {bp} lies inside element ({x_left}, {x_right})")
        return self.pieces[idx]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        idx = self.piece_index(x)
        for i, f in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = sample(f, x[mask])
        return out


def _const(value):
    def f(x):
        return np.full(np.shape(x), value)
    return f


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    p: Coefficient
    q: Coefficient
    r: Coefficient

    @property
    def breakpoints(self) -> tuple:
        return tuple(sorted(set(self.p.breakpoints) | set(self.q.breakpoints) | set(self.r.breakpoints)))

    @property
    def piecewise_constant(self) -> bool:
        return self.p.is_piecewise_constant and self.q.is_piecewise_constant and self.r.is_piecewise_constant

    def scaled_r(self, c: float) -> "CoefficientSet":
        """Same problem with r replaced by c * r."""
        r = self.r
        consts = None if r.constants is None else tuple(c * v for v in r.constants)
        pieces = tuple((lambda f: (lambda x: c * sample(f, x)))(f) for f in r.pieces)
        return CoefficientSet(self.p, self.q, Coefficient(pieces, r.breakpoints, consts, r.label))

    def items(self):
        return (("p", self.p), ("q", self.q), ("r", self.r))


@dataclass(frozen=True)
class InterfaceSpec:
    """Interface at ``zeta`` with jump targets u(zeta-) - u(zeta+) and
    p u'(zeta-) - p u'(zeta+). Nonzero targets need ``allow_nonhomogeneous``."""

    zeta: float
    jump_value: float = 0.0
    jump_flux: float = 0.0
    allow_nonhomogeneous: bool = False

    def __post_init__(self):
        if (self.jump_value != 0.0 or self.jump_flux != 0.0) and not self.allow_nonhomogeneous:
            raise InvalidProblemError(
                "nonzero interface jump targets must be enabled with allow_nonhomogeneous=True"
            )

    @property
    def homogeneous(self) -> bool:
        return self.jump_value == 0.0 and self.jump_flux == 0.0


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    interval: tuple
    coefficients: CoefficientSet
    bc: BoundarySpec
    interface: InterfaceSpec | None = None

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        object.__setattr__(self, "interval", (a, b))
        if not a < b:
            raise DomainError(f"interval must satisfy a < b, got ({a}, {b})")
        if isinstance(self.bc, (str, BoundaryKind)):
            object.__setattr__(self, "bc", BoundarySpec(self.bc))
        if self.interface is not None:
            if not a < self.interface.zeta < b:
                raise DomainError(f"interface zeta={self.interface.zeta} is not inside ({a}, {b})")
            if self.bc.kind is not BoundaryKind.DIRICHLET:
                raise InvalidProblemError("interface problems are only supported with Dirichlet conditions")
        for name, coeff in self.coefficients.items():
            for bp in coeff.breakpoints:
                if not a < bp < b:
                    raise DomainError(f"breakpoint {bp} of {name} is outside ({a}, {b})")

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]


@dataclass(frozen=True)
class Element:
    index: int
    x_left: float
    x_right: float
    subdomain: int = 1

    @property
    def h(self) -> float:
        return self.x_right - self.x_left


@dataclass(frozen=True, eq=False)
class Mesh:
    """Partition into elements carrying a uniform polynomial order W.

    ``interface_node`` is the index i of the interior node shared by
    elements i and i+1 that sits at the interface, or None.
    """

    breakpoints: np.ndarray
    W: int
    elements: tuple
    interface_node: int | None = None

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def h(self) -> float:
        return max(e.h for e in self.elements)

    @property
    def n_dofs(self) -> int:
        return self.n_elements * (self.W + 1)


@dataclass(frozen=True)
class ElementMap:
    """Affine map from (-1, 1) onto element ``index``."""

    index: int
    x_left: float
    x_right: float

    @property
    def jacobian(self) -> float:
        return 0.5 * (self.x_right - self.x_left)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.x_left * (1.0 - xi) / 2.0 + self.x_right * (1.0 + xi) / 2.0

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        return (2.0 * x - self.x_left - self.x_right) / (self.x_right - self.x_left)


def build_mesh(spec: ProblemSpec, n_elements=None, W: int = 4, breakpoints=None) -> Mesh:
    """Partition the interval of ``spec`` into spectral elements.

    ``n_elements`` is an int or, for interface problems, a pair (N1, N2).
    An int is split between the subdomains in proportion to their lengths.
    Explicit ``breakpoints`` override the uniform layout; the interface is
    inserted bit-exactly if missing.
    """
    if int(W) != W or W < 3:
        raise InvalidOrderError(f"polynomial order W must be >= 3, got {W!r}")
    a, b = spec.interval
    zeta = spec.interface.zeta if spec.interface is not None else None

    if breakpoints is not None:
        x = np.asarray(breakpoints, dtype=float)
        if x.ndim != 1 or len(x) < 2 or np.any(np.diff(x) <= 0):
            raise MeshError("breakpoints must be a strictly increasing sequence")
        if x[0] != a or x[-1] != b:
            raise MeshError(f"breakpoints must start at {a} and end at {b}")
        if zeta is not None and zeta not in x:
            x = np.sort(np.append(x, zeta))
            if np.any(np.diff(x) <= 0):
                raise MeshError("interface insertion produced a degenerate element")
    elif zeta is not None:
        if n_elements is None:
            raise MeshError("n_elements or breakpoints is required")
        if np.ndim(n_elements) == 0:
            total = int(n_elements)
            n1 = int(round(total * (zeta - a) / (b - a)))
            n1 = min(max(n1, 1), total - 1)
            counts = (n1, total - n1)
        else:
            counts = tuple(int(c) for c in n_elements)
        if len(counts) != 2 or min(counts) < 1:
            raise MeshError(f"need at least one element per subdomain, got {counts}")
        x = np.concatenate([np.linspace(a, zeta, counts[0] + 1), np.linspace(zeta, b, counts[1] + 1)[1:]])
        x[counts[0]] = zeta
    else:
        if n_elements is None or np.ndim(n_elements) != 0 or int(n_elements) < 1:
            raise MeshError(f"need a positive element count, got {n_elements!r}")
        x = np.linspace(a, b, int(n_elements) + 1)
    x[0], x[-1] = a, b

    breaks = set(x.tolist())
    for bp in spec.coefficients.breakpoints:
        if bp not in breaks:
            raise MeshError(f"coefficient breakpoint {bp} is not a mesh node")

    interface_node = None
    elements = []
    for l in range(len(x) - 1):
        sub = 1
        if zeta is not None:
            sub = 1 if x[l + 1] <= zeta else 2
            if x[l + 1] == zeta:
                interface_node = l
        elements.append(Element(l, float(x[l]), float(x[l + 1]), sub))
    x.setflags(write=False)
    return Mesh(x, int(W), tuple(elements), interface_node)


def element_map(mesh: Mesh, l: int) -> ElementMap:
    """Map of element ``l`` (0-based)."""
    if not 0 <= l < mesh.n_elements:
        raise IndexError(f"element index {l} out of range 0..{mesh.n_elements - 1}")
    e = mesh.elements[l]
    return ElementMap(l, e.x_left, e.x_right)


@dataclass
class ValidationReport:
    valid: bool
    violations: list = field(default_factory=list)
    n_samples: int = DEFAULT_SAMPLES


def validate(spec: ProblemSpec, n_samples: int = DEFAULT_SAMPLES) -> ValidationReport:
    """Check p >= p0 > 0, q >= 0, r > 0 by sampling each piece, and
    p(a) = p(b) for periodic problems. Raises InvalidProblemError on failure."""
    a, b = spec.interval
    violations = []
    for name, coeff in spec.coefficients.items():
        edges = [a, *coeff.breakpoints, b]
        worst = None
        for i, f in enumerate(coeff.pieces):
            xs = np.linspace(edges[i], edges[i + 1], n_samples)
            ys = sample(f, xs)
            if not np.all(np.isfinite(ys)):
                j = int(np.argmax(~np.isfinite(ys)))
                violations.append((name, float(xs[j]), float("nan"), "not finite"))
                continue
            bad = ys < 0.0 if name == "q" else ys <= 0.0
            if np.any(bad):
                j = int(np.argmin(ys))
                if worst is None or ys[j] < worst[2]:
                    worst = (name, float(xs[j]), float(ys[j]), "negative" if name == "q" else "not positive")
        if worst is not None:
            violations.append(worst)
    if spec.bc.kind is BoundaryKind.PERIODIC:
        pa = float(sample(spec.coefficients.p.pieces[0], np.array([a]))[0])
        pb = float(sample(spec.coefficients.p.pieces[-1], np.array([b]))[0])
        if abs(pa - pb) > 1e-12 * max(1.0, abs(pa), abs(pb)):
            violations.append(("p", b, pb, f"periodic problem needs p(a) = p(b); p(a) = {pa}"))
    if violations:
        lines = "; ".join(f"{n} at x={x:.6g}: {why} (value {v:.6g})" for n, x, v, why in violations)
        raise InvalidProblemError(f"invalid problem: {lines}", violations)
    return ValidationReport(True, [], n_samples)
