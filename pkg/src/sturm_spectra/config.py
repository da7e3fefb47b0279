"""YAML run configuration with a strict schema.

Numbers may be written as fractions in quotes (``"1/3"``); they are stored
as floats, so a parse -> dump -> parse cycle is stable.
"""

from __future__ import annotations

import os
from fractions import Fraction
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, ExpressionError
from .expressions import Expression
from .problem import BoundarySpec, Coefficient, CoefficientSet, InterfaceSpec, ProblemSpec

SEED_ENV = "STURM_SPECTRA_SEED"


def _number(v):
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a number: {v!r}") from exc
    return v


Number = Annotated[float, BeforeValidator(_number)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantCoeff(_Strict):
    form: Literal["constant"]
    value: Number


class PiecewiseConstantCoeff(_Strict):
    form: Literal["piecewise_constant"]
    values: list[Number]
    breakpoints: list[Number]

    @model_validator(mode="after")
    def _sizes(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("piecewise_constant needs one more value than breakpoints")
        return self


class ExpressionCoeff(_Strict):
    form: Literal["expression"]
    expr: Union[str, list[str]]
    breakpoints: list[Number] = Field(default_factory=list)

    @model_validator(mode="after")
    def _compile(self):
        exprs = [self.expr] if isinstance(self.expr, str) else self.expr
        if len(exprs) not in (1, len(self.breakpoints) + 1):
            raise ValueError("give one expression or one per piece")
        for e in exprs:
            Expression(e)
        return self


CoeffConfig = Annotated[Union[ConstantCoeff, PiecewiseConstantCoeff, ExpressionCoeff], Field(discriminator="form")]


class CoefficientsConfig(_Strict):
    p: CoeffConfig
    q: CoeffConfig
    r: CoeffConfig


class InterfaceConfig(_Strict):
    zeta: Number
    jump_value: Number = 0.0
    jump_flux: Number = 0.0
    allow_nonhomogeneous: bool = False


class ProblemConfig(_Strict):
    interval: tuple[Number, Number]
    coefficients: CoefficientsConfig
    bc: Literal["dirichlet", "neumann", "periodic"]
    interface: InterfaceConfig | None = None


class DiscretizationConfig(_Strict):
    elements: Union[int, tuple[int, int], None] = None
    breakpoints: list[Number] | None = None
    W: int | None = None
    W_list: list[int] | None = None

    @model_validator(mode="after")
    def _layout(self):
        if (self.elements is None) == (self.breakpoints is None):
            raise ValueError("give exactly one of 'elements' or 'breakpoints'")
        return self


class SolverConfig(_Strict):
    k: int = 6
    b_variant: Literal["lsq_weighted", "plain_mass", "lsq", "mass"] = "lsq_weighted"
    im_tol: float = 1e-8
    res_tol: float = 0.5
    symmetrize: bool = False
    method: Literal["auto", "lsq_pencil", "qz", "symmetric"] = "auto"


class StudyConfig(_Strict):
    reference: str = "oracle"
    fd_grid: int | None = None
    normalization: Literal["euclidean", "b_norm"] = "euclidean"
    fit_window: Literal["all", "pre_saturation"] = "all"


class OutputConfig(_Strict):
    directory: str = "out"
    tables: list[Literal["eigenvalues", "errors", "slopes", "oracle"]] = Field(
        default_factory=lambda: ["eigenvalues", "errors", "slopes", "oracle"]
    )


class RunConfig(_Strict):
    problem: ProblemConfig
    discretization: DiscretizationConfig
    solver: SolverConfig = Field(default_factory=SolverConfig)
    study: StudyConfig = Field(default_factory=StudyConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)

    def problem_spec(self) -> ProblemSpec:
        return build_problem(self.problem)


class _UniqueKeyLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            mark = key_node.start_mark
            raise ConfigError(f"duplicate key {key!r}", mark.line + 1, mark.column + 1)
        seen.add(key)
    return loader.construct_mapping(node, deep)


_UniqueKeyLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _node_at(node, loc):
    """Follow a pydantic error location through the YAML node tree."""
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == part:
                    nxt = v
                    break
                if k.value == str(part) and nxt is None:
                    nxt = k
            if nxt is None:
                return node
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
        else:
            return node
    return node


def _key_node(node, loc):
    """Node of the offending key for 'extra_forbidden' errors."""
    parent = _node_at(node, loc[:-1])
    if isinstance(parent, yaml.MappingNode):
        for k, _ in parent.value:
            if k.value == loc[-1]:
                return k
    return parent


def parse_config(text: str) -> RunConfig:
    try:
        root = yaml.compose(text, Loader=_UniqueKeyLoader)
        data = yaml.load(text, Loader=_UniqueKeyLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"YAML syntax error: {exc.problem}", mark.line + 1, mark.column + 1) from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", 1, 1)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and p in ("constant", "piecewise_constant", "expression")))
        path = ".".join(str(p) for p in loc)
        if err["type"] == "extra_forbidden":
            msg = f"unknown key {loc[-1]!r} at {path}"
            node = _key_node(root, loc)
        else:
            msg = f"{path}: {err['msg']}"
            node = _node_at(root, loc)
        mark = node.start_mark
        raise ConfigError(msg, mark.line + 1, mark.column + 1) from exc
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def build_coefficient(c) -> Coefficient:
    if isinstance(c, ConstantCoeff):
        return Coefficient.constant(c.value)
    if isinstance(c, PiecewiseConstantCoeff):
        return Coefficient.piecewise_constant(c.values, c.breakpoints)
    exprs = [c.expr] if isinstance(c.expr, str) else c.expr
    fns = [Expression(e) for e in exprs]
    if len(fns) == 1:
        return Coefficient.from_function(fns[0], c.breakpoints, label=exprs[0])
    return Coefficient.from_function(fns, c.breakpoints, label=";".join(exprs))


def build_problem(cfg: ProblemConfig) -> ProblemSpec:
    coeffs = CoefficientSet(*(build_coefficient(getattr(cfg.coefficients, n)) for n in "pqr"))
    interface = None
    if cfg.interface is not None:
        i = cfg.interface
        interface = InterfaceSpec(i.zeta, i.jump_value, i.jump_flux, i.allow_nonhomogeneous)
    return ProblemSpec(tuple(cfg.interval), coeffs, BoundarySpec(cfg.bc), interface)


def seeded_rng(default: int = 20240601) -> np.random.Generator:
    """RNG seeded from $STURM_SPECTRA_SEED when set."""
    seed = os.environ.get(SEED_ENV)
    return np.random.default_rng(int(seed) if seed else default)
