"""Command-line front end: ``sturm-spectra solve|study|oracle --config FILE``.

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 no reference available.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .assembly import assemble
from .config import RunConfig, load_config
from .eigensolve import SolveOptions, solve_gevp
from .errors import (
    ConfigError,
    DomainError,
    InvalidCoefficientError,
    InvalidOrderError,
    InvalidProblemError,
    MeshError,
    ReferenceUnavailableError,
    RefinementRequestError,
    SolverError,
    SizeError,
    SturmSpectraError,
)
from .oracle import OracleResult, read_reference_csv, reference_for, write_oracle_csv
from .postprocess import convergence_study, fmt
from .problem import build_mesh, validate

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_REFERENCE = 0, 2, 3, 4
log = logging.getLogger("sturm_spectra")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sturm-spectra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "compute eigenvalues and write eigenvalues.csv"),
        ("study", "run a W-convergence study and write errors.csv and slopes.csv"),
        ("oracle", "write reference eigenvalues to oracle.csv"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--W", type=int, help="polynomial order (overrides the config)")
        p.add_argument("--W-list", type=_int_list, dest="W_list", help="comma-separated orders, e.g. 4,6,8")
        p.add_argument("--k", type=int, help="number of eigenvalues")
        p.add_argument("--b-variant", choices=("lsq", "mass"), help="lsq = lsq_weighted, mass = plain_mass")
        p.add_argument("--symmetrize", action="store_true", default=None, help="use (B + B^T)/2")
        p.add_argument("--reference", help="'oracle' or a CSV file with i,lambda columns")
        p.add_argument("--fd-grid", type=int, help="force the finite-difference oracle on this many cells")
        p.add_argument("--out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    disc = {}
    if args.W is not None:
        disc.update(W=args.W, W_list=None)
    if args.W_list is not None:
        disc.update(W=None, W_list=args.W_list)
    solver = {}
    if args.k is not None:
        solver["k"] = args.k
    if args.b_variant is not None:
        solver["b_variant"] = args.b_variant
    if args.symmetrize:
        solver["symmetrize"] = True
    study = {}
    if args.reference is not None:
        study["reference"] = args.reference
    if args.fd_grid is not None:
        study["fd_grid"] = args.fd_grid
    data = cfg.model_dump()
    data["discretization"].update(disc)
    data["solver"].update(solver)
    data["study"].update(study)
    if args.out is not None:
        data["output"]["directory"] = args.out
    try:
        return RunConfig.model_validate(data)
    except Exception as exc:
        raise ConfigError(f"invalid override: {exc}") from exc


def _mesh_args(cfg: RunConfig):
    d = cfg.discretization
    return d.elements, d.breakpoints


def _solve_options(cfg: RunConfig, k: int | None = None) -> SolveOptions:
    s = cfg.solver
    return SolveOptions(k=s.k if k is None else k, im_tol=s.im_tol, res_tol=s.res_tol, method=s.method)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(cfg: RunConfig) -> int:
    spec = cfg.problem_spec()
    validate(spec)
    d = cfg.discretization
    W_values = [d.W] if d.W is not None else (d.W_list or [])
    if not W_values:
        raise ConfigError("solve needs discretization.W or W_list")
    elements, breakpoints = _mesh_args(cfg)
    rows = []
    for W in W_values:
        mesh = build_mesh(spec, elements, W, breakpoints)
        system = assemble(spec, mesh, cfg.solver.b_variant, cfg.solver.symmetrize)
        pairs = solve_gevp(system, _solve_options(cfg))
        if len(pairs) < cfg.solver.k:
            log.warning("W=%d: only %d of %d eigenpairs passed the filters", W, len(pairs), cfg.solver.k)
        for i, p in enumerate(pairs, start=1):
            rows.append((W, mesh.n_dofs, i, p.lam, p.residual))
            print(f"W={W} dof={mesh.n_dofs} lambda_{i} = {p.lam:.10f}")
    path = _out_dir(cfg) / "eigenvalues.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("W", "dof", "i", "lambda", "residual"))
        for W, dof, i, lam, res in rows:
            w.writerow((W, dof, i, fmt(lam), fmt(res)))
    print(f"wrote {path}")
    return EXIT_OK


def _reference(cfg: RunConfig, spec, k: int):
    ref = cfg.study.reference
    if ref == "oracle":
        return reference_for(spec, k, cfg.study.fd_grid)
    try:
        with open(ref, encoding="utf-8") as fh:
            lams = read_reference_csv(fh)
    except OSError as exc:
        raise ReferenceUnavailableError(f"cannot read reference file {ref}: {exc}") from exc
    return OracleResult("file", lams)


def cmd_study(cfg: RunConfig) -> int:
    spec = cfg.problem_spec()
    validate(spec)
    W_list = cfg.discretization.W_list or ([cfg.discretization.W] if cfg.discretization.W else [])
    if len(W_list) < 2:
        print("study needs at least two W values to fit a slope", file=sys.stderr)
        return EXIT_REFERENCE
    k = cfg.solver.k
    ref = _reference(cfg, spec, k)
    reference = ref.pairs if ref.pairs is not None else list(ref.eigenvalues)
    elements, breakpoints = _mesh_args(cfg)
    if breakpoints is not None:
        raise ConfigError("study supports 'elements' layouts only")
    report = convergence_study(
        spec, elements, sorted(W_list), reference, k,
        b_variant=cfg.solver.b_variant, symmetrize=cfg.solver.symmetrize, opts=_solve_options(cfg),
        normalization=cfg.study.normalization, fit_window=cfg.study.fit_window,
    )
    out = _out_dir(cfg)
    with open(out / "errors.csv", "w", newline="", encoding="utf-8") as fh:
        report.write_errors_csv(fh)
    with open(out / "slopes.csv", "w", newline="", encoding="utf-8") as fh:
        report.write_slopes_csv(fh)
    print(f"reference: {ref.method}")
    for i in sorted(report.slopes):
        slope, lo, hi = report.slopes[i]
        print(f"u_{i}: slope {slope:.4f} over W in [{lo:g}, {hi:g}]")
    print(f"wrote {out / 'errors.csv'} and {out / 'slopes.csv'}")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    spec = cfg.problem_spec()
    validate(spec)
    result = reference_for(spec, cfg.solver.k, cfg.study.fd_grid)
    path = _out_dir(cfg) / "oracle.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_oracle_csv(fh, result)
    for i, lam in enumerate(result.eigenvalues, start=1):
        print(f"lambda_{i} = {lam:.10f} ({result.method})")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "study": cmd_study, "oracle": cmd_oracle}

_CONFIG_ERRORS = (ConfigError, InvalidProblemError, DomainError, MeshError, InvalidOrderError, InvalidCoefficientError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReferenceUnavailableError, RefinementRequestError) as exc:
        print(f"reference unavailable: {exc}", file=sys.stderr)
        return EXIT_REFERENCE
    except (SolverError, SizeError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SturmSpectraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
