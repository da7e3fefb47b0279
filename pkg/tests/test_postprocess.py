import io
import math

import numpy as np
import pytest

from conftest import shifted_laplace
from sturm_spectra import SolveOptions, assemble, build_mesh, dispersion_eigenvalues, solve_gevp
from sturm_spectra.errors import NormalizationError
from sturm_spectra.oracle import ReferenceEigenpair
from sturm_spectra.postprocess import (
    ConformingFunction,
    ElementFunction,
    conforming_correction,
    convergence_study,
    fit_slope,
    h1_error,
    match_pairs,
    normalize,
)
from sturm_spectra.reference_element import gll_rule


def nodal(mesh, f):
    xi = gll_rule(mesh.W).nodes
    return np.concatenate([f(e.x_left + e.h * (1 + xi) / 2) for e in mesh.elements])


@pytest.fixture
def p1_w8(problem1):
    mesh = build_mesh(problem1, 6, 8)
    pairs = solve_gevp(assemble(problem1, mesh))
    refs = dispersion_eigenvalues(problem1, 6)
    return problem1, mesh, pairs, refs


def test_correction_of_conforming_input_is_identity(problem1):
    mesh = build_mesh(problem1, 6, 6)
    x = nodal(mesh, lambda t: np.sin(np.pi * t))
    x[0] = 0.0  # sin(0) is exact already; keep the Dirichlet end explicit
    x[-1] = 0.0
    u = conforming_correction(x, mesh, problem1.bc)
    np.testing.assert_allclose(u.dofs, x, atol=1e-15)


def test_correction_midpoint_average():
    spec = shifted_laplace("neumann")
    mesh = build_mesh(spec, 2, 3)
    x = np.array([0.0, 0.5, 0.8, 1.0, 3.0, 2.5, 2.0, 1.0])
    u = conforming_correction(x, mesh, "neumann")
    assert u.values[0, -1] == 2.0 and u.values[1, 0] == 2.0
    assert u.value_jumps()[0] == 0.0
    # Neumann ends keep their traces
    assert u.values[0, 0] == 0.0 and u.values[1, -1] == 1.0


def test_correction_dirichlet_and_periodic_ends():
    spec = shifted_laplace("periodic")
    mesh = build_mesh(spec, 3, 4)
    x = np.random.default_rng(1).standard_normal(mesh.n_dofs)
    u = conforming_correction(x, mesh, "periodic")
    assert u.values[0, 0] == u.values[-1, -1] == 0.5 * (x[0] + x[-1])
    v = conforming_correction(x, mesh, "dirichlet")
    assert v.values[0, 0] == 0.0 and v.values[-1, -1] == 0.0
    np.testing.assert_array_equal(v.value_jumps(), 0.0)


def test_problem1_correction(p1_w8):
    spec, mesh, pairs, refs = p1_w8
    for pair, ref in zip(pairs, refs):
        raw = normalize(ElementFunction(mesh, pair.dofs), spec.coefficients)
        u = normalize(conforming_correction(pair, mesh, spec.bc, spec.interface), spec.coefficients)
        assert isinstance(u, ConformingFunction)
        assert np.max(np.abs(u.value_jumps())) <= 1e-14
        e_raw, e_cor = h1_error(raw, ref), h1_error(u, ref)
        assert 0.5 * e_raw <= e_cor <= 2.0 * e_raw


def test_normalize_b_norm(problem1):
    mesh = build_mesh(problem1, 6, 5)
    coeffs = problem1.coefficients
    x = nodal(mesh, lambda t: 2.0 * np.ones_like(t))  # int 1 * 4 dx = 4
    u = normalize(ElementFunction(mesh, x), coeffs)
    np.testing.assert_allclose(u.dofs, x / 2, rtol=1e-14)
    np.testing.assert_array_equal(normalize(ElementFunction(mesh, -x), coeffs).dofs, u.dofs)
    np.testing.assert_allclose(normalize(u, coeffs).dofs, u.dofs, rtol=1e-15)


def test_normalize_euclidean_and_zero(problem1):
    mesh = build_mesh(problem1, 6, 4)
    x = np.arange(mesh.n_dofs, dtype=float) - 3
    u = normalize(x, method="euclidean")
    assert abs(np.linalg.norm(u) - 1) < 1e-15
    assert u[u != 0][0] > 0
    with pytest.raises(NormalizationError):
        normalize(np.zeros(mesh.n_dofs), method="euclidean")
    with pytest.raises(NormalizationError):
        normalize(ElementFunction(mesh, np.zeros(mesh.n_dofs)), problem1.coefficients)


def test_h1_error_of_interpolant():
    spec = shifted_laplace("dirichlet")
    mesh = build_mesh(spec, 2, 12)
    ref = dispersion_eigenvalues(spec, 1)[0]
    u = ElementFunction(mesh, nodal(mesh, ref))
    assert h1_error(u, ref) <= 1e-10
    assert h1_error(u.scaled(-1.0), ref) <= 1e-10
    assert h1_error(u.scaled(-1.0), ref, align=False) > 1.0


def test_h1_error_exact_polynomial_is_zero():
    spec = shifted_laplace("dirichlet")
    mesh = build_mesh(spec, 3, 5)
    f = lambda t: t**3 - 2 * t
    ref = ReferenceEigenpair(0.0, f, lambda t: 3 * t**2 - 2)
    u = ElementFunction(mesh, nodal(mesh, f))
    assert h1_error(u, ref) < 1e-14


def test_h1_error_relative():
    spec = shifted_laplace("dirichlet")
    mesh = build_mesh(spec, 2, 6)
    ref = dispersion_eigenvalues(spec, 1)[0]
    u = ElementFunction(mesh, np.zeros(mesh.n_dofs))
    assert h1_error(u, ref, relative=True) == pytest.approx(1.0, rel=1e-12)


def test_element_function_evaluation(problem1):
    mesh = build_mesh(problem1, 6, 7)
    f = lambda t: np.cos(3 * t)
    u = ElementFunction(mesh, nodal(mesh, f))
    xs = np.linspace(0, 1, 41)
    np.testing.assert_allclose(u(xs), f(xs), atol=1e-6)
    np.testing.assert_allclose(u.derivative(xs), -3 * np.sin(3 * xs), atol=1e-4)


def test_match_pairs_greedy():
    assert match_pairs([1.0, 2.1, 2.9], [1.0, 2.0, 3.0]) == [0, 1, 2]
    assert match_pairs([2.05], [2.0, 2.1]) == [0, None]
    # greedy ascending order: a dropped low mode shifts the pairing up by one
    assert match_pairs([4.1, 9.0], [1.0, 4.0, 9.0]) == [0, 1, None]
    assert match_pairs([4.1, 9.0], [4.0, 9.0, 16.0]) == [0, 1, None]


def test_match_stable_under_perturbation(p1_w8):
    _, _, pairs, refs = p1_w8
    lam = [p.lam for p in pairs]
    ref = np.array([r.lam for r in refs])
    base = match_pairs(lam, ref)
    for sign in (1, -1):
        assert match_pairs(lam, ref * (1 + sign * 1e-9)) == base


def test_fit_slope_windows():
    W = [4, 6, 8, 10, 12]
    e = [1e-4, 1e-6, 1e-8, 1e-10, 1e-12]
    slope, lo, hi = fit_slope(W, e)
    assert slope == pytest.approx(-1.0) and (lo, hi) == (4, 12)
    sat = [1e-4, 1e-6, 1e-8, 1e-10, 1.2e-10]
    slope, lo, hi = fit_slope(W, sat, "pre_saturation")
    assert slope == pytest.approx(-1.0) and (lo, hi) == (4, 8)
    assert all(math.isnan(v) for v in fit_slope(W, [0.0] * 5))
    with pytest.raises(ValueError):
        fit_slope(W, e, "last_two")


def test_self_reference_study(problem1):
    mesh = build_mesh(problem1, 6, 6)
    pairs = solve_gevp(assemble(problem1, mesh), SolveOptions(k=3))
    refs = []
    for p in pairs:
        u = conforming_correction(p, mesh, problem1.bc)
        refs.append(ReferenceEigenpair(p.lam, u, u.derivative))
    report = convergence_study(problem1, 6, [6], refs, 3)
    assert np.all(report.table("lambda_abs_err") == 0)
    assert np.all(report.table("h1_err") < 1e-13)
    assert all(math.isnan(s[0]) for s in report.slopes.values())


def test_study_with_eigenvalue_only_reference(problem1):
    lams = [p.lam for p in dispersion_eigenvalues(problem1, 4)]
    report = convergence_study(problem1, 6, [4, 6], lams, 4)
    assert np.all(np.isnan(report.table("h1_err")))
    assert np.all(report.table("lambda_abs_err")[:, 1] < 1e-3)


def test_study_reports_missing_entries():
    spec = shifted_laplace("dirichlet")
    refs = dispersion_eigenvalues(spec, 6)
    report = convergence_study(spec, 1, [3, 4], refs, 6)
    assert report.missing()
    buf = io.StringIO()
    report.write_errors_csv(buf)
    assert "nan" in buf.getvalue()


def test_report_csv_columns(problem1):
    refs = dispersion_eigenvalues(problem1, 2)
    report = convergence_study(problem1, 6, [4, 6], refs, 2)
    errors, slopes = io.StringIO(), io.StringIO()
    report.write_errors_csv(errors)
    report.write_slopes_csv(slopes)
    assert errors.getvalue().splitlines()[0] == "W,dof,i,lambda_num,lambda_ref,lambda_abs_err,h1_err"
    assert slopes.getvalue().splitlines()[0] == "i,slope,window_lo,window_hi"
    assert errors.getvalue().splitlines()[1].startswith("4,30,1,22.2066273")


def test_study_rejects_bad_w_list(problem1):
    refs = dispersion_eigenvalues(problem1, 2)
    with pytest.raises(ValueError):
        convergence_study(problem1, 6, [6, 4], refs, 2)
    with pytest.raises(ValueError):
        convergence_study(problem1, 6, [2, 4], refs, 2)
