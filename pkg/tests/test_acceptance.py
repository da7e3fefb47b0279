"""Acceptance criteria, one PASS/FAIL line each at the stated tolerance.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines inline; they
are also collected in the "acceptance criteria" terminal summary.
"""

import io

import numpy as np
import pytest

from conftest import EXACT_P1, interface_problem, shifted_laplace
from sturm_spectra import SolveOptions, assemble, build_mesh, dispersion_eigenvalues, solve_gevp
from sturm_spectra.assembly import jump_rows
from sturm_spectra.oracle import fd_eigenvalues, observed_order, reference_for, write_oracle_csv
from sturm_spectra.postprocess import conforming_correction, convergence_study
from sturm_spectra.problem import ProblemSpec
from sturm_spectra.reference_element import gll_rule

W_LIST = [4, 6, 8, 10, 12]
PUBLISHED_SLOPES = [-0.7024, -0.8643, -0.9086, -0.9195, -0.9361, -0.8721]
PUBLISHED_P2_W12 = [88.4675122041, 353.8098303336]
SATURATION_FLOOR = 1e-11


def lambdas(spec, n_elements, W, k=6):
    system = assemble(spec, build_mesh(spec, n_elements, W))
    return np.array([p.lam for p in solve_gevp(system, SolveOptions(k=k))])


def rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


@pytest.fixture(scope="module")
def p1_study():
    spec = interface_problem(1.0, 4.0)
    return convergence_study(spec, 6, W_LIST, dispersion_eigenvalues(spec, 6), 6)


def test_ac1_interface_eigenvalues(problem1, criterion):
    lam12 = lambdas(problem1, 6, 12)
    lam4 = lambdas(problem1, 6, 4)
    err12 = rel(lam12, EXACT_P1).max() if len(lam12) == 6 else np.inf
    err4 = rel(lam4[0], 22.2066273051) if len(lam4) else np.inf
    ok = err12 <= 1e-7 and err4 <= 1e-6
    assert criterion("AC1 interface eigenvalues", ok, f"W=12 max rel err {err12:.2e} (tol 1e-7); W=4 lambda_1 rel err {err4:.2e} (tol 1e-6)")


def test_ac2_oracle_exactness(problem1, criterion):
    disp = np.array([p.lam for p in dispersion_eigenvalues(problem1, 6)])
    err_disp = rel(disp, EXACT_P1).max()
    fd = fd_eigenvalues(problem1, 3000, 4)
    err_fd = rel(fd, disp[:4]).max()
    # n must be a multiple of 3 to place zeta = 1/3 on the grid
    grids = [fd_eigenvalues(problem1, n, 4) for n in (750, 1500, 3000)]
    orders = [observed_order([g[i] for g in grids], disp[i]) for i in range(4)]
    ok = err_disp <= 1e-10 and err_fd <= 1e-5 and all(1.8 <= o <= 2.2 for o in orders)
    detail = (f"dispersion max rel err {err_disp:.2e} (tol 1e-10); FD n=3000 max rel err {err_fd:.2e} (tol 1e-5); "
              f"FD orders on n=750/1500/3000 {', '.join(f'{o:.3f}' for o in orders)} (range [1.8, 2.2])")
    assert criterion("AC2 oracle exactness", ok, detail)


def test_ac3_high_contrast(problem2, criterion):
    lam = lambdas(problem2, 6, 12)
    disp = np.array([p.lam for p in dispersion_eigenvalues(problem2, 6)])
    if len(lam) < 6:
        assert criterion("AC3 high-contrast eigenvalues", False, f"only {len(lam)} eigenpairs returned")
    tab = rel(lam[:2], PUBLISHED_P2_W12).max()
    lo = rel(lam[:2], disp[:2]).max()
    hi = rel(lam[2:], disp[2:]).max()
    ok = tab <= 1e-6 and lo <= 1e-6 and hi <= 1e-4
    detail = (f"lambda_1,2 vs published {tab:.2e} and vs oracle {lo:.2e} (tol 1e-6); "
              f"lambda_3..6 vs oracle {hi:.2e} (tol 1e-4)")
    assert criterion("AC3 high-contrast eigenvalues", ok, detail)


def test_ac4_monotone_decay(p1_study, criterion):
    logs = p1_study.log10_h1()
    bad = []
    for i, row in enumerate(logs, start=1):
        for j in range(len(row) - 1):
            if 10 ** row[j] <= SATURATION_FLOOR:
                break  # saturated; roundoff sets the rest
            if not row[j + 1] <= row[j]:
                bad.append(f"u{i} at W={W_LIST[j + 1]}")
    detail = "non-increasing pre-saturation for u1..u6" if not bad else "increase at " + ", ".join(bad)
    assert criterion("AC4a monotone H1 decay", not bad, detail)


@pytest.mark.parametrize("i", range(1, 7))
def test_ac4_slopes(p1_study, criterion, i):
    slope = p1_study.slopes[i][0]
    target = PUBLISHED_SLOPES[i - 1]
    ok = bool(abs(slope - target) <= 0.25)
    detail = f"fitted slope {slope:.4f} vs {target:.4f} (|diff| {abs(slope - target):.3f}, tol 0.25)"
    assert criterion(f"AC4b slope u{i}", ok, detail)


def test_ac4_first_point(p1_study, criterion):
    value = p1_study.log10_h1()[0, 0]
    ok = bool(-4.8 <= value <= -3.8)
    assert criterion("AC4c W=4 u1 point", ok, f"log10 H1 error {value:.4f} (range [-4.8, -3.8]; published -4.2966)")


@pytest.mark.parametrize("bc,expected", [
    ("dirichlet", [n * n * np.pi**2 + 1 for n in range(1, 5)]),
    ("neumann", [n * n * np.pi**2 + 1 for n in range(0, 4)]),
])
def test_ac5_dirichlet_neumann(criterion, bc, expected):
    lam = lambdas(shifted_laplace(bc), 2, 12, k=4)
    err = rel(lam, expected).max() if len(lam) == 4 else np.inf
    assert criterion(f"AC5 {bc}", bool(err <= 1e-8), f"first 4 modes max rel err {err:.2e} (tol 1e-8)")


def test_ac5_periodic(criterion):
    lam = lambdas(shifted_laplace("periodic"), 2, 12, k=5)
    expected = [1.0] + [4 * n * n * np.pi**2 + 1 for n in (1, 1, 2, 2)]
    err = rel(lam, expected).max() if len(lam) == 5 else np.inf
    split = max(abs(lam[1] - lam[2]), abs(lam[3] - lam[4])) if len(lam) == 5 else np.inf
    ok = bool(err <= 1e-8 and split <= 1e-8)
    detail = f"n=0..2 max rel err {err:.2e} (tol 1e-8); pair splitting {split:.2e} (tol 1e-8)"
    assert criterion("AC5 periodic", ok, detail)


def _global_samples(mesh, f):
    xi = gll_rule(mesh.W).nodes
    return np.concatenate([f(e.x_left + e.h * (1 + xi) / 2) for e in mesh.elements])


def test_ac6_properties(problem1, rng, criterion):
    results = {}

    systems = {W: assemble(problem1, build_mesh(problem1, 6, W)) for W in (6, 8, 10)}
    results["A symmetric"] = all(np.array_equal(s.A, s.A.T) for s in systems.values())

    ratios_ok = True
    for s in systems.values():
        r = []
        for _ in range(200):
            x = rng.standard_normal(s.n)
            r.append((x @ s.A @ x) / (x @ s.P @ x))
        r = np.array(r)
        ratios_ok &= bool(r.min() > 0 and np.isfinite(r.max()) and r.max() / r.min() < 1e8)
    results["norm equivalence"] = ratios_ok

    worst = 0.0
    for W in (4, 8, 12):
        mesh = build_mesh(problem1, 6, W)
        for deg in (0, 1, 3, W):
            x = _global_samples(mesh, lambda t: (t - 0.2) ** deg)
            worst = max(worst, max(abs(row.evaluate(x)) for row in jump_rows(mesh)))
    results[f"jump annihilation {worst:.1e}"] = worst <= 1e-12

    mesh = build_mesh(problem1, 6, 8)
    base = np.array([p.lam for p in solve_gevp(assemble(problem1, mesh))])
    scale_err = 0.0
    for c in (0.25, 3.0, 17.0):
        scaled = ProblemSpec(problem1.interval, problem1.coefficients.scaled_r(c), problem1.bc, problem1.interface)
        lam = np.array([p.lam for p in solve_gevp(assemble(scaled, mesh))])
        scale_err = max(scale_err, rel(lam * c, base).max())
    results[f"r-scaling {scale_err:.1e}"] = scale_err <= 1e-10

    jump = 0.0
    for p in solve_gevp(assemble(problem1, mesh)):
        u = conforming_correction(p, mesh, problem1.bc, problem1.interface)
        jump = max(jump, np.abs(u.value_jumps()).max())
    results[f"correction jumps {jump:.1e}"] = jump <= 1e-13

    outputs = []
    for _ in range(2):
        rep = convergence_study(problem1, 6, [4, 6, 8], dispersion_eigenvalues(problem1, 6), 6)
        buf = io.StringIO()
        rep.write_errors_csv(buf)
        rep.write_slopes_csv(buf)
        write_oracle_csv(buf, reference_for(problem1, 6))
        outputs.append(buf.getvalue().encode())
    results["CSV byte-determinism"] = outputs[0] == outputs[1]

    ok = all(results.values())
    detail = "; ".join(f"{name} {'ok' if v else 'FAILED'}" for name, v in results.items())
    assert criterion("AC6 properties", ok, detail)
