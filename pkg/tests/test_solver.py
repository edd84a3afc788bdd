import math

import numpy as np
import pytest

from halfline import catalog
from halfline.problem import Constants, HalfLineProblem, InvalidProblemError, KernelPair, RegularityData, safe_radius
from halfline.solver import gronwall_matrix, gronwall_tail_bound, gronwall_zeta, picard_solve, solve
from halfline.system import apply_operator, assemble
from halfline.weights import Grid

from oracles import dense_linear_solution

SMALL_N = {"P1": 60, "P1'": 60, "P2": 30, "P3": 40, "P4": 60}


def test_p1_iterates_follow_scalar_recursion():
    grid = Grid(0.1, 300)
    system = assemble(catalog.p1(), grid)
    x = system.b.values
    for k in range(1, 8):
        x = apply_operator(system, x).values
        # x^(k) = 0.75 + 0.25 x^(k-1) for constant sequences, up to the dropped tail
        np.testing.assert_allclose(x, 1 - 0.25 ** (k + 1), rtol=0, atol=0.25 * math.exp(-grid.N * grid.h) + 1e-13)
    _, report = picard_solve(system, tol=1e-12)
    ratios = np.array(report.steps[1:]) / np.array(report.steps[:-1])
    np.testing.assert_allclose(ratios[:8], 0.25, rtol=1e-6)


def test_zero_kernels_converge_in_one_iteration():
    zero = lambda t, s, x: np.zeros_like(x)
    p = HalfLineProblem(1, Constants(1, 1, 1, 0), KernelPair(zero, zero), RegularityData(0, 0, 0, 0),
                        lambda t: np.full(1, math.exp(-t)), 1.0)
    sol = solve(p, Grid(0.1, 20), tol=1e-12)
    assert sol.report.iterations == 1
    assert sol.report.converged
    np.testing.assert_array_equal(sol.x.values[:, 0], np.exp(-sol.nodes))


def test_iteration_count_bound_p1():
    system = assemble(catalog.p1(), Grid(0.1, 200))
    tol, c = 1e-8, 0.5
    _, report = picard_solve(system, tol=tol)
    first = report.steps[0]
    bound = math.ceil(math.log(tol * (1 - c) / first) / math.log(c)) + 1
    assert report.converged
    assert report.iterations <= bound


def test_p1_solution_exact_on_early_nodes():
    sol = solve(catalog.p1(), Grid(0.1, 200), tol=1e-10)
    assert sol.case_tag == "I" and sol.delta is None
    np.testing.assert_allclose(sol.x.values[:101, 0], 1.0, rtol=0, atol=1e-9)


@pytest.mark.parametrize("pid, tol", [("P1", 1e-4), ("P1", 1e-7), ("P1'", 1e-4), ("P1'", 1e-7)])
def test_certified_bound_covers_true_error(pid, tol):
    p = catalog.get(pid).problem()
    grid = Grid(0.1, 60)
    ref = dense_linear_solution(p.constants, [[0.25]], [[0.25]],
                                np.array([p.forcing(t) for t in grid.nodes]), grid.h)
    sol = solve(p, grid, tol=tol)
    err = np.max(np.abs(sol.x.values - ref))
    assert sol.report.converged
    assert sol.report.certified_bound <= tol
    assert err <= sol.error_bound + 1e-14
    assert sol.error_bound <= tol


def test_case_two_solution_in_original_variables():
    p = catalog.p1_prime()
    grid = Grid(0.1, 80)
    sol = solve(p, grid, tol=1e-12)
    assert sol.case_tag == "II"
    assert sol.delta is not None and 0 < sol.delta.delta and sol.delta.theta < 1
    ref = dense_linear_solution(p.constants, [[0.25]], [[0.25]],
                                np.array([p.forcing(t) for t in grid.nodes]), grid.h)
    np.testing.assert_allclose(sol.x.values, ref, rtol=0, atol=1e-11)
    # early nodes sit close to the exact solution x = 1 of the untruncated problem
    np.testing.assert_allclose(sol.x.values[:10, 0], 1.0, atol=0.05)


@pytest.mark.parametrize("pid", list(SMALL_N))
def test_step_ratios_bounded_by_contraction(pid):
    system = assemble(catalog.get(pid).problem(), Grid(0.1, SMALL_N[pid]))
    _, report = picard_solve(system, tol=1e-12)
    steps = np.array(report.steps)
    nonzero = steps[:-1] > 1e-14
    ratios = steps[1:][nonzero] / steps[:-1][nonzero]
    assert np.all(ratios <= system.contraction + 1e-6)


@pytest.mark.parametrize("pid", list(SMALL_N))
def test_solution_within_invariant_set(pid):
    p = catalog.get(pid).problem()
    sol = solve(p, Grid(0.1, SMALL_N[pid]), tol=1e-10)
    assert sol.report.converged
    assert sol.x.sup_norm <= safe_radius(p) + sol.report.certified_bound


def test_solve_is_deterministic():
    p = catalog.p3()
    a = solve(p, Grid(0.1, 40), tol=1e-11)
    b = solve(p, Grid(0.1, 40), tol=1e-11)
    assert a.x.values.tobytes() == b.x.values.tobytes()
    assert a.report == b.report


def test_unconverged_is_reported_not_raised():
    sol = solve(catalog.p1(), Grid(0.1, 50), tol=1e-14, max_iter=3)
    assert not sol.report.converged
    assert sol.report.iterations == 3
    assert sol.report.certified_bound > 1e-14


def test_invalid_problem_rejected_before_solving():
    calls = []

    def f(t, s, x):
        calls.append(1)
        return 0.6 * x

    p = HalfLineProblem(1, Constants(1, 1, 1, 0), KernelPair(f, f), RegularityData(0.6, 0.6, 1, 1),
                        lambda t: np.ones(1), 1.0)
    with pytest.raises(InvalidProblemError, match="A1"):
        solve(p, Grid(0.1, 10))
    assert not calls


def test_bad_tolerance_rejected():
    system = assemble(catalog.p1(), Grid(0.1, 10))
    with pytest.raises(ValueError):
        picard_solve(system, tol=0.0)


# --- comparison sequence ----------------------------------------------------


def test_zeta_without_coupling_is_one():
    zeta = gronwall_zeta(Grid(0.1, 50), Constants(1, 1, 1, 0), RegularityData(0, 0, 0, 0))
    np.testing.assert_array_equal(zeta.values, 1.0)


def test_zeta_closed_form_constant():
    # the boundary layer decays like exp(-(beta - Lg)(N - i)h), so stay 40 time units away
    grid = Grid(0.1, 800)
    zeta = gronwall_zeta(grid, Constants(1, 1, 1, 1), RegularityData(0.0, 0.5, 0, 0)).values[:, 0]
    np.testing.assert_allclose(zeta[:401], 2.0, rtol=0, atol=1e-8)
    assert abs(zeta[600] - 2.0) > 1e-6
    # last row is a single scalar equation zeta_N = 1 + 0.5 v_NN zeta_N
    assert zeta[-1] == pytest.approx(1 / (1 + 0.5 * math.expm1(-0.1)), rel=1e-12)


def test_zeta_matrix_skips_first_volterra_column():
    grid = Grid(0.2, 10)
    M = gronwall_matrix(grid, Constants(1, 1, 1, 0), RegularityData(0.3, 0.2, 0, 0))
    assert np.all(M[:, 0][1:] == 0)
    assert M[0, 0] > 0  # the tail starts at k = i
    assert M[5, 1] > 0 and M[5, 4] > 0 and M[5, 5] > 0
    # row sums stay below q
    assert np.max(M.sum(axis=1)) < 0.3 + 0.2


@pytest.mark.parametrize("pid", list(SMALL_N))
def test_zeta_bounds_on_catalog(pid):
    p = catalog.get(pid).problem()
    q = p.regularity.Lf / abs(p.constants.alpha1) + p.regularity.Lg / p.constants.beta
    zeta = gronwall_zeta(Grid(0.1, 200), p.constants, p.regularity).values
    assert np.all(zeta >= 1)
    assert np.all(zeta <= 1 / (1 - q) + 1e-8)


def test_zeta_tail_bound_matches_truncation_effect():
    c, reg = Constants(1, 1, 1, 0), RegularityData(0.25, 0.25, 0, 0)
    short = gronwall_zeta(Grid(0.1, 60), c, reg).values[:, 0]
    long = gronwall_zeta(Grid(0.1, 400), c, reg).values[:61, 0]
    bound = gronwall_tail_bound(Grid(0.1, 60), c, reg)
    assert np.all(long - short <= bound * np.max(long) + 1e-12)
    assert np.all(long >= short - 1e-12)
