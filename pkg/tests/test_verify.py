import math

import mpmath
import numpy as np
import pytest

from halfline import catalog
from halfline.problem import Constants, HalfLineProblem, KernelPair, RegularityData
from halfline.solver import solve
from halfline.verify import (FLOOR_FACTOR, QuadOptions, TruncationRow, TruncationTable, check_halving,
                             convergence_study, decay_bound, decay_check, empirical_orders,
                             equation_residual, error_sup, manufacture, tail_cutoff, truncation_study)
from halfline.weights import Grid

SAMPLE_T = [0.0, 0.5, 1.0, 2.0, 5.0]


def zero(t, s, x):
    return np.zeros_like(x)


def test_manufacture_zero_kernels_returns_exact():
    mp = manufacture(lambda t: np.array([math.sin(t), 2.0]), KernelPair(zero, zero), Constants(1, 1, 1, 0),
                     RegularityData(0, 0, 0, 0), dim=2, x0_sup=2.0)
    assert mp.construction == "quadrature"
    for t in SAMPLE_T:
        np.testing.assert_allclose(mp.problem.forcing(t), [math.sin(t), 2.0], atol=1e-15)


def test_manufacture_p1_forcing_is_constant():
    p1 = catalog.p1()
    mp = manufacture(lambda t: np.ones(1), p1.kernels, p1.constants, p1.regularity, 1, 0.75)
    for t in SAMPLE_T + [12.0]:
        assert mp.problem.forcing(t)[0] == pytest.approx(0.75, abs=1e-11)


def test_manufacture_p1_prime_forcing():
    p = catalog.p1_prime()
    mp = manufacture(lambda t: np.ones(1), p.kernels, p.constants, p.regularity, 1, 0.75)
    for t in SAMPLE_T:
        assert mp.problem.forcing(t)[0] == pytest.approx(0.5 + 0.25 * math.exp(-t), abs=1e-11)


def _p2_forcing_mpmath(t):
    """x0 for P2 with arbitrary-precision quadrature, no shared code with the package."""
    mpmath.mp.dps = 30
    t = mpmath.mpf(t)
    vol = mpmath.quad(lambda s: mpmath.exp(s - t) * 0.3 * mpmath.sin(mpmath.exp(-s)) / (1 + s), [0, t])
    tail = mpmath.quad(lambda s: mpmath.exp(-s) * 0.3 * mpmath.cos(mpmath.exp(-s)) * mpmath.exp(-(s - t) / 2),
                       [t, t + 10, mpmath.inf])
    return float(mpmath.exp(-t) - vol - tail)


@pytest.mark.parametrize("t", SAMPLE_T)
def test_p2_forcing_matches_mpmath(t):
    p = catalog.p2_manufactured().problem
    assert p.forcing(t)[0] == pytest.approx(_p2_forcing_mpmath(t), abs=1e-11)


@pytest.mark.parametrize("pid", ["P1", "P1'", "P2"])
def test_manufactured_consistency(pid):
    mp = catalog.get(pid).manufactured()
    for t in SAMPLE_T:
        assert equation_residual(mp.problem, mp.exact, t) <= 1e-8


def test_equation_residual_detects_wrong_solution():
    mp = catalog.get("P1").manufactured()
    assert equation_residual(mp.problem, lambda t: np.full(1, 1.1), 1.0) > 1e-3


def test_tail_cutoff():
    T = tail_cutoff(2.0, 0.5, 1e-12)
    assert math.exp(-0.5 * (T - 2.0)) == pytest.approx(1e-12 * 0.5, rel=1e-9)


def test_error_sup_examples():
    sol = solve(catalog.p1(), Grid(0.1, 200), tol=1e-10)
    assert error_sup(sol, lambda t: np.ones(1), 100) <= 1e-8
    values = sol.x.values
    assert error_sup(sol, lambda t: values[int(round(t / 0.1))]) == 0.0
    with pytest.raises(ValueError):
        error_sup(sol, lambda t: np.ones(1), 500)


def test_error_sup_positive_for_p2():
    mp = catalog.p2_manufactured()
    sol = solve(mp.problem, Grid(0.1, 200), tol=1e-10)
    assert error_sup(sol, mp.exact, 100) > 1e-4


def test_empirical_orders_exact_halving():
    orders = empirical_orders([0.2, 0.1, 0.05], [0.02, 0.01, 0.005])
    assert orders[0] is None
    np.testing.assert_allclose(orders[1:], [1.0, 1.0], rtol=1e-14)
    assert empirical_orders([0.2, 0.1], [1e-9, 1e-10], floor=1e-8) == [None, None]


def test_check_halving():
    check_halving([0.4, 0.2, 0.1])
    with pytest.raises(ValueError):
        check_halving([0.4, 0.3])


def test_p1_convergence_orders_absent_below_floor():
    tol = 1e-10
    table, _ = convergence_study(catalog.get("P1").manufactured(), [0.2, 0.1], tol=tol)
    assert all(r.error < FLOOR_FACTOR * tol for r in table.rows)
    assert table.orders == [None]


def test_p2_convergence_rate():
    table, sols = convergence_study(catalog.get("P2").manufactured(), [0.2, 0.1, 0.05], tol=1e-10)
    assert len(table.rows) == 3 and table.rows[0].order is None
    for order in table.orders:
        assert 0.8 <= order <= 1.2
    assert all(s.report.converged for s in sols)


def test_convergence_study_parallel_matches_serial():
    mp = catalog.get("P1'").manufactured()
    a, _ = convergence_study(mp, [0.4, 0.2], tol=1e-9, horizon=10)
    b, _ = convergence_study(mp, [0.4, 0.2], tol=1e-9, horizon=10, workers=2)
    assert a == b


def test_truncation_p1_case_one():
    table = truncation_study(catalog.p1(), 0.1, [50, 100, 150], window=40)
    errors = [r.error for r in table.rows]
    assert table.N_ref == 600
    assert errors[1] <= 0.07 * errors[0]
    assert errors[0] > errors[1] > errors[2]


def test_truncation_p1_prime_case_two_monotone():
    table = truncation_study(catalog.p1_prime(), 0.1, [50, 100, 200], window=40)
    errors = [r.error for r in table.rows]
    assert errors[0] > errors[1] > errors[2]


def test_truncation_single_entry():
    table = truncation_study(catalog.p1(), 0.1, [30], window=10)
    assert len(table.rows) == 1 and table.N_ref == 120


def test_truncation_input_checks():
    with pytest.raises(ValueError):
        truncation_study(catalog.p1(), 0.1, [50, 40], window=10)
    with pytest.raises(ValueError):
        truncation_study(catalog.p1(), 0.1, [20, 40], window=30)
    with pytest.raises(ValueError):
        TruncationTable((TruncationRow(5, 0.1), TruncationRow(5, 0.2)))


def test_decay_p4():
    p = catalog.p4()
    sol = solve(p, Grid(0.1, 400), tol=1e-12)
    report = decay_check(sol, p)
    assert report.applicable and report.holds and report.monotone
    assert np.all(report.slack >= 0)


def test_decay_zero_kernels_trivial():
    p = HalfLineProblem(1, Constants(1, 2, 1, 0), KernelPair(zero, zero), RegularityData(0, 0, 0, 0),
                        lambda t: np.full(1, math.exp(-t)), 1.0)
    grid = Grid(0.1, 300)
    sol = solve(p, grid, tol=1e-12)
    np.testing.assert_allclose(sol.x.values[:, 0], np.exp(-grid.nodes), rtol=1e-15)
    np.testing.assert_allclose(decay_bound(p, grid), np.exp(-grid.nodes), rtol=1e-15)
    assert decay_check(sol, p).holds


def test_decay_inapplicable_cases():
    p = catalog.p1_prime()
    sol = solve(p, Grid(0.1, 50), tol=1e-8)
    report = decay_check(sol, p)
    assert not report.applicable and "beta > gamma" in report.reason
    p1 = catalog.p1()
    report = decay_check(solve(p1, Grid(0.1, 50), tol=1e-8), p1)
    assert not report.applicable and "alpha1 < alpha2" in report.reason


def test_quad_options_are_values():
    assert QuadOptions() == QuadOptions()
    assert QuadOptions().tail_eps == 1e-12
