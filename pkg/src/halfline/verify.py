"""Manufactured solutions, quadrature oracles and empirical studies.

The oracles here integrate the kernels with adaptive quadrature
(``scipy.integrate.quad``) and never touch the closed-form weights, so
comparisons between the two are independent.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .problem import Constants, HalfLineProblem, KernelPair, RegularityData, require_valid
from .solver import DEFAULT_MAX_ITER, GridSolution, solve
from .weights import Grid

FLOOR_FACTOR = 100.0


class OracleError(RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""


@dataclass(frozen=True)
class QuadOptions:
    epsabs: float = 1e-13
    epsrel: float = 1e-12
    limit: int = 200
    tail_eps: float = 1e-12
    max_error: float = 1e-9


@dataclass(frozen=True)
class ManufacturedProblem:
    problem: HalfLineProblem
    exact: Callable[[float], np.ndarray]
    construction: str  # "closed_form" or "quadrature"


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    error: float
    order: Optional[float]


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]

    @property
    def orders(self) -> list[Optional[float]]:
        return [r.order for r in self.rows[1:]]


@dataclass(frozen=True)
class TruncationRow:
    N: int
    error: float


@dataclass(frozen=True)
class TruncationTable:
    rows: tuple[TruncationRow, ...]
    window: int = 0
    N_ref: int = 0

    def __post_init__(self):
        Ns = [r.N for r in self.rows]
        if any(b <= a for a, b in zip(Ns, Ns[1:])):
            raise ValueError(f"TruncationTable invariant violated: N strictly increasing (got {Ns})")


# --- quadrature oracles -----------------------------------------------------


def _component_quad(fun, a, b, dim, opts: QuadOptions):
    values = np.empty(dim)
    errors = np.empty(dim)
    for k in range(dim):
        val, err = integrate.quad(lambda s: fun(s)[k], a, b, epsabs=opts.epsabs,
                                  epsrel=opts.epsrel, limit=opts.limit)
        values[k], errors[k] = val, err
    if np.any(errors > opts.max_error):
        raise OracleError(f"quadrature on [{a}, {b}] did not converge: error estimate {errors.max():.3e}")
    return values, float(errors.max()) if dim else 0.0


def _kernel_at(kernel, t, s, x, dim):
    out = kernel(np.full((1, 1), t), np.full((1, 1), s), np.asarray(x, dtype=float).reshape(1, dim))
    return np.asarray(out, dtype=float).reshape(dim)


def volterra_integral(kernels: KernelPair, constants: Constants, exact, t: float, dim: int,
                      opts: QuadOptions = QuadOptions()):
    """int_0^t exp(a1 s - a2 t) f(t, s, exact(s)) ds by adaptive quadrature."""
    if t <= 0:
        return np.zeros(dim), 0.0
    a1, a2 = constants.alpha1, constants.alpha2

    def integrand(s):
        return math.exp(a1 * s - a2 * t) * _kernel_at(kernels.f, t, s, exact(s), dim)

    return _component_quad(integrand, 0.0, t, dim, opts)


def tail_cutoff(t: float, beta: float, tail_eps: float) -> float:
    """Upper limit T with exp(-beta (T - t)) <= tail_eps * beta."""
    return t + max(0.0, math.log(1.0 / (tail_eps * beta))) / beta


def tail_integral(kernels: KernelPair, constants: Constants, regularity: RegularityData, exact,
                  t: float, dim: int, opts: QuadOptions = QuadOptions()):
    """int_t^inf exp(-b s + c t) g(t, s, exact(s)) ds, cut at a finite limit.

    Returns (value, error) where the error includes the analytic bound on
    the discarded piece beyond the cutoff.
    """
    b, c = constants.beta, constants.gamma
    T = tail_cutoff(t, b, opts.tail_eps)

    def integrand(s):
        return math.exp(-b * s + c * t) * _kernel_at(kernels.g, t, s, exact(s), dim)

    # split into unit-ish pieces so the adaptive rule sees the decay
    edges = np.linspace(t, T, max(2, int(math.ceil((T - t) * b)) + 1))
    total = np.zeros(dim)
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = _component_quad(integrand, lo, hi, dim, opts)
        total += val
        err += e
    remainder = regularity.Cg * math.exp(-b * T + c * t) / b
    return total, err + remainder


def equation_residual(problem: HalfLineProblem, exact, t: float, opts: QuadOptions = QuadOptions()) -> float:
    """max-norm of exact(t) minus the right-hand side at t.

    Uses quad over [t, inf) directly, a different route from the cutoff
    integration used by :func:`manufacture`.
    """
    n = problem.dim
    vol, _ = volterra_integral(problem.kernels, problem.constants, exact, t, n, opts)
    b, c = problem.constants.beta, problem.constants.gamma
    tail = np.empty(n)
    for k in range(n):
        tail[k], _ = integrate.quad(
            lambda s: math.exp(-b * s + c * t) * _kernel_at(problem.kernels.g, t, s, exact(s), n)[k],
            t, np.inf, epsabs=opts.epsabs, epsrel=opts.epsrel, limit=opts.limit)
    rhs = problem.forcing(t) + vol + tail
    return float(np.max(np.abs(np.asarray(exact(t), dtype=float).reshape(n) - rhs)))


def manufacture(exact, kernels: KernelPair, constants: Constants, regularity: RegularityData,
                dim: int, x0_sup: float, quad_opts: QuadOptions = QuadOptions(),
                closed_form: Optional[Callable[[float], np.ndarray]] = None,
                name: str = "") -> ManufacturedProblem:
    """Back out the forcing x0 so that ``exact`` solves the equation.

    ``closed_form`` short-circuits the quadrature when the integrals are
    known analytically.  ``x0_sup`` must bound the resulting forcing.
    """

    def exact_vec(t):
        return np.asarray(exact(t), dtype=float).reshape(dim)

    if closed_form is not None:
        x0 = closed_form
        construction = "closed_form"
    else:
        @functools.lru_cache(maxsize=None)
        def _x0(t):
            vol, _ = volterra_integral(kernels, constants, exact_vec, t, dim, quad_opts)
            tail, _ = tail_integral(kernels, constants, regularity, exact_vec, t, dim, quad_opts)
            out = exact_vec(t) - vol - tail
            out.setflags(write=False)
            return out

        def x0(t):
            return _x0(float(t)).copy()

        construction = "quadrature"
    problem = HalfLineProblem(dim=dim, constants=constants, kernels=kernels,
                              regularity=regularity, x0=x0, x0_sup=float(x0_sup), name=name)
    require_valid(problem)
    return ManufacturedProblem(problem, exact_vec, construction)


# --- error measures and studies ----------------------------------------------


def _window_range(solution: GridSolution, window) -> range:
    N = solution.grid.N
    if window is None:
        return range(N + 1)
    if isinstance(window, range):
        r = window
    else:
        r = range(int(window) + 1)
    if r.start < 0 or (len(r) and r[-1] > N):
        raise ValueError(f"window {r} outside grid 0..{N}")
    return r


def error_sup(solution: GridSolution, exact, window=None) -> float:
    """max over the window of |exact(ih) - x_i| (max-norm); ``window`` is a last index or a range."""
    r = _window_range(solution, window)
    if len(r) == 0:
        return 0.0
    nodes = solution.grid.nodes
    x = solution.x.values
    n = solution.x.dim
    return float(max(np.max(np.abs(np.asarray(exact(nodes[i]), dtype=float).reshape(n) - x[i])) for i in r))


def empirical_orders(h_list: Sequence[float], errors: Sequence[float],
                     floor: float = 0.0) -> list[Optional[float]]:
    """Observed orders between consecutive refinements; None below ``floor``."""
    orders: list[Optional[float]] = [None]
    for r in range(1, len(errors)):
        e0, e1 = errors[r - 1], errors[r]
        if e0 < floor or e1 < floor or e0 <= 0 or e1 <= 0:
            orders.append(None)
        else:
            orders.append(math.log(e0 / e1) / math.log(h_list[r - 1] / h_list[r]))
    return orders


def check_halving(h_list: Sequence[float]) -> None:
    for a, b in zip(h_list, h_list[1:]):
        if not abs(b / a - 0.5) <= 1e-12:
            raise ValueError(f"h_list must be strictly halving, got {list(h_list)}")


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def nodes_for(length: float, h: float) -> int:
    return max(1, int(round(length / h)))


def convergence_study(mproblem: ManufacturedProblem, h_list: Sequence[float], tol: float = 1e-10,
                      horizon: float = 20.0, window: Optional[float] = None,
                      max_iter: int = DEFAULT_MAX_ITER, workers: int = 1
                      ) -> tuple[ConvergenceTable, list[GridSolution]]:
    """Discretisation error against the manufactured solution on a fixed time window.

    Each grid covers ``[0, horizon]`` (N = horizon / h) and errors are taken
    over ``[0, window]`` (default horizon / 2) so the truncation tail stays
    far below the discretisation error.
    """
    check_halving(h_list)
    window = horizon / 2 if window is None else window
    if window > horizon:
        raise ValueError("window must not exceed horizon")

    def run(h):
        sol = solve(mproblem.problem, Grid(h, nodes_for(horizon, h)), tol, max_iter)
        return sol, error_sup(sol, mproblem.exact, nodes_for(window, h))

    results = _map(run, list(h_list), workers)
    errors = [e for _, e in results]
    orders = empirical_orders(h_list, errors, floor=FLOOR_FACTOR * tol)
    rows = tuple(ConvergenceRow(h, e, o) for h, e, o in zip(h_list, errors, orders))
    return ConvergenceTable(rows), [s for s, _ in results]


def truncation_study(problem: HalfLineProblem, h: float, N_list: Sequence[int], window: int,
                     tol: float = 1e-12, N_ref: Optional[int] = None,
                     max_iter: int = DEFAULT_MAX_ITER, workers: int = 1) -> TruncationTable:
    """Error of truncated solutions against a much longer reference truncation."""
    N_list = [int(n) for n in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError(f"N_list must be strictly increasing, got {N_list}")
    if not N_list:
        return TruncationTable((), window, 0)
    if window > N_list[0]:
        raise ValueError(f"window {window} exceeds smallest N {N_list[0]}")
    N_ref = 4 * max(N_list) if N_ref is None else int(N_ref)
    sols = _map(lambda n: solve(problem, Grid(h, n), tol, max_iter), N_list + [N_ref], workers)
    ref = sols[-1].x.values
    rows = tuple(TruncationRow(n, float(np.max(np.abs(s.x.values[:window + 1] - ref[:window + 1]))))
                 for n, s in zip(N_list, sols[:-1]))
    return TruncationTable(rows, window, N_ref)


@dataclass(frozen=True)
class DecayReport:
    applicable: bool
    reason: str = ""
    holds: bool = False
    slack: Optional[np.ndarray] = None  # bound - |x_i|, per node
    tail_max: Optional[np.ndarray] = None  # max_{k >= i} |x_k|
    monotone: bool = False


def decay_bound(problem: HalfLineProblem, grid: Grid) -> np.ndarray:
    """|b_i| + Cf/|a1| |e^{(a1-a2)ih} - e^{-a2 ih}| + Cg/b e^{-(b-c) ih}."""
    c, r = problem.constants, problem.regularity
    t = grid.nodes
    b_abs = np.array([np.max(np.abs(problem.forcing(ti))) for ti in t])
    volterra = r.Cf / abs(c.alpha1) * np.abs(np.exp((c.alpha1 - c.alpha2) * t) - np.exp(-c.alpha2 * t))
    tail = r.Cg / c.beta * np.exp(-(c.beta - c.gamma) * t)
    return b_abs + volterra + tail


def decay_check(solution: GridSolution, problem: HalfLineProblem, b_decay_tol: float = 1e-6) -> DecayReport:
    """Check the node-wise decay bound for beta > gamma, alpha1 < alpha2, b_i -> 0."""
    c = problem.constants
    if not c.beta > c.gamma:
        return DecayReport(False, f"needs beta > gamma (beta={c.beta}, gamma={c.gamma})")
    if not c.alpha1 < c.alpha2:
        return DecayReport(False, f"needs alpha1 < alpha2 (alpha1={c.alpha1}, alpha2={c.alpha2})")
    grid = solution.grid
    b_abs = np.array([np.max(np.abs(problem.forcing(ti))) for ti in grid.nodes])
    if b_abs[-1] > b_decay_tol * max(1.0, b_abs.max()):
        return DecayReport(False, f"forcing does not decay on the grid (|b_N|={b_abs[-1]:.3e})")
    x_abs = np.max(np.abs(solution.x.values), axis=1)
    slack = decay_bound(problem, grid) + solution.error_bound - x_abs
    tail_max = np.maximum.accumulate(x_abs[::-1])[::-1]
    monotone = bool(np.all(np.diff(tail_max) <= 0))
    return DecayReport(True, "", bool(np.all(slack >= 0)), slack, tail_max, monotone)
