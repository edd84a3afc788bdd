"""Picard iteration with an a-posteriori contraction certificate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problem import Constants, HalfLineProblem, RegularityData, contraction_q, require_valid
from .system import NodeSequence, TruncatedSystem, apply_operator, assemble, to_physical
from .weights import DeltaParams, Grid, tail_remainder, tail_weights_row, volterra_weights_row

DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a Picard solve.

    ``certified_bound`` bounds the sup-norm error of the returned iterate in
    the system's own unknowns (y in case II) using ``contraction_used``.
    ``x_certified_bound`` is the same certificate for the original unknowns,
    obtained from the q-contraction of the truncated x-system; the two agree
    in case I.
    """

    iterations: int
    final_step: float
    certified_bound: float
    converged: bool
    contraction_used: float
    x_certified_bound: float
    steps: tuple[float, ...] = ()


@dataclass(frozen=True)
class GridSolution:
    x: NodeSequence
    grid: Grid
    case_tag: str
    delta: Optional[DeltaParams]
    report: SolveReport

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def error_bound(self) -> float:
        return self.report.x_certified_bound


def _certificate(step: float, c: float) -> float:
    return step * c / (1.0 - c)


def picard_solve(system: TruncatedSystem, tol: float = 1e-8,
                 max_iter: int = DEFAULT_MAX_ITER) -> tuple[NodeSequence, SolveReport]:
    """Successive approximations from the forcing values b.

    Stops once ``step * c / (1 - c) <= tol``, c the system's contraction
    constant.  In case II the certificate for the untransformed iterate must
    also meet ``tol``.  Hitting ``max_iter`` yields ``converged=False``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    c = system.contraction
    if not c < 1:
        raise ValueError(f"system is not a contraction (constant {c!r})")
    q = system.q
    scale = system.scale[:, None]
    current = system.b.values
    steps = []
    cert = x_cert = np.inf
    k = 0
    while k < max_iter:
        nxt = apply_operator(system, current).values
        k += 1
        diff = nxt - current
        step = float(np.max(np.abs(diff)))
        steps.append(step)
        cert = _certificate(step, c)
        x_cert = cert if system.delta is None else _certificate(float(np.max(np.abs(diff * scale))), q)
        current = nxt
        if cert <= tol and x_cert <= tol:
            break
    converged = cert <= tol and x_cert <= tol
    report = SolveReport(iterations=k, final_step=steps[-1] if steps else 0.0,
                         certified_bound=cert, converged=converged, contraction_used=c,
                         x_certified_bound=x_cert, steps=tuple(steps))
    return NodeSequence(current), report


def solve(problem: HalfLineProblem, grid: Grid, tol: float = 1e-8,
          max_iter: int = DEFAULT_MAX_ITER, delta0: Optional[float] = None) -> GridSolution:
    require_valid(problem)
    system = assemble(problem, grid, delta0=delta0)
    y, report = picard_solve(system, tol, max_iter)
    return GridSolution(to_physical(system, y), grid, system.case_tag, system.delta, report)


def gronwall_matrix(grid: Grid, constants: Constants, regularity: RegularityData) -> np.ndarray:
    """Coefficients of the linear comparison system; the Volterra part starts at j = 1."""
    N, h = grid.N, grid.h
    M = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        if i > 1:
            M[i, 1:i] = regularity.Lf * volterra_weights_row(i, h, constants)[1:]
        M[i, i:] = regularity.Lg * tail_weights_row(i, N, h, constants)
    return M


def gronwall_zeta(grid: Grid, constants: Constants, regularity: RegularityData,
                  tol: float = 1e-13, max_iter: int = DEFAULT_MAX_ITER) -> NodeSequence:
    """Bounded solution of zeta = 1 + M zeta on the truncated index range."""
    q = contraction_q(regularity, constants)
    if not q < 1:
        raise ValueError(f"comparison system needs q < 1, got q={q!r}")
    M = gronwall_matrix(grid, constants, regularity)
    zeta = np.ones(grid.N + 1)
    for _ in range(max_iter):
        nxt = 1.0 + M @ zeta
        step = float(np.max(np.abs(nxt - zeta)))
        zeta = nxt
        if step * q / (1 - q) <= tol:
            break
    return NodeSequence(zeta)


def gronwall_tail_bound(grid: Grid, constants: Constants, regularity: RegularityData) -> np.ndarray:
    """Per-node bound on the tail of the comparison system dropped by truncation."""
    q = contraction_q(regularity, constants)
    return np.array([regularity.Lg * tail_remainder(i, grid.N, grid.h, constants) / (1 - q)
                     for i in range(grid.N + 1)])
