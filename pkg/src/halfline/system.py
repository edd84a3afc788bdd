"""Assembly and application of the truncated discrete fixed-point system.

Case I (beta > gamma) keeps the original unknowns x_0..x_N.  Case II
(beta == gamma) works with y_i = exp(-i*delta*h) x_i, for which the row
sums of the operator are bounded by theta < 1 uniformly in the truncation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problem import HalfLineProblem, contraction_q, require_valid
from .weights import (DeltaParams, Grid, select_delta, tail_remainder,
                      tail_weights_row, volterra_weights_row)

CASE_TOL = 1e-12


@dataclass(frozen=True)
class NodeSequence:
    values: np.ndarray  # shape (N+1, n)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError(f"node values must have shape (N+1, n), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("node values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True)
class TruncatedSystem:
    case_tag: str  # "I" or "II"
    grid: Grid
    problem: HalfLineProblem
    delta: Optional[DeltaParams]
    b: NodeSequence
    contraction: float

    @property
    def q(self) -> float:
        return contraction_q(self.problem.regularity, self.problem.constants)

    @property
    def scale(self) -> np.ndarray:
        """Factors exp(i*delta*h) mapping system unknowns to x (ones in case I)."""
        if self.delta is None:
            return np.ones(self.grid.N + 1)
        return np.exp(self.delta.delta * self.grid.nodes)


def case_of(problem: HalfLineProblem) -> str:
    c = problem.constants
    return "II" if c.beta - c.gamma <= CASE_TOL else "I"


def assemble(problem: HalfLineProblem, grid: Grid, delta0: Optional[float] = None) -> TruncatedSystem:
    require_valid(problem)
    x0_nodes = np.array([problem.forcing(t) for t in grid.nodes])
    case = case_of(problem)
    if case == "I":
        return TruncatedSystem("I", grid, problem, None, NodeSequence(x0_nodes),
                               contraction_q(problem.regularity, problem.constants))
    params = select_delta(grid.h, problem.constants, problem.regularity, delta0)
    weight = np.exp(-params.delta * grid.nodes)[:, None]
    return TruncatedSystem("II", grid, problem, params, NodeSequence(weight * x0_nodes), params.theta)


def _as_values(system: TruncatedSystem, x) -> np.ndarray:
    values = x.values if isinstance(x, NodeSequence) else np.asarray(x, dtype=float)
    if values.ndim == 1 and system.problem.dim == 1:
        values = values[:, None]
    expected = (system.grid.N + 1, system.problem.dim)
    if values.shape != expected:
        raise ValueError(f"dimension mismatch: sequence has shape {values.shape}, system expects {expected}")
    return values


def _row_sums(system: TruncatedSystem, x_phys: np.ndarray, i: int) -> np.ndarray:
    """Volterra plus truncated tail sum of row i, evaluated at physical values."""
    p, grid = system.problem, system.grid
    h, N = grid.h, grid.N
    nodes = grid.nodes
    out = np.zeros(p.dim)
    if i > 0:
        w = volterra_weights_row(i, h, p.constants)
        s = nodes[:i, None]
        fv = p.kernels.f(np.full_like(s, nodes[i]), s, x_phys[:i])
        out += np.sum(w[:, None] * fv, axis=0)
    v = tail_weights_row(i, N, h, p.constants)
    s = nodes[i:, None]
    gv = p.kernels.g(np.full_like(s, nodes[i]), s, x_phys[i:])
    out += np.sum(v[:, None] * gv, axis=0)
    return out


def apply_operator(system: TruncatedSystem, x) -> NodeSequence:
    """One application of the discrete operator in the system's own unknowns.

    Case I:  x_i -> b_i + sum_{j<i} w_ij f(ih, jh, x_j) + sum_{j=i}^N v_ij g(ih, jh, x_j)
    Case II: y_i -> exp(-i delta h) * (same right-hand side at x_j = exp(j delta h) y_j)
    """
    values = _as_values(system, x)
    scale = system.scale
    x_phys = values * scale[:, None]
    out = np.empty_like(values)
    for i in range(system.grid.N + 1):
        out[i] = _row_sums(system, x_phys, i)
    out /= scale[:, None]
    out += system.b.values
    return NodeSequence(out)


def residual(system: TruncatedSystem, x) -> float:
    values = _as_values(system, x)
    return float(np.max(np.abs(values - apply_operator(system, values).values)))


def transform(x, delta: DeltaParams, grid: Grid) -> NodeSequence:
    """y_i = exp(-i delta h) x_i."""
    values = x.values if isinstance(x, NodeSequence) else np.asarray(x, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return NodeSequence(values * np.exp(-delta.delta * grid.h * np.arange(values.shape[0]))[:, None])


def untransform(y, delta: DeltaParams, grid: Grid) -> NodeSequence:
    """x_i = exp(i delta h) y_i."""
    values = y.values if isinstance(y, NodeSequence) else np.asarray(y, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return NodeSequence(values * np.exp(delta.delta * grid.h * np.arange(values.shape[0]))[:, None])


def to_physical(system: TruncatedSystem, y) -> NodeSequence:
    if system.delta is None:
        return y if isinstance(y, NodeSequence) else NodeSequence(y)
    return untransform(y, system.delta, system.grid)


def truncation_remainder_bound(system: TruncatedSystem) -> np.ndarray:
    """Per-node bound Cg * sum_{j>N} v_ij on the dropped tail, in system unknowns."""
    p, grid = system.problem, system.grid
    bound = np.array([p.regularity.Cg * tail_remainder(i, grid.N, grid.h, p.constants)
                      for i in range(grid.N + 1)])
    return bound / system.scale
