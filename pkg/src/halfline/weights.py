"""Closed-form quadrature weights for the Volterra and tail terms.

For a uniform grid t_i = i*h the two weights are the exact integrals of the
exponential factors over one cell,

    w_ij = int_{jh}^{(j+1)h} exp(a1*s - a2*ih) ds,   0 <= j <= i-1,
    v_ij = int_{jh}^{(j+1)h} exp(-b*s + c*ih) ds,    j >= i.

Both exponents are non-positive on their index ranges, so the direct
formulas cannot overflow.  ``expm1`` keeps the cell factors accurate as h
goes to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import Constants, RegularityData, contraction_q

MAX_HALVINGS = 60


class UnsolvableConfigurationError(ValueError):
    """No admissible reweighting exponent exists (assumption A1 fails)."""


@dataclass(frozen=True)
class Grid:
    h: float
    N: int

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"Grid invariant violated: h > 0 (got h={self.h!r})")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"Grid invariant violated: N >= 1 integer (got N={self.N!r})")
        object.__setattr__(self, "N", int(self.N))

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(self.N + 1)


@dataclass(frozen=True)
class DeltaParams:
    delta: float
    theta: float


def _volterra_cell(h, a1):
    # (exp(a1 h) - 1) / a1 > 0 for either sign of a1
    return math.expm1(a1 * h) / a1


def _tail_cell(h, b):
    return -math.expm1(-b * h) / b


def volterra_weight(i: int, j: int, h: float, constants: Constants) -> float:
    """w_ij for 0 <= j <= i-1."""
    a1, a2 = constants.alpha1, constants.alpha2
    return math.exp((a1 * j - a2 * i) * h) * _volterra_cell(h, a1)


def tail_weight(i: int, j: int, h: float, constants: Constants) -> float:
    """v_ij for j >= i."""
    b, c = constants.beta, constants.gamma
    return math.exp((-b * j + c * i) * h) * _tail_cell(h, b)


def volterra_weights_row(i: int, h: float, constants: Constants) -> np.ndarray:
    """Array ``[w_i0, ..., w_i,i-1]``."""
    a1, a2 = constants.alpha1, constants.alpha2
    j = np.arange(i, dtype=float)
    return np.exp((a1 * j - a2 * i) * h) * _volterra_cell(h, a1)


def tail_weights_row(i: int, last: int, h: float, constants: Constants) -> np.ndarray:
    """Array ``[v_ii, ..., v_i,last]`` (empty when last < i)."""
    b, c = constants.beta, constants.gamma
    j = np.arange(i, last + 1, dtype=float)
    return np.exp((-b * j + c * i) * h) * _tail_cell(h, b)


def volterra_prefix_sum(i: int, h: float, constants: Constants) -> float:
    """sum_{j<i} w_ij = (exp((a1-a2) ih) - exp(-a2 ih)) / a1, zero for i = 0."""
    if i <= 0:
        return 0.0
    a1, a2 = constants.alpha1, constants.alpha2
    t = i * h
    if a1 * t < 700.0:
        # factored form avoids cancellation for small a1*t
        return math.exp(-a2 * t) * math.expm1(a1 * t) / a1
    return (math.exp((a1 - a2) * t) - math.exp(-a2 * t)) / a1


def tail_weight_sum(i: int, h: float, constants: Constants) -> float:
    """sum_{j>=i} v_ij = exp(-(b-c) ih) / b."""
    b, c = constants.beta, constants.gamma
    return math.exp(-(b - c) * i * h) / b


def tail_remainder(i: int, N: int, h: float, constants: Constants) -> float:
    """sum_{j>N} v_ij, the tail mass dropped by truncating at index N (i <= N)."""
    b, c = constants.beta, constants.gamma
    return math.exp(-b * (N + 1) * h + c * i * h) / b


def delta_feasible(delta: float, constants: Constants) -> bool:
    a1 = constants.alpha1
    return (delta > 0
            and math.copysign(1.0, a1 + delta) == math.copysign(1.0, a1) and a1 + delta != 0
            and constants.beta - delta > 0
            and constants.gamma - delta > 0)


def theta(delta: float, h: float, constants: Constants, regularity: RegularityData) -> float:
    """Contraction constant of the system reweighted by exp(-i*delta*h).

    Tends to ``contraction_q`` as delta -> 0+.
    """
    if not delta_feasible(delta, constants):
        raise ValueError(
            f"delta={delta!r} violates the reweighting conditions: delta > 0, "
            "alpha1 + delta same sign as alpha1, beta - delta > 0, gamma - delta > 0")
    a1, b = constants.alpha1, constants.beta
    volterra_ratio = math.expm1(a1 * h) / math.expm1((a1 + delta) * h)
    tail_ratio = math.expm1(-b * h) / math.expm1(-(b - delta) * h)
    return regularity.Lf / abs(a1) * volterra_ratio + regularity.Lg / b * tail_ratio


def default_delta0(constants: Constants) -> float:
    caps = [constants.beta, constants.gamma]
    if constants.alpha1 < 0:
        caps.append(abs(constants.alpha1))
    return 0.5 * min(caps)


def select_delta(h: float, constants: Constants, regularity: RegularityData,
                 delta0: float | None = None) -> DeltaParams:
    """Pick a reweighting exponent with theta < 1 by repeated halving."""
    q = contraction_q(regularity, constants)
    if not q < 1:
        raise UnsolvableConfigurationError(
            f"assumption A1 fails: Lf/|alpha1| + Lg/beta = {q!r} >= 1, no delta gives theta < 1")
    if not constants.gamma > 0:
        raise UnsolvableConfigurationError(
            f"reweighting needs gamma - delta > 0 but gamma = {constants.gamma!r}")
    delta = default_delta0(constants) if delta0 is None else float(delta0)
    if not delta > 0:
        raise ValueError(f"delta0 must be positive, got {delta0!r}")
    for _ in range(MAX_HALVINGS + 1):
        if delta_feasible(delta, constants):
            th = theta(delta, h, constants, regularity)
            if th < 1:
                params = DeltaParams(delta, th)
                assert delta_feasible(params.delta, constants) and params.theta < 1
                return params
        delta *= 0.5
    raise UnsolvableConfigurationError(
        f"no admissible delta after {MAX_HALVINGS} halvings (q={q!r}, h={h!r})")
