"""Fixed catalog of test problems.

======  ====  =====  ======================================================
id      dim   case   purpose
======  ====  =====  ======================================================
P1      1     I      linear, x = 1 exactly, the discrete system is exact
P1'     1     II     P1 with gamma = beta
P2      1     I      nonlinear, s-dependent kernels, x = exp(-t)
P3      2     II     reversed fading-memory integro-differential system
P4      1     I      decaying forcing, alpha1 < alpha2
======  ====  =====  ======================================================
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .problem import (Constants, HalfLineProblem, KernelPair, RegularityData,
                      from_memory_ide, linear_problem)
from .verify import ManufacturedProblem, manufacture

ALIASES = {"P1prime": "P1'", "P1p": "P1'"}


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    description: str
    build: Callable[[], HalfLineProblem]
    exact: Optional[Callable[[float], np.ndarray]] = None
    construction: str = ""

    def problem(self) -> HalfLineProblem:
        return self.build()

    def manufactured(self) -> Optional[ManufacturedProblem]:
        if self.exact is None:
            return None
        return ManufacturedProblem(self.build(), self.exact, self.construction)


def _one(t):
    return np.ones(1)


@functools.lru_cache(maxsize=None)
def p1() -> HalfLineProblem:
    return linear_problem(Constants(1.0, 1.0, 1.0, 0.0), [[0.25]], [[0.25]],
                          x0=lambda t: np.full(1, 0.75), x0_sup=0.75, name="P1")


@functools.lru_cache(maxsize=None)
def p1_prime() -> HalfLineProblem:
    return linear_problem(Constants(1.0, 1.0, 1.0, 1.0), [[0.25]], [[0.25]],
                          x0=lambda t: np.full(1, 0.5 + 0.25 * math.exp(-t)), x0_sup=0.75, name="P1'")


def _p2_f(t, s, x):
    return 0.3 * np.sin(x) / (1.0 + s)


def _p2_g(t, s, x):
    return 0.3 * np.cos(x) * np.exp(-(s - t) / 2.0)


def _p2_exact(t):
    return np.full(1, math.exp(-t))


@functools.lru_cache(maxsize=None)
def p2_manufactured() -> ManufacturedProblem:
    # |x0| <= sup|exact| + Cf/|alpha1| + Cg/beta = 1.6
    reg = RegularityData(Lf=0.3, Lg=0.3, Cf=0.3, Cg=0.3, Ef=0.3, Eg=0.15, Df=0.0, Dg=0.15)
    return manufacture(_p2_exact, KernelPair(_p2_f, _p2_g), Constants(1.0, 1.0, 1.0, 0.0), reg,
                       dim=1, x0_sup=1.6, name="P2")


def _p3_f1(s, u, v):
    return np.exp(s) * (0.2 * v - 0.2 * np.sin(u))


def _p3_g1(t, s, u):
    return 0.25 * np.exp(-(t - s)) * np.cos(u)


@functools.lru_cache(maxsize=None)
def p3() -> HalfLineProblem:
    # reversed kernels: f = -[0.2 v - 0.2 sin u; 0], g = [0; 0.25 cos u]
    # R = 0.5 + Cf + Cg with Cf = 0.2 R + 0.2, Cg = 0.25  =>  R = 1.1875
    R = 0.95 / 0.8
    reg = RegularityData(Lf=0.4, Lg=0.25, Cf=0.2 * R + 0.2, Cg=0.25)
    return from_memory_ide(_p3_f1, _p3_g1, u0=[0.5], constants=Constants(-1.0, 0.0, 1.0, 1.0),
                           regularity=reg, name="P3")


def _p4_kernel(t, s, x):
    return 0.2 * np.sin(x)


@functools.lru_cache(maxsize=None)
def p4() -> HalfLineProblem:
    reg = RegularityData(Lf=0.2, Lg=0.2, Cf=0.2, Cg=0.2)
    return HalfLineProblem(dim=1, constants=Constants(1.0, 2.0, 1.0, 0.0),
                           kernels=KernelPair(_p4_kernel, _p4_kernel), regularity=reg,
                           x0=lambda t: np.full(1, math.exp(-t)), x0_sup=1.0, name="P4")


CATALOG: dict[str, CatalogEntry] = {
    "P1": CatalogEntry("P1", "linear f = g = x/4, case I, exact x = 1, x0 = 3/4", p1, _one, "closed_form"),
    "P1'": CatalogEntry("P1'", "P1 with gamma = beta (case II), x0 = 1/2 + exp(-t)/4", p1_prime, _one,
                        "closed_form"),
    "P2": CatalogEntry("P2", "nonlinear s-dependent kernels, exact x = exp(-t), x0 by quadrature",
                       lambda: p2_manufactured().problem, _p2_exact, "quadrature"),
    "P3": CatalogEntry("P3", "time-reversed fading-memory IDE, dim 2, case II", p3),
    "P4": CatalogEntry("P4", "decaying forcing exp(-t), alpha1 < alpha2, case I", p4),
}


def get(problem_id: str) -> CatalogEntry:
    key = ALIASES.get(problem_id, problem_id)
    try:
        return CATALOG[key]
    except KeyError:
        raise KeyError(f"unknown catalog id {problem_id!r}; available: {', '.join(CATALOG)}") from None
