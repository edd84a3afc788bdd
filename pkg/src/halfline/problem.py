"""Problem class for half-line integral equations with two integral terms.

The equation solved throughout the package is

    x(t) = x0(t) + int_0^t exp(a1*s - a2*t) f(t, s, x(s)) ds
                 + int_t^inf exp(-b*s + c*t) g(t, s, x(s)) ds,   t >= 0,

with x taking values in R^n.  Norms on R^n are max-norms.

Kernel calling convention
-------------------------
Kernels are vectorised over a batch of m evaluation points: ``f(t, s, x)``
receives ``t`` and ``s`` as arrays of shape ``(m, 1)`` and ``x`` of shape
``(m, n)`` and must return an array of shape ``(m, n)``.  Most closed-form
kernels written with numpy ufuncs satisfy this automatically; scalar
kernels can be adapted with :func:`pointwise`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Kernel = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
Forcing = Callable[[float], np.ndarray]


class InvalidProblemError(ValueError):
    """Raised when a problem violates the standing assumptions."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        failed = ", ".join(f"{c.name} ({c.detail})" for c in report.failures)
        super().__init__(f"problem fails validation: {failed}")


@dataclass(frozen=True)
class Constants:
    alpha1: float
    alpha2: float
    beta: float
    gamma: float


@dataclass(frozen=True)
class RegularityData:
    """User-declared regularity metadata for the kernels.

    Lf, Lg are Lipschitz constants in x and Cf, Cg sup bounds of |f|, |g|
    over the invariant set.  The derivative bounds only enter the error
    analysis and are carried along for reporting.
    """

    Lf: float
    Lg: float
    Cf: float
    Cg: float
    Ef: Optional[float] = None
    Eg: Optional[float] = None
    Df: Optional[float] = None
    Dg: Optional[float] = None


@dataclass(frozen=True)
class KernelPair:
    f: Kernel
    g: Kernel


@dataclass(frozen=True)
class HalfLineProblem:
    dim: int
    constants: Constants
    kernels: KernelPair
    regularity: RegularityData
    x0: Forcing
    x0_sup: float
    name: str = field(default="", compare=False)

    def forcing(self, t: float) -> np.ndarray:
        return np.asarray(self.x0(t), dtype=float).reshape(self.dim)

    def eval_f(self, t: float, s: float, x) -> np.ndarray:
        """Evaluate f at a single point; returns an n-vector."""
        return _eval_single(self.kernels.f, t, s, x, self.dim)

    def eval_g(self, t: float, s: float, x) -> np.ndarray:
        return _eval_single(self.kernels.g, t, s, x, self.dim)


def _eval_single(kernel, t, s, x, dim):
    xa = np.asarray(x, dtype=float).reshape(1, dim)
    out = kernel(np.full((1, 1), float(t)), np.full((1, 1), float(s)), xa)
    return np.asarray(out, dtype=float).reshape(dim)


def pointwise(fun: Callable[[float, float, np.ndarray], np.ndarray]) -> Kernel:
    """Adapt a scalar kernel ``fun(t, s, x_vector) -> vector`` to the batch convention."""

    def kernel(t, s, x):
        t = np.broadcast_to(t, (x.shape[0], 1))
        s = np.broadcast_to(s, (x.shape[0], 1))
        return np.array([np.asarray(fun(float(t[k, 0]), float(s[k, 0]), x[k]), dtype=float).reshape(x.shape[1])
                         for k in range(x.shape[0])]).reshape(x.shape)

    return kernel


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __iter__(self):
        return iter(self.checks)


def contraction_q(regularity: RegularityData, constants: Constants) -> float:
    """Contraction constant Lf/|alpha1| + Lg/beta of the continuous and discrete operators."""
    return regularity.Lf / abs(constants.alpha1) + regularity.Lg / constants.beta


def safe_radius(problem: HalfLineProblem) -> float:
    """Radius of the invariant ball S (max-norm)."""
    c, r = problem.constants, problem.regularity
    return problem.x0_sup + r.Cf / abs(c.alpha1) + r.Cg / c.beta


def check_constants(constants: Constants) -> list[Check]:
    a1, a2, b, g = constants.alpha1, constants.alpha2, constants.beta, constants.gamma
    return [
        Check("alpha1 != 0", a1 != 0 and math.isfinite(a1), f"alpha1={a1!r}"),
        Check("alpha2 >= 0", a2 >= 0, f"alpha2={a2!r}"),
        Check("alpha1 <= alpha2", a1 <= a2, f"alpha1={a1!r}, alpha2={a2!r}"),
        Check("beta > 0", b > 0, f"beta={b!r}"),
        Check("beta >= gamma", b >= g, f"beta={b!r}, gamma={g!r}"),
    ]


def check_regularity(regularity: RegularityData, constants: Constants) -> list[Check]:
    checks = []
    for key in ("Lf", "Lg", "Cf", "Cg", "Ef", "Eg", "Df", "Dg"):
        value = getattr(regularity, key)
        if value is None:
            continue
        checks.append(Check(f"{key} >= 0", value >= 0 and math.isfinite(value), f"{key}={value!r}"))
    if constants.alpha1 != 0 and constants.beta > 0:
        q = contraction_q(regularity, constants)
        checks.append(Check("A1: Lf/|alpha1| + Lg/beta < 1", q < 1, f"q={q!r}"))
    else:
        checks.append(Check("A1: Lf/|alpha1| + Lg/beta < 1", False, "undefined for alpha1 = 0 or beta <= 0"))
    return checks


def validate(problem: HalfLineProblem) -> ValidationReport:
    """Check the constants' sign conditions and the smallness assumption A1.

    Never raises; every condition becomes one named entry of the report.
    """
    checks = check_constants(problem.constants)
    checks += check_regularity(problem.regularity, problem.constants)
    checks.append(Check("dim >= 1", problem.dim >= 1, f"dim={problem.dim!r}"))
    checks.append(Check("x0_sup >= 0", problem.x0_sup >= 0, f"x0_sup={problem.x0_sup!r}"))
    return ValidationReport(tuple(checks))


def require_valid(problem: HalfLineProblem) -> HalfLineProblem:
    report = validate(problem)
    if not report.passed:
        raise InvalidProblemError(report)
    return problem


# --- reductions ------------------------------------------------------------


def reverse_kernels(z0: Forcing, F: Kernel, G: Kernel) -> tuple[Forcing, Kernel, Kernel]:
    """Apply tau = -t, sigma = -s to the unweighted data of a whole-line equation.

    Returns ``(Z0, F_rev, G_rev)`` with ``Z0(tau) = z0(-tau)``,
    ``F_rev(tau, sigma, x) = -F(-tau, -sigma, x)`` and
    ``G_rev(tau, sigma, x) = G(-tau, -sigma, x)``.  The map is an involution.
    """

    def z0_rev(tau):
        return z0(-tau)

    def f_rev(tau, sigma, x):
        return -F(-tau, -sigma, x)

    def g_rev(tau, sigma, x):
        return G(-tau, -sigma, x)

    return z0_rev, f_rev, g_rev


def absorb_weights(K1: Kernel, K2: Kernel, constants: Constants) -> KernelPair:
    """Divide unweighted kernels by the exponential weights of the problem class."""
    a1, a2, b, c = constants.alpha1, constants.alpha2, constants.beta, constants.gamma

    def f(t, s, x):
        return K1(t, s, x) * np.exp(a2 * t - a1 * s)

    def g(t, s, x):
        return K2(t, s, x) * np.exp(b * s - c * t)

    return KernelPair(f, g)


def unweighted_kernels(problem: HalfLineProblem) -> tuple[Forcing, Kernel, Kernel]:
    """Return ``(x0, K1, K2)`` with the exponential weights multiplied back in."""
    a1, a2, b, c = (problem.constants.alpha1, problem.constants.alpha2,
                    problem.constants.beta, problem.constants.gamma)
    f, g = problem.kernels.f, problem.kernels.g

    def K1(t, s, x):
        return np.exp(a1 * s - a2 * t) * f(t, s, x)

    def K2(t, s, x):
        return np.exp(c * t - b * s) * g(t, s, x)

    return problem.x0, K1, K2


def time_reverse(z0: Forcing, F: Kernel, G: Kernel, constants: Constants,
                 regularity: RegularityData, dim: int, x0_sup: float,
                 name: str = "") -> HalfLineProblem:
    """Half-line problem for the t <= 0 part of

        z(t) = z0(t) + int_0^t F(t, s, z(s)) ds + int_{-inf}^t G(t, s, z(s)) ds.

    With Z(tau) = z(-tau) the Volterra term changes sign and the memory term
    becomes a tail integral over [tau, inf).  ``constants`` are the growth
    rates the caller asserts for the reversed kernels; the exponential
    weights are divided out of them.  ``regularity`` must describe the
    resulting weighted kernels f, g.
    """
    Z0, F_rev, G_rev = reverse_kernels(z0, F, G)
    problem = HalfLineProblem(dim=dim, constants=constants,
                              kernels=absorb_weights(F_rev, G_rev, constants),
                              regularity=regularity, x0=Z0, x0_sup=x0_sup, name=name)
    return require_valid(problem)


def from_memory_ide(f1, g1, u0, constants: Constants, regularity: RegularityData,
                    x0_sup: Optional[float] = None, name: str = "") -> HalfLineProblem:
    """Assemble the fading-memory integro-differential system

        du/dt = f1(t, u, v),  v(t) = int_{-inf}^t g1(t, s, u(s)) ds,  u(0) = u0,

    as an integral equation in ``[u; v]`` (dimension 2n) and reverse time so
    that the t <= 0 history becomes a half-line problem.

    ``f1(s, u, v)`` and ``g1(t, s, u)`` follow the batch convention with
    ``u, v`` of shape ``(m, n)``.
    """
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    n = u0.size
    dim = 2 * n
    z0_value = np.concatenate([u0, np.zeros(n)])

    def z0(t):
        return z0_value.copy()

    def F(t, s, z):
        out = np.zeros_like(z)
        out[:, :n] = f1(s, z[:, :n], z[:, n:])
        return out

    def G(t, s, z):
        out = np.zeros_like(z)
        out[:, n:] = g1(t, s, z[:, :n])
        return out

    if x0_sup is None:
        x0_sup = float(np.max(np.abs(u0))) if n else 0.0
    return time_reverse(z0, F, G, constants, regularity, dim, x0_sup, name=name)


def linear_problem(constants: Constants, A, B, x0: Forcing, x0_sup: float,
                   Lf: Optional[float] = None, Lg: Optional[float] = None,
                   Cf: Optional[float] = None, Cg: Optional[float] = None,
                   name: str = "") -> HalfLineProblem:
    """Problem with linear kernels f = A x, g = B x.

    Missing regularity constants are derived: Lipschitz constants are the
    induced max-norms of A and B, and the bounds are made self-consistent
    with the invariant ball, R = x0_sup / (1 - q), Cf = Lf R, Cg = Lg R.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError(f"A and B must be square matrices of equal size, got {A.shape} and {B.shape}")
    n = A.shape[0]
    Lf = float(np.abs(A).sum(axis=1).max()) if Lf is None else float(Lf)
    Lg = float(np.abs(B).sum(axis=1).max()) if Lg is None else float(Lg)
    if Cf is None or Cg is None:
        q = Lf / abs(constants.alpha1) + Lg / constants.beta if constants.alpha1 and constants.beta > 0 else math.inf
        R = x0_sup / (1 - q) if q < 1 else math.inf
        if Cf is None:
            Cf = Lf * R if Lf else 0.0
        if Cg is None:
            Cg = Lg * R if Lg else 0.0
    AT, BT = A.T.copy(), B.T.copy()

    def f(t, s, x):
        return x @ AT

    def g(t, s, x):
        return x @ BT

    return HalfLineProblem(dim=n, constants=constants, kernels=KernelPair(f, g),
                           regularity=RegularityData(Lf, Lg, float(Cf), float(Cg)),
                           x0=x0, x0_sup=float(x0_sup), name=name)
