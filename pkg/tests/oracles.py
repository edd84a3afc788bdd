"""Independent reference computations shared by the test modules.

Nothing here uses the package's closed-form weights: cell integrals come
from scipy quadrature and the linear truncated systems are solved densely.
"""

import numpy as np
from scipy import integrate


def quad_volterra_weight(i, j, h, a1, a2):
    val, _ = integrate.quad(lambda s: np.exp(a1 * s - a2 * i * h), j * h, (j + 1) * h,
                            epsabs=0, epsrel=1e-13)
    return val


def quad_tail_weight(i, j, h, b, c):
    val, _ = integrate.quad(lambda s: np.exp(-b * s + c * i * h), j * h, (j + 1) * h,
                            epsabs=0, epsrel=1e-13)
    return val


def dense_linear_solution(constants, A, B, x0_nodes, h):
    """Solve x_i = b_i + sum_{j<i} w_ij A x_j + sum_{j=i}^N v_ij B x_j directly.

    ``x0_nodes`` has shape (N+1, n).  Returns an array of the same shape.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    b = np.asarray(x0_nodes, dtype=float)
    N1, n = b.shape
    c = constants
    K = np.zeros((N1 * n, N1 * n))
    for i in range(N1):
        rows = slice(i * n, (i + 1) * n)
        for j in range(i):
            K[rows, j * n:(j + 1) * n] += quad_volterra_weight(i, j, h, c.alpha1, c.alpha2) * A
        for j in range(i, N1):
            K[rows, j * n:(j + 1) * n] += quad_tail_weight(i, j, h, c.beta, c.gamma) * B
    x = np.linalg.solve(np.eye(N1 * n) - K, b.reshape(-1))
    return x.reshape(N1, n)
