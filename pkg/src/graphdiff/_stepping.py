"""Time steppers for linear systems  M u' = -K u.

Two routes: dense matrix exponential (scaling and squaring, fine up to a
couple thousand unknowns) and Crank-Nicolson with step doubling until the
solution stops moving at the requested relative tolerance.  The first CN
step is split into two backward-Euler half steps, which kills the
undamped ringing CN otherwise leaves on rough initial data; both stages
share one factorization since BE at dt/2 and CN at dt use the same
left-hand matrix M + (dt/2) K.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

DENSE_LIMIT = 4000


class StepControlError(RuntimeError):
    """Crank-Nicolson step doubling failed to converge."""


def expm_apply(matrix, u0: np.ndarray, t: float) -> np.ndarray:
    """u(t) = expm(t A) u0 with A = ``matrix`` (dense route)."""
    if t == 0.0:
        return np.array(u0, dtype=float, copy=True)
    if sp.issparse(matrix):
        matrix = matrix.toarray()
    n = matrix.shape[0]
    if n > DENSE_LIMIT:
        raise ValueError(
            f"dense exponential limited to {DENSE_LIMIT} unknowns (got {n}); "
            "use the Crank-Nicolson route"
        )
    return scipy.linalg.expm(t * np.asarray(matrix, dtype=float)) @ u0


def _cn_run(mass, stiff, u0, t, n_steps):
    dt = t / n_steps
    lhs = (mass + (dt / 2.0) * stiff).tocsc()
    solver = splu(lhs)
    u = np.array(u0, dtype=float, copy=True)
    # two backward-Euler half steps in place of the first CN step
    u = solver.solve(mass @ u)
    u = solver.solve(mass @ u)
    rhs = (mass - (dt / 2.0) * stiff).tocsr()
    for _ in range(n_steps - 1):
        u = solver.solve(rhs @ u)
    return u


def crank_nicolson(
    mass,
    stiff,
    u0: np.ndarray,
    t: float,
    rtol: float = 1e-8,
    weights=None,
    start_steps: int = 16,
    max_steps: int = 1 << 21,
) -> np.ndarray:
    """Integrate M u' = -K u to time t, doubling the step count until two
    consecutive refinements agree to ``rtol`` in the weighted 2-norm."""
    if t == 0.0:
        return np.array(u0, dtype=float, copy=True)
    mass = sp.csr_matrix(mass)
    stiff = sp.csr_matrix(stiff)
    w = np.ones(len(u0)) if weights is None else np.asarray(weights, dtype=float)

    def wnorm(v):
        return float(np.sqrt(np.sum(w * v * v)))

    n = start_steps
    prev = _cn_run(mass, stiff, u0, t, n)
    while n <= max_steps:
        n *= 2
        cur = _cn_run(mass, stiff, u0, t, n)
        scale = max(wnorm(cur), wnorm(u0), 1e-300)
        if wnorm(cur - prev) <= rtol * scale:
            return cur
        prev = cur
    raise StepControlError(
        f"no convergence to rtol={rtol} within {max_steps} steps"
    )
