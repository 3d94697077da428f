"""
Stationary distributions of irreducible CTMC generators.

Primary path: sparse LU solve of G' x = 0 with the last equation replaced by
the normalization sum(x) = 1. If the system is singular or its condition
estimate exceeds COND_LIMIT, fall back to power iteration on the uniformized
kernel.
"""

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


def count_strong_components(generator) -> int:
    """Number of strongly connected components of the off-diagonal support."""
    g = sp.csr_matrix(generator, dtype=float)
    support = (g - sp.diags(g.diagonal())).tocsr()
    support.eliminate_zeros()
    n_components, _ = connected_components(support, directed=True, connection="strong")
    return int(n_components)


def _normalized_system(generator) -> sp.csc_matrix:
    a = sp.csr_matrix(generator, dtype=float).T.tocsr()
    n = a.shape[0]
    ones = sp.csr_matrix(np.ones((1, n)))
    return sp.vstack([a[: n - 1], ones], format="csc")


def _condition_estimate(a: sp.csc_matrix, lu) -> float:
    inverse = spla.LinearOperator(
        a.shape,
        matvec=lu.solve,
        rmatvec=lambda x: lu.solve(x, trans="T"),
        dtype=float,
    )
    return float(spla.onenormest(a) * spla.onenormest(inverse))


def power_iteration(generator, tol: float = 1e-15, max_iter: int = 1_000_000) -> np.ndarray:
    g = sp.csr_matrix(generator, dtype=float)
    n = g.shape[0]
    # strictly larger than max |g_ii| so the kernel is aperiodic
    rate = 1.05 * float(np.abs(g.diagonal()).max())
    kernel_t = (sp.identity(n, format="csr") + g / rate).T.tocsr()

    x = np.full(n, 1.0 / n)
    for it in range(max_iter):
        x_next = kernel_t @ x
        x_next /= x_next.sum()
        if np.abs(x_next - x).sum() < tol:
            logger.info(f"Power iteration converged after {it + 1} sweeps")
            return x_next
        x = x_next
    logger.warning(f"Power iteration stopped at max_iter={max_iter} without reaching tol={tol}")
    return x


def stationary_distribution(generator, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Unit-sum left null vector of an irreducible generator."""
    n = generator.shape[0]
    if n == 1:
        return np.ones(1)

    a = _normalized_system(generator)
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        lu = spla.splu(a)
    except RuntimeError as e:
        logger.warning(f"Sparse LU failed ({e}); falling back to power iteration")
        return power_iteration(generator)

    cond = _condition_estimate(a, lu)
    if not np.isfinite(cond) or cond > cond_limit:
        logger.warning(
            f"Condition estimate {cond:.3g} above {cond_limit:.0e}; using power iteration"
        )
        return power_iteration(generator)

    x = lu.solve(rhs)
    x = np.clip(x, 0.0, None)
    return x / x.sum()
