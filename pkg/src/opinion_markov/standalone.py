"""
Stand-alone agent analytics: the isolated chain pi' = Q' pi.
"""

from typing import Union

import numpy as np

from opinion_markov.errors import WrongOpinionCount
from opinion_markov.models import ProbabilityTrajectory, RateMatrix, as_probability_vector
from opinion_markov.solvers import uniformization

RateLike = Union[RateMatrix, np.ndarray, list]


def _as_rate_matrix(Q: RateLike) -> RateMatrix:
    return Q if isinstance(Q, RateMatrix) else RateMatrix(np.asarray(Q, dtype=float))


def stand_alone_stationary(Q: RateLike) -> np.ndarray:
    """
    Unique unit-sum left null vector of Q.

    The last column of Q is replaced by ones, turning x'Q = 0 plus sum(x) = 1
    into a square nonsingular system.
    """
    q = _as_rate_matrix(Q).entries
    m = q.shape[0]
    system = q.copy()
    system[:, -1] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    x = np.linalg.solve(system.T, rhs)
    return x / x.sum()


def stand_alone_variance(Q: RateLike) -> float:
    """Bernoulli variance pi1 (1 - pi1) = q12 q21 / (q12 + q21)^2 of a binary agent."""
    q = _as_rate_matrix(Q)
    if q.M != 2:
        raise WrongOpinionCount(f"the stand-alone variance is defined for M=2, got M={q.M}")
    q12, q21 = q.entries[0, 1], q.entries[1, 0]
    return float(q12 * q21 / (q12 + q21) ** 2)


def stand_alone_transient(Q: RateLike, pi0, grid) -> ProbabilityTrajectory:
    q = _as_rate_matrix(Q)
    p0 = as_probability_vector(pi0)
    times = np.asarray(grid, dtype=float)
    return ProbabilityTrajectory(times, uniformization.transient(q.entries, p0, times))
