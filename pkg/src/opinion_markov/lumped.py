"""
Peer Assembly: identical binary agents on a complete graph.

The number n1 of agents holding opinion 1 is a birth-death chain on {0..N}.
Count distributions are plain probability vectors of length N+1.
"""

import logging
from typing import Iterable, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import binom

from opinion_markov.errors import (
    DegenerateDenominator,
    DimensionMismatch,
    InvalidParams,
    InvalidQuantile,
    ReducibleChain,
)
from opinion_markov.models import (
    BirthDeathChain,
    IntensitySchedule,
    ProbabilityTrajectory,
    as_probability_vector,
)
from opinion_markov.solvers import uniformization

logger = logging.getLogger(__name__)

LOWER_BAND = 0.025
UPPER_BAND = 0.975


def _check_rates(q12: float, q21: float) -> None:
    if not (q12 > 0 and q21 > 0) or not np.isfinite(q12 + q21):
        raise InvalidParams(f"q12 and q21 must be finite and > 0, got q12={q12}, q21={q21}")


def build_pa_chain(
    n_agents: int, q12: float, q21: float, lambda1: float, lambda2: float
) -> BirthDeathChain:
    """
    mu_j = (q21 + lambda1 (j-1)/(N-1)) (N-j+1) for j = 1..N
    nu_j = (q12 + lambda2 (N-j-1)/(N-1)) (j+1) for j = 0..N-1
    """
    if n_agents < 2:
        raise InvalidParams(f"the Peer Assembly needs N >= 2, got N={n_agents}")
    _check_rates(q12, q21)
    if lambda1 < 0 or lambda2 < 0:
        raise InvalidParams(f"intensities must be >= 0, got lambda1={lambda1}, lambda2={lambda2}")

    n = n_agents
    j = np.arange(1, n + 1)
    mu = (q21 + lambda1 * (j - 1) / (n - 1)) * (n - j + 1)
    j = np.arange(n)
    nu = (q12 + lambda2 * (n - j - 1) / (n - 1)) * (j + 1)
    return BirthDeathChain(n, mu, nu)


def _count_vector(p0, chain: BirthDeathChain) -> np.ndarray:
    p = np.asarray(p0, dtype=float)
    if p.shape != (chain.n_states,):
        raise DimensionMismatch(chain.n_states, p.size, "count distribution")
    return as_probability_vector(p)


def pa_transient(chain: BirthDeathChain, p0, grid) -> ProbabilityTrajectory:
    times = np.asarray(grid, dtype=float)
    p = _count_vector(p0, chain)
    return ProbabilityTrajectory(times, uniformization.transient(chain.generator(), p, times))


def pa_transient_scheduled(
    n_agents: int,
    q12: float,
    q21: float,
    schedule: IntensitySchedule,
    p0,
    grid,
) -> ProbabilityTrajectory:
    """Transient of the count chain under piecewise-constant (lambda1, lambda2)."""
    if schedule.M != 2:
        raise InvalidParams(f"the Peer Assembly has two opinions, schedule has M={schedule.M}")
    chains = [build_pa_chain(n_agents, q12, q21, *seg.values) for seg in schedule.segments]
    times = np.asarray(grid, dtype=float)
    p = _count_vector(p0, chains[0])
    probabilities = uniformization.transient_piecewise(
        schedule.starts, [c.generator() for c in chains], p, times
    )
    return ProbabilityTrajectory(times, probabilities)


def pa_steady_state(chain: BirthDeathChain) -> np.ndarray:
    """
    Product formula p_i = p_0 prod_{k=1..i} mu_k / nu_{k-1}, evaluated as
    cumulative log ratios shifted by their maximum before exponentiating.
    """
    if not chain.is_irreducible:
        raise ReducibleChain(
            births=(np.flatnonzero(chain.mu == 0) + 1).tolist(),
            deaths=np.flatnonzero(chain.nu == 0).tolist(),
        )
    log_p = np.concatenate([[0.0], np.cumsum(np.log(chain.mu) - np.log(chain.nu))])
    p = np.exp(log_p - log_p.max())
    return p / p.sum()


def pa_moments(pbar) -> Tuple[float, float]:
    """(mean, variance) of n1/N."""
    p = np.asarray(pbar, dtype=float)
    n = p.size - 1
    i = np.arange(n + 1)
    m1 = float(i @ p)
    m2 = float((i * i) @ p)
    return m1 / n, (m2 - m1 * m1) / n**2


def uipa_mean_closed_form(q12: float, q21: float) -> float:
    _check_rates(q12, q21)
    return q21 / (q12 + q21)


def uipa_variance_closed_form(n_agents: int, q12: float, q21: float, lam: float) -> float:
    """Var[n1/N] = (s2/N) (1 + lam (N-1) / (lam + (q12+q21)(N-1))), s2 = q12 q21 / (q12+q21)^2."""
    if n_agents < 2:
        raise InvalidParams(f"N must be >= 2, got {n_agents}")
    _check_rates(q12, q21)
    if lam < 0:
        raise InvalidParams(f"lambda must be >= 0, got {lam}")
    q = q12 + q21
    s2 = q12 * q21 / q**2
    if np.isinf(lam):
        return s2
    n = n_agents
    return s2 / n * (1.0 + lam * (n - 1) / (lam + q * (n - 1)))


def three_agent_mean_closed_form(q12: float, q21: float, lambda1: float, lambda2: float) -> float:
    """E[n1/N] of the three-agent Peer Assembly."""
    _check_rates(q12, q21)
    if lambda1 < 0 or lambda2 < 0:
        raise InvalidParams(f"intensities must be >= 0, got lambda1={lambda1}, lambda2={lambda2}")
    q = q12 + q21
    phi = 2 * q * q + 3 * q * lambda1 + lambda1 * lambda1
    numerator = q21 * (phi + q12 * (lambda2 - lambda1))
    denominator = q * phi + q12 * (3 * q * (lambda2 - lambda1) + (lambda2**2 - lambda1**2))
    if denominator == 0 or not np.isfinite(denominator):
        raise DegenerateDenominator(
            f"denominator vanishes at q12={q12}, q21={q21}, lambda1={lambda1}, lambda2={lambda2}"
        )
    return numerator / denominator


def pa_percentiles(p, q: float) -> int:
    """Smallest count i with Pr{n1 <= i} >= q."""
    if not 0.0 < q < 1.0:
        raise InvalidQuantile(f"quantile must lie in (0, 1), got {q}")
    cdf = np.cumsum(np.asarray(p, dtype=float))
    return int(min(np.searchsorted(cdf, q, side="left"), cdf.size - 1))


def initial_count_distribution(
    kind: str, n_agents: int, pi1: float = 0.5, count: int = 0
) -> np.ndarray:
    """binomial(pi1), uniform or deterministic(count) law of n1 over {0..N}."""
    if n_agents < 1:
        raise InvalidParams(f"N must be >= 1, got {n_agents}")
    if kind == "binomial":
        if not 0.0 <= pi1 <= 1.0:
            raise InvalidParams(f"binomial initial law needs 0 <= pi1 <= 1, got {pi1}")
        return binom.pmf(np.arange(n_agents + 1), n_agents, pi1)
    if kind == "uniform":
        return np.full(n_agents + 1, 1.0 / (n_agents + 1))
    if kind == "deterministic":
        if not 0 <= count <= n_agents:
            raise InvalidParams(
                f"deterministic initial count must be in 0..{n_agents}, got {count}"
            )
        p = np.zeros(n_agents + 1)
        p[count] = 1.0
        return p
    raise InvalidParams(
        f"unknown initial count law {kind!r}; expected binomial, uniform or deterministic"
    )


def transient_bands(trajectory: ProbabilityTrajectory) -> pd.DataFrame:
    """Mean of n1/N with its 2.5 and 97.5 percentile curves."""
    n = trajectory.probabilities.shape[1] - 1
    rows = []
    for t, p in zip(trajectory.times, trajectory.probabilities):
        mean, _ = pa_moments(p)
        rows.append(
            {
                "t": float(t),
                "mean": mean,
                "p2.5": pa_percentiles(p, LOWER_BAND) / n,
                "p97.5": pa_percentiles(p, UPPER_BAND) / n,
            }
        )
    return pd.DataFrame(rows, columns=["t", "mean", "p2.5", "p97.5"])


def moment_sweep(
    n_agents: int,
    q12: float,
    q21: float,
    lambda_pairs: Iterable[Sequence[float]],
) -> pd.DataFrame:
    """Stationary mean, variance and percentile band of n1/N per (lambda1, lambda2)."""
    rows = []
    for lambda1, lambda2 in lambda_pairs:
        p = pa_steady_state(build_pa_chain(n_agents, q12, q21, lambda1, lambda2))
        mean, var = pa_moments(p)
        rows.append(
            {
                "lambda1": float(lambda1),
                "lambda2": float(lambda2),
                "mean": mean,
                "var": var,
                "p2.5": pa_percentiles(p, LOWER_BAND) / n_agents,
                "p97.5": pa_percentiles(p, UPPER_BAND) / n_agents,
            }
        )
    logger.debug(f"Moment sweep over {len(rows)} intensity pairs at N={n_agents}")
    return pd.DataFrame(rows, columns=["lambda1", "lambda2", "mean", "var", "p2.5", "p97.5"])
