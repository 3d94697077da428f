"""
Closed marginal dynamics under unbiased influence.

Per-agent marginals (identical agents, any topology) obey the linear system

    Pi' = Pi Q + lambda(t) (W - H) Pi

with Pi the (N, M) matrix of marginals, W the row-normalized adjacency and H
the indicator of agents that have neighbours (isolated agents feel no
influence). On the Peer Assembly, the joint law of an agent pair closes on the
2-dimensional affine system x' = b - K x, x = (pi11, pi22), solved exactly.
"""

import logging
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from opinion_markov.errors import (
    BiasedIntensities,
    DimensionMismatch,
    HeterogeneousAgents,
    InvalidParams,
)
from opinion_markov.models import (
    IntensitySchedule,
    MarginalTrajectory,
    NetworkModel,
    PairJointState,
    PairJointTrajectory,
    as_probability_vector,
)

logger = logging.getLogger(__name__)

ODE_METHOD = "DOP853"
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12


def _influence_operator(network: NetworkModel) -> sp.csr_matrix:
    degrees = network.graph.degrees.astype(float)
    has_neighbors = degrees > 0
    inv = np.divide(1.0, degrees, out=np.zeros_like(degrees), where=has_neighbors)
    w = sp.diags(inv) @ network.graph.adjacency()
    return (w - sp.diags(has_neighbors.astype(float))).tocsr()


def closure_schedule(network: NetworkModel, lam: Optional[float] = None) -> IntensitySchedule:
    """Schedule the marginal closure runs on; raises if the closure does not hold."""
    if not network.identical_agents:
        raise HeterogeneousAgents("marginal closure needs identical stand-alone rate matrices")
    if lam is not None:
        if not np.isfinite(lam) or lam < 0:
            raise InvalidParams(f"lambda must be finite and >= 0, got {lam}")
        return IntensitySchedule.constant([lam] * network.n_opinions)
    biased = [k for k, seg in enumerate(network.schedule.segments) if not seg.is_unbiased]
    if biased:
        raise BiasedIntensities(
            f"marginal closure needs equal intensities; segments {biased} are biased"
        )
    return network.schedule


def marginal_ode_solve(
    network: NetworkModel,
    initial,
    grid,
    lam: Optional[float] = None,
) -> MarginalTrajectory:
    """
    Marginals of every agent on `grid` (shape T x N x M).

    `lam` overrides the network's intensities with a constant unbiased value;
    otherwise the network schedule must be unbiased in every segment.
    """
    schedule = closure_schedule(network, lam)

    n, m = network.n_agents, network.n_opinions
    pi0 = np.asarray(initial, dtype=float)
    if pi0.shape != (n, m):
        raise DimensionMismatch(n * m, pi0.size, "initial marginal field")
    pi0 = np.stack([as_probability_vector(row) for row in pi0])

    times = np.asarray(grid, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise InvalidParams("time grid must be nondecreasing and start at or after 0")

    q = network.agents[0].entries
    influence = _influence_operator(network)

    def rhs(_t, y, lam_t):
        pi = y.reshape(n, m)
        return (pi @ q + lam_t * (influence @ pi)).ravel()

    out = np.empty((times.size, n, m))
    y = pi0.ravel()
    t = 0.0
    for k, start in enumerate(schedule.starts):
        if times.size == 0 or start > times[-1]:
            break
        end = schedule.starts[k + 1] if k + 1 < len(schedule.starts) else np.inf
        inside = (times >= start) & (times < end)
        targets = times[inside]
        stop = min(end, times[-1])
        if stop > t:
            t_eval = np.unique(np.append(targets, stop))
            sol = solve_ivp(
                rhs,
                (t, stop),
                y,
                method=ODE_METHOD,
                t_eval=t_eval,
                rtol=ODE_RTOL,
                atol=ODE_ATOL,
                args=(schedule.segments[k].values[0],),
            )
            if not sol.success:
                raise InvalidParams(f"marginal ODE integration failed: {sol.message}")
            values = sol.y.T
            out[inside] = values[np.searchsorted(t_eval, targets)].reshape(-1, n, m)
            y = values[-1]
            t = stop
        else:
            out[inside] = y.reshape(n, m)

    logger.debug(f"Marginal ODE: N={n}, M={m}, {times.size} grid points")
    return MarginalTrajectory(times, out)


def _pair_system(n_agents: int, q12: float, q21: float, lam: float):
    if n_agents < 2:
        raise InvalidParams(f"pair dynamics need N >= 2, got {n_agents}")
    if not (q12 > 0 and q21 > 0):
        raise InvalidParams(f"q12 and q21 must be > 0, got q12={q12}, q21={q21}")
    if not np.isfinite(lam) or lam < 0:
        raise InvalidParams(f"lambda must be finite and >= 0, got {lam}")
    share = lam / (n_agents - 1)
    b = np.array([q21 + share, q12 + share])
    k = 2.0 * np.diag([q12, q21]) + np.outer(b, np.ones(2))
    return k, b


def pair_joint_ode_solve(
    n_agents: int,
    q12: float,
    q21: float,
    lam: float,
    initial: PairJointState,
    grid,
) -> PairJointTrajectory:
    """x(t) = x* + expm(-K t)(x(0) - x*), x* = K^-1 b."""
    k, b = _pair_system(n_agents, q12, q21, lam)
    fixed = np.linalg.solve(k, b)
    x0 = np.array([initial.pi11, initial.pi22])
    times = np.asarray(grid, dtype=float)
    xs = np.array([fixed + expm(-k * t) @ (x0 - fixed) for t in times]).reshape(-1, 2)
    return PairJointTrajectory(times, xs[:, 0], xs[:, 1])


def pair_joint_stationary(n_agents: int, q12: float, q21: float, lam: float) -> float:
    """pi11 = q21 (lam + q21 (N-1)) / ((q12+q21)(lam + (q12+q21)(N-1)))."""
    _pair_system(n_agents, q12, q21, lam)
    q = q12 + q21
    n = n_agents
    return q21 * (lam + q21 * (n - 1)) / (q * (lam + q * (n - 1)))


def uipa_mean_trajectory(q12: float, q21: float, pi1_0: float, grid) -> np.ndarray:
    """E[n1(t)/N] from equal initial marginals pi1_0; the same for every lambda."""
    if not (q12 > 0 and q21 > 0):
        raise InvalidParams(f"q12 and q21 must be > 0, got q12={q12}, q21={q21}")
    q = q12 + q21
    pi1 = q21 / q
    return pi1 + (pi1_0 - pi1) * np.exp(-q * np.asarray(grid, dtype=float))


def count_variance_from_pair(n_agents: int, pi1: float, pi11: float) -> float:
    """Var[n1/N] from Var[n1] = N pi1 + N(N-1) pi11 - N^2 pi1^2."""
    n = n_agents
    return (n * pi1 + n * (n - 1) * pi11 - n * n * pi1 * pi1) / (n * n)
