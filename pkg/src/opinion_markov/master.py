"""
Master Markov model over the M^N joint opinion states.

States are flat indices in mixed radix with agent 0 most significant:
index = sum_r sigma_r * M^(N-1-r), sigma 0-based. Lexicographic order of
opinion tuples is index order, and a master vector reshaped to (M,)*N in C
order has agent r on axis r.
"""

import functools
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from opinion_markov.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    ReducibleGenerator,
    SameAgent,
    StateSpaceTooLarge,
)
from opinion_markov.models import (
    InfluenceIntensities,
    MasterGenerator,
    NetworkModel,
    ProbabilityTrajectory,
    as_probability_vector,
)
from opinion_markov.solvers import stationary, uniformization

logger = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 2**24


def check_state_space(n_agents: int, n_opinions: int, max_states: int) -> int:
    n_states = n_opinions**n_agents
    if n_states > max_states:
        raise StateSpaceTooLarge(n_states, max_states)
    return n_states


def encode_state(opinions: Sequence[int], n_opinions: int) -> int:
    index = 0
    for sigma in opinions:
        if not 0 <= int(sigma) < n_opinions:
            raise IndexOutOfRange(f"opinion index {sigma} outside 0..{n_opinions - 1}")
        index = index * n_opinions + int(sigma)
    return index


def decode_state(index: int, n_agents: int, n_opinions: int) -> np.ndarray:
    if not 0 <= index < n_opinions**n_agents:
        raise IndexOutOfRange(f"state index {index} outside 0..{n_opinions**n_agents - 1}")
    return np.array(np.unravel_index(index, (n_opinions,) * n_agents), dtype=np.int64)


@functools.lru_cache(maxsize=8)
def state_digits(n_agents: int, n_opinions: int) -> np.ndarray:
    """Opinion of every agent in every state, shape (M^N, N). Read-only."""
    grids = np.indices((n_opinions,) * n_agents).reshape(n_agents, -1).T
    digits = np.ascontiguousarray(grids, dtype=np.int8 if n_opinions < 128 else np.int64)
    digits.setflags(write=False)
    return digits


def build_noninteracting_generator(
    network: NetworkModel, max_states: int = DEFAULT_MAX_STATES
) -> MasterGenerator:
    """Kronecker sum Q0 = sum_r I_{M^r} (x) Q^[r] (x) I_{M^(N-1-r)}."""
    n, m = network.n_agents, network.n_opinions
    n_states = check_state_space(n, m, max_states)

    q0 = sp.csr_matrix((n_states, n_states))
    for r, agent in enumerate(network.agents):
        left = sp.identity(m**r, format="csr")
        right = sp.identity(m ** (n - 1 - r), format="csr")
        q0 = q0 + sp.kron(sp.kron(left, sp.csr_matrix(agent.entries)), right, format="csr")
    q0.eliminate_zeros()
    logger.debug(f"Q0: {n_states} states, {q0.nnz} nonzeros")
    return MasterGenerator(q0.tocsr(), m, n)


def build_interaction_generator(
    network: NetworkModel,
    lambdas: Optional[InfluenceIntensities] = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> MasterGenerator:
    """
    A0: from every state, agent r moves to j != sigma_r at rate
    lambda_j * (#neighbours of r holding j) / deg(r). Isolated agents contribute nothing.
    """
    n, m = network.n_agents, network.n_opinions
    n_states = check_state_space(n, m, max_states)
    lam = (lambdas or network.intensities_at(0.0)).as_array()
    if lam.size != m:
        raise DimensionMismatch(m, lam.size, "intensity vector")

    digits = state_digits(n, m)
    states = np.arange(n_states, dtype=np.int64)
    rows, cols, vals = [], [], []
    for r, nbrs in enumerate(network.graph.neighbors):
        if nbrs.size == 0:
            continue
        own = digits[:, r].astype(np.int64)
        stride = m ** (n - 1 - r)
        for j in range(m):
            if lam[j] == 0.0:
                continue
            share = (digits[:, nbrs] == j).sum(axis=1) / nbrs.size
            rate = lam[j] * share
            hit = (own != j) & (rate > 0)
            rows.append(states[hit])
            cols.append(states[hit] + (j - own[hit]) * stride)
            vals.append(rate[hit])

    if rows:
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    a0 = (off - sp.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()
    a0.eliminate_zeros()
    logger.debug(f"A0: {n_states} states, {a0.nnz} nonzeros")
    return MasterGenerator(a0, m, n)


def build_master_generator(
    network: NetworkModel,
    lambdas: Optional[InfluenceIntensities] = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> MasterGenerator:
    gen = build_noninteracting_generator(network, max_states) + build_interaction_generator(
        network, lambdas, max_states
    )
    logger.info(
        f"Master generator: N={network.n_agents}, M={network.n_opinions}, "
        f"{gen.n_states} states, {gen.nnz} nonzeros"
    )
    return gen


def _matrix(gen: Union[MasterGenerator, sp.spmatrix, np.ndarray]) -> sp.csr_matrix:
    return gen.matrix if isinstance(gen, MasterGenerator) else sp.csr_matrix(gen, dtype=float)


def master_transient(gen, pi0, grid) -> ProbabilityTrajectory:
    g = _matrix(gen)
    p0 = np.asarray(pi0, dtype=float)
    if p0.shape != (g.shape[0],):
        raise DimensionMismatch(g.shape[0], p0.size, "initial master distribution")
    p0 = as_probability_vector(p0)
    times = np.asarray(grid, dtype=float)
    return ProbabilityTrajectory(times, uniformization.transient(g, p0, times))


def master_transient_scheduled(
    network: NetworkModel, pi0, grid, max_states: int = DEFAULT_MAX_STATES
) -> ProbabilityTrajectory:
    """Master transient under the network's piecewise-constant intensities."""
    q0 = build_noninteracting_generator(network, max_states)
    schedule = network.schedule
    generators = [
        (q0 + build_interaction_generator(network, seg, max_states)).matrix
        for seg in schedule.segments
    ]
    p0 = np.asarray(pi0, dtype=float)
    if p0.shape != (q0.n_states,):
        raise DimensionMismatch(q0.n_states, p0.size, "initial master distribution")
    times = np.asarray(grid, dtype=float)
    probabilities = uniformization.transient_piecewise(
        schedule.starts, generators, as_probability_vector(p0), times
    )
    return ProbabilityTrajectory(times, probabilities)


def master_steady_state(gen) -> np.ndarray:
    g = _matrix(gen)
    n_components = stationary.count_strong_components(g)
    if n_components > 1:
        raise ReducibleGenerator(n_components)
    return stationary.stationary_distribution(g)


def _as_tensor(pi, n_opinions: int) -> np.ndarray:
    p = np.asarray(pi, dtype=float)
    n_agents = int(round(np.log(p.size) / np.log(n_opinions))) if p.size > 1 else 0
    if p.ndim != 1 or n_agents < 1 or n_opinions**n_agents != p.size:
        raise DimensionMismatch(n_opinions ** max(n_agents, 1), p.size, "master vector")
    return p.reshape((n_opinions,) * n_agents)


def _check_agent(r: int, n_agents: int) -> None:
    if not 0 <= r < n_agents:
        raise IndexOutOfRange(f"agent index {r} outside 0..{n_agents - 1}")


def marginal_of_agent(pi, r: int, n_opinions: int) -> np.ndarray:
    """Opinion distribution of agent r (0-based) under the master vector pi."""
    tensor = _as_tensor(pi, n_opinions)
    _check_agent(r, tensor.ndim)
    others = tuple(a for a in range(tensor.ndim) if a != r)
    return tensor.sum(axis=others)


def pair_joint(pi, r: int, s: int, n_opinions: int) -> np.ndarray:
    """M x M joint law of (sigma_r, sigma_s); entry [i, j] is Pr{sigma_r=i, sigma_s=j}."""
    tensor = _as_tensor(pi, n_opinions)
    _check_agent(r, tensor.ndim)
    _check_agent(s, tensor.ndim)
    if r == s:
        raise SameAgent(f"pair_joint needs two distinct agents, got r=s={r}")
    others = tuple(a for a in range(tensor.ndim) if a not in (r, s))
    joint = tensor.sum(axis=others)
    return joint if r < s else joint.T


def count_distribution(pi, opinion: int, n_opinions: int) -> np.ndarray:
    """Law of the number of agents holding `opinion` (0-based), over {0..N}."""
    tensor = _as_tensor(pi, n_opinions)
    n = tensor.ndim
    if not 0 <= opinion < n_opinions:
        raise IndexOutOfRange(f"opinion index {opinion} outside 0..{n_opinions - 1}")
    counts = (state_digits(n, n_opinions) == opinion).sum(axis=1)
    return np.bincount(counts, weights=tensor.ravel(), minlength=n + 1)


def expected_share(pi, opinion: int, n_opinions: int) -> float:
    """E[n_j / N] under the master vector pi."""
    dist = count_distribution(pi, opinion, n_opinions)
    n = dist.size - 1
    return float(np.arange(n + 1) @ dist / n)


def product_distribution(marginals) -> np.ndarray:
    """Master vector of independent agents with the given per-agent marginals (rows)."""
    rows = [as_probability_vector(row) for row in np.atleast_2d(np.asarray(marginals, dtype=float))]
    return functools.reduce(np.kron, rows)


def write_generator_coo(gen, path: Union[str, Path]) -> None:
    """Header 'n_states nnz', then one 0-based 'row col value' line per nonzero."""
    coo = _matrix(gen).tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{coo.shape[0]} {coo.nnz}\n")
        for k in order:
            f.write(f"{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}\n")
