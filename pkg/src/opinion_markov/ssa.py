"""
Exact event-driven simulation of the interacting-agent model.

Direct-method Gillespie: draw an exponential holding time from the total rate,
then pick the (agent, target opinion) pair proportionally to its rate. The
rate of agent r toward opinion j != sigma_r is

    q^[r]_{sigma_r j} + lambda_j(t) * c^[r]_j / |N^[r]|

where c^[r]_j counts the neighbours of r holding j (zero influence if r is
isolated). Rates live in a flat (N, M) table; after an event only the jumping
agent and its neighbours are recomputed. Intensities are piecewise constant,
so the table is rebuilt at every schedule breakpoint and the run resumes
there; by memorylessness the restarted holding time is exact.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from opinion_markov.errors import (
    GridOutOfRange,
    InvalidInitialOpinions,
    InvalidParams,
    NonfiniteRate,
)
from opinion_markov.models import (
    Ensemble,
    InfluenceIntensities,
    NetworkModel,
    SamplePath,
    as_probability_vector,
)
from opinion_markov.rng import derive_seed, make_rng

logger = logging.getLogger(__name__)

INITIAL_KINDS = ("iid", "fixed", "all", "counts")
RESYNC_EVERY = 10_000  # events between full recomputations of the total rate


@dataclass(frozen=True)
class InitialCondition:
    """
    How a replication draws its starting opinions. Opinion labels are 1-based.

    iid:    every agent independently from `probabilities` (length M)
    fixed:  exactly `opinions` (one label per agent)
    all:    every agent holds `opinion`
    counts: n_1 drawn from `probabilities` over {0..N}, then opinion 1 is given
            to a uniformly random subset of that size and opinion 2 to the rest
    """
    kind: str
    probabilities: Tuple[float, ...] = ()
    opinions: Tuple[int, ...] = ()
    opinion: int = 1

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise InvalidParams(
                f"unknown initial condition {self.kind!r}; expected one of {INITIAL_KINDS}"
            )
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        object.__setattr__(self, "opinions", tuple(int(o) for o in self.opinions))

    @classmethod
    def iid(cls, probabilities) -> "InitialCondition":
        return cls("iid", probabilities=tuple(probabilities))

    @classmethod
    def fixed(cls, opinions) -> "InitialCondition":
        return cls("fixed", opinions=tuple(opinions))

    @classmethod
    def all(cls, opinion: int) -> "InitialCondition":
        return cls("all", opinion=opinion)

    @classmethod
    def counts(cls, distribution) -> "InitialCondition":
        return cls("counts", probabilities=tuple(np.asarray(distribution, dtype=float)))


def sample_initial(
    init: InitialCondition,
    n_agents: int,
    n_opinions: int = 2,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Initial opinions as 0-based indices, one per agent."""
    if rng is None:
        rng = make_rng(seed)

    if init.kind == "iid":
        p = as_probability_vector(init.probabilities)
        if p.size != n_opinions:
            raise InvalidInitialOpinions(
                f"iid law has {p.size} entries for M={n_opinions} opinions"
            )
        return rng.choice(n_opinions, size=n_agents, p=p).astype(np.int64)

    if init.kind == "fixed":
        sigma = np.array(init.opinions, dtype=np.int64) - 1
        if sigma.size != n_agents:
            raise InvalidInitialOpinions(f"{sigma.size} fixed opinions for {n_agents} agents")
        _check_labels(sigma, n_opinions)
        return sigma

    if init.kind == "all":
        _check_labels(np.array([init.opinion - 1]), n_opinions)
        return np.full(n_agents, init.opinion - 1, dtype=np.int64)

    p = as_probability_vector(init.probabilities)
    if p.size != n_agents + 1:
        raise InvalidInitialOpinions(f"count law over {p.size - 1} agents used for N={n_agents}")
    if n_opinions != 2:
        raise InvalidInitialOpinions("count-based initial conditions need M=2")
    n1 = int(rng.choice(n_agents + 1, p=p))
    sigma = np.ones(n_agents, dtype=np.int64)
    sigma[rng.permutation(n_agents)[:n1]] = 0
    return sigma


def _check_labels(sigma: np.ndarray, n_opinions: int) -> None:
    bad = np.flatnonzero((sigma < 0) | (sigma >= n_opinions))
    if bad.size:
        raise InvalidInitialOpinions(
            f"opinions outside 1..{n_opinions} at agents {(bad + 1).tolist()}"
        )


class GillespieSimulator:
    """
    Stateful direct-method engine over one network.

    Holds the current opinions, the neighbour opinion counts and the (N, M)
    rate table with its running total.
    """

    def __init__(
        self,
        network: NetworkModel,
        sigma0: np.ndarray,
        rng: np.random.Generator,
        t0: float = 0.0,
    ):
        n, m = network.n_agents, network.n_opinions
        sigma = np.array(sigma0, dtype=np.int64)
        if sigma.shape != (n,):
            raise InvalidInitialOpinions(f"{sigma.size} initial opinions for {n} agents")
        _check_labels(sigma, m)

        self.network = network
        self.rng = rng
        self.t = float(t0)
        self.sigma = sigma
        self.n_events = 0

        q = network.rate_tensor()
        self._off = q.copy()
        self._off[:, np.arange(m), np.arange(m)] = 0.0
        self._neighbors = network.graph.neighbors
        degrees = network.graph.degrees.astype(float)
        self._inv_degree = np.divide(1.0, degrees, out=np.zeros(n), where=degrees > 0)
        self._adjacency = network.graph.adjacency()
        self._lambdas = np.zeros(m)

        self.counts = self._count_neighbors()
        self.rates = np.zeros((n, m))
        self.total = 0.0
        self.set_intensities(network.intensities_at(self.t))

    @property
    def n_agents(self) -> int:
        return len(self.sigma)

    @property
    def n_opinions(self) -> int:
        return self._off.shape[1]

    def _count_neighbors(self) -> np.ndarray:
        onehot = np.zeros((self.n_agents, self.n_opinions))
        onehot[np.arange(self.n_agents), self.sigma] = 1.0
        return np.asarray(self._adjacency @ onehot).round().astype(np.int64)

    def _agent_rates(self, agents: np.ndarray) -> np.ndarray:
        own = self.sigma[agents]
        rows = self._off[agents, own] + (
            self._lambdas[None, :] * self.counts[agents] * self._inv_degree[agents, None]
        )
        rows[np.arange(len(agents)), own] = 0.0
        if not np.all(np.isfinite(rows)):
            bad = agents[np.flatnonzero(~np.all(np.isfinite(rows), axis=1))[0]]
            raise NonfiniteRate(int(bad) + 1)
        return rows

    def set_intensities(self, lambdas: InfluenceIntensities) -> None:
        self._lambdas = lambdas.as_array()
        self.rebuild()

    def rebuild(self) -> None:
        """Recompute the whole rate table and its total."""
        self.rates = self._agent_rates(np.arange(self.n_agents))
        self.total = float(self.rates.sum())

    def select(self, u: float) -> Tuple[int, int]:
        """(agent, target opinion) for a uniform draw u in [0, 1)."""
        cumulative = np.cumsum(self.rates.ravel())
        k = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
        k = min(k, cumulative.size - 1)
        # skip zero-rate cells that searchsorted can land on at the boundary
        while self.rates.flat[k] <= 0.0 and k > 0:
            k -= 1
        return divmod(k, self.n_opinions)

    def fire(self, agent: int, opinion: int) -> int:
        """Move `agent` to `opinion`, update neighbour counts and rates; returns the old opinion."""
        old = int(self.sigma[agent])
        self.sigma[agent] = opinion
        nbrs = self._neighbors[agent]
        self.counts[nbrs, old] -= 1
        self.counts[nbrs, opinion] += 1

        touched = np.append(nbrs, agent)
        rows = self._agent_rates(touched)
        self.total += float(rows.sum() - self.rates[touched].sum())
        self.rates[touched] = rows

        self.n_events += 1
        if self.n_events % RESYNC_EVERY == 0:
            self.total = float(self.rates.sum())
        return old

    def step(self, t_limit: float) -> Optional[Tuple[float, int, int, int]]:
        """
        Advance to the next event, or to t_limit if it comes first.

        Returns (time, agent, old, new) or None when t_limit was reached.
        """
        if self.total <= 0.0:
            self.t = t_limit
            return None
        t_next = self.t + self.rng.exponential(1.0 / self.total)
        if t_next >= t_limit:
            self.t = t_limit
            return None
        self.t = t_next
        agent, opinion = self.select(self.rng.random())
        old = self.fire(agent, opinion)
        return t_next, agent, old, opinion

    def rate_discrepancy(self) -> float:
        """Max deviation of the incremental table and total from a full recomputation."""
        fresh_counts = self._count_neighbors()
        if not np.array_equal(fresh_counts, self.counts):
            return float("inf")
        fresh = self._agent_rates(np.arange(self.n_agents))
        table = float(np.abs(fresh - self.rates).max()) if fresh.size else 0.0
        return max(table, abs(float(fresh.sum()) - self.total))


def _run(network: NetworkModel, sigma0: np.ndarray, t_end: float, rng, seed) -> SamplePath:
    sim = GillespieSimulator(network, sigma0, rng)
    initial = sim.sigma.copy()
    times: List[float] = []
    agents: List[int] = []
    old: List[int] = []
    new: List[int] = []

    schedule = network.schedule
    t = 0.0
    while t < t_end:
        segment_end = min(schedule.next_breakpoint(t), t_end)
        if t > 0.0:
            sim.set_intensities(schedule.at(t))
        while (event := sim.step(segment_end)) is not None:
            times.append(event[0])
            agents.append(event[1])
            old.append(event[2])
            new.append(event[3])
        t = segment_end

    return SamplePath(
        initial=initial,
        times=np.array(times, dtype=float),
        agents=np.array(agents, dtype=np.int64),
        old=np.array(old, dtype=np.int64),
        new=np.array(new, dtype=np.int64),
        t_end=float(t_end),
        seed=seed,
        n_opinions=network.n_opinions,
    )


def simulate_path(
    network: NetworkModel,
    sigma0,
    t_end: float,
    seed: Optional[int] = None,
) -> SamplePath:
    """One realization on [0, t_end] from the 0-based opinions sigma0."""
    if not t_end > 0:
        raise InvalidParams(f"t_end must be > 0, got {t_end}")
    return _run(network, np.asarray(sigma0), t_end, make_rng(seed), seed)


def _replicate(
    network: NetworkModel, init: InitialCondition, t_end: float, seed: int
) -> SamplePath:
    rng = make_rng(seed)
    sigma0 = sample_initial(init, network.n_agents, network.n_opinions, rng=rng)
    return _run(network, sigma0, t_end, rng, seed)


def run_ensemble(
    network: NetworkModel,
    init: InitialCondition,
    t_end: float,
    replications: int,
    master_seed: int,
    n_jobs: int = 1,
) -> Ensemble:
    """
    `replications` independent paths. Replication k uses the stream derived
    from (master_seed, k) for both its initial draw and its events.
    """
    if replications < 1:
        raise InvalidParams(f"need at least one replication, got {replications}")
    if not t_end > 0:
        raise InvalidParams(f"t_end must be > 0, got {t_end}")

    seeds = [derive_seed(master_seed, k) for k in range(replications)]
    logger.info(
        f"Ensemble: {replications} replications, N={network.n_agents}, "
        f"t_end={t_end}, n_jobs={n_jobs}"
    )
    paths = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(network, init, t_end, seed) for seed in seeds
    )
    logger.info(f"Ensemble done: {sum(p.n_events for p in paths)} events in total")
    return Ensemble(list(paths), master_seed=master_seed)


def count_steps(path: SamplePath, opinion: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Step function of n_j: (jump times starting with 0, value after each jump).

    `opinion` is 0-based.
    """
    base = int(np.count_nonzero(path.initial == opinion))
    delta = (path.new == opinion).astype(np.int64) - (path.old == opinion).astype(np.int64)
    times = np.concatenate([[0.0], path.times])
    values = base + np.concatenate([[0], np.cumsum(delta)])
    return times, values


def path_counts(path: SamplePath, opinion: int, grid) -> np.ndarray:
    """n_j(t) at each grid time (right-continuous; `opinion` is 0-based)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size and (grid.min() < 0 or grid.max() > path.t_end):
        raise GridOutOfRange(
            f"grid spans [{grid.min()}, {grid.max()}], path covers [0, {path.t_end}]"
        )
    times, values = count_steps(path, opinion)
    return values[np.searchsorted(times, grid, side="right") - 1]


def count_trajectory(path: SamplePath, grid) -> np.ndarray:
    """Counts of every opinion at each grid time, shape (T, M)."""
    return np.stack([path_counts(path, j, grid) for j in range(path.n_opinions)], axis=1)
