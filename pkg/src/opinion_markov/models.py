"""
Data models for the engine.

The domain types shared by the exact solvers and the simulator. Arrays are
0-based: agent r of a config file is row r-1 and opinion j is column j-1.
"""

import itertools
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from opinion_markov.errors import (
    DimensionMismatch,
    InvalidDistribution,
    InvalidParams,
    NegativeOffDiagonal,
    Reducible,
    RowSumNonzero,
)

ROW_SUM_RTOL = 1e-12
PROBABILITY_TOL = 1e-12


def validate_rate_matrix(entries) -> np.ndarray:
    """
    Check that `entries` is a CTMC generator: Metzler, zero row sums, irreducible.

    Returns a float copy. Raises NegativeOffDiagonal, RowSumNonzero or Reducible
    with 1-based indices of the offending entries.
    """
    q = np.array(entries, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InvalidParams(f"rate matrix must be square, got shape {q.shape}")
    if q.shape[0] < 2:
        raise InvalidParams(f"at least M=2 opinions are required, got M={q.shape[0]}")
    if not np.all(np.isfinite(q)):
        raise InvalidParams("rate matrix has non-finite entries")

    off = ~np.eye(q.shape[0], dtype=bool)
    negative = np.argwhere((q < 0) & off)
    if len(negative):
        raise NegativeOffDiagonal([(int(i) + 1, int(j) + 1) for i, j in negative])

    scale = np.abs(q).max()
    bad_rows = np.flatnonzero(np.abs(q.sum(axis=1)) > ROW_SUM_RTOL * scale)
    if bad_rows.size:
        raise RowSumNonzero([int(r) + 1 for r in bad_rows])

    # "nonzero" is exact: rates are inputs, never computed
    support = sp.csr_matrix((q != 0) & off)
    n_components, labels = connected_components(support, directed=True, connection="strong")
    if n_components > 1:
        raise Reducible(
            [(np.flatnonzero(labels == c) + 1).tolist() for c in range(n_components)]
        )
    return q


def as_probability_vector(values, tol: float = 1e-8) -> np.ndarray:
    """Validate and renormalize a probability vector (nonnegative, unit sum)."""
    p = np.array(values, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistribution(f"expected a non-empty 1-d vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < -PROBABILITY_TOL):
        raise InvalidDistribution("probabilities must be finite and nonnegative")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise InvalidDistribution(f"probabilities sum to {total}, not 1")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


@dataclass(frozen=True)
class OpinionSpace:
    """The finite opinion set {1, ..., M}."""
    M: int

    def __post_init__(self):
        if self.M < 2:
            raise InvalidParams(f"an opinion space needs M >= 2, got {self.M}")


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Stand-alone transition rate matrix Q of one agent (validated on construction)."""
    entries: np.ndarray

    def __post_init__(self):
        q = validate_rate_matrix(self.entries)
        q.setflags(write=False)
        object.__setattr__(self, "entries", q)

    @classmethod
    def two_state(cls, q12: float, q21: float) -> "RateMatrix":
        return cls(np.array([[-q12, q12], [q21, -q21]], dtype=float))

    @classmethod
    def from_off_diagonal(cls, rates) -> "RateMatrix":
        """Build Q from its off-diagonal rates; the diagonal is ignored and refilled."""
        q = np.array(rates, dtype=float)
        np.fill_diagonal(q, 0.0)
        np.fill_diagonal(q, -q.sum(axis=1))
        return cls(q)

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def opinion_space(self) -> OpinionSpace:
        return OpinionSpace(self.M)

    @property
    def off_diagonal(self) -> np.ndarray:
        q = self.entries.copy()
        np.fill_diagonal(q, 0.0)
        return q

    def same_as(self, other: "RateMatrix") -> bool:
        return np.array_equal(self.entries, other.entries)


@dataclass(frozen=True)
class InfluenceIntensities:
    """Per-opinion influence intensities lambda_j (1/time)."""
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) < 2:
            raise InvalidParams(f"need one intensity per opinion (M >= 2), got {len(values)}")
        for j, v in enumerate(values):
            if not np.isfinite(v) or v < 0:
                raise InvalidParams(f"lambda_{j + 1} must be finite and >= 0, got {v}")
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, lam: float, M: int) -> "InfluenceIntensities":
        return cls(tuple([lam] * M))

    @property
    def M(self) -> int:
        return len(self.values)

    @property
    def is_unbiased(self) -> bool:
        return len(set(self.values)) == 1

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class IntensitySchedule:
    """
    Piecewise-constant, right-continuous lambda(t).

    `starts[k]` is the time segment k begins; the first segment starts at 0 and
    the last one runs forever.
    """
    starts: Tuple[float, ...]
    segments: Tuple[InfluenceIntensities, ...]

    def __post_init__(self):
        starts = tuple(float(s) for s in self.starts)
        segments = tuple(
            s if isinstance(s, InfluenceIntensities) else InfluenceIntensities(tuple(s))
            for s in self.segments
        )
        if len(starts) != len(segments) or not starts:
            raise InvalidParams("a schedule needs one start time per segment")
        if starts[0] != 0.0:
            raise InvalidParams(f"the first segment must start at t=0, got {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise InvalidParams(f"segment start times must be strictly increasing: {starts}")
        if len({s.M for s in segments}) != 1:
            raise InvalidParams("all schedule segments must have the same number of opinions")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "segments", segments)

    @classmethod
    def constant(cls, lambdas: Union[InfluenceIntensities, Sequence[float]]) -> "IntensitySchedule":
        if not isinstance(lambdas, InfluenceIntensities):
            lambdas = InfluenceIntensities(tuple(lambdas))
        return cls((0.0,), (lambdas,))

    @property
    def M(self) -> int:
        return self.segments[0].M

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self.starts[1:]

    @property
    def is_constant(self) -> bool:
        return len(self.segments) == 1

    def index_at(self, t: float) -> int:
        # side="right": a lookup exactly at a breakpoint returns the new segment
        return int(np.searchsorted(self.starts, t, side="right")) - 1

    def at(self, t: float) -> InfluenceIntensities:
        if t < 0:
            raise InvalidParams(f"schedule lookup at negative time {t}")
        return self.segments[self.index_at(t)]

    def next_breakpoint(self, t: float) -> float:
        """First breakpoint strictly after t (inf if none)."""
        k = self.index_at(t) + 1
        return self.starts[k] if k < len(self.starts) else float("inf")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple interaction graph on nodes 0..n_nodes-1."""
    n_nodes: int
    edges: Tuple[Tuple[int, int], ...]
    neighbors: Tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise InvalidParams(f"a graph needs at least one node, got {self.n_nodes}")
        normalized = []
        seen = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise InvalidParams(f"self-loop at node {u}")
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise InvalidParams(f"edge ({u}, {v}) outside nodes 0..{self.n_nodes - 1}")
            edge = (min(u, v), max(u, v))
            if edge in seen:
                raise InvalidParams(f"duplicate edge {edge}")
            seen.add(edge)
            normalized.append(edge)
        normalized.sort()
        object.__setattr__(self, "edges", tuple(normalized))

        adjacency: List[List[int]] = [[] for _ in range(self.n_nodes)]
        for u, v in normalized:
            adjacency[u].append(v)
            adjacency[v].append(u)
        neighbors = tuple(np.array(sorted(a), dtype=np.int64) for a in adjacency)
        object.__setattr__(self, "neighbors", neighbors)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[Tuple[int, int]]) -> "Graph":
        return cls(n_nodes, tuple(edges))

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> "Graph":
        nodes = sorted(g.nodes())
        if nodes != list(range(len(nodes))):
            g = nx.convert_node_labels_to_integers(g, ordering="sorted")
        return cls(g.number_of_nodes(), tuple(g.edges()))

    @classmethod
    def complete(cls, n_nodes: int) -> "Graph":
        return cls(n_nodes, tuple(itertools.combinations(range(n_nodes), 2)))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors], dtype=np.int64)

    def adjacency(self) -> sp.csr_matrix:
        if not self.edges:
            return sp.csr_matrix((self.n_nodes, self.n_nodes))
        u, v = np.array(self.edges, dtype=np.int64).T
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(rows.size)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_nodes, self.n_nodes))

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges)
        return g

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Graph, per-agent stand-alone rate matrices and the influence schedule."""
    graph: Graph
    agents: Tuple[RateMatrix, ...]
    schedule: IntensitySchedule

    def __post_init__(self):
        agents = tuple(self.agents)
        if len(agents) != self.graph.n_nodes:
            raise InvalidParams(
                f"{len(agents)} rate matrices for a graph with {self.graph.n_nodes} nodes"
            )
        sizes = {a.M for a in agents}
        if len(sizes) != 1:
            raise InvalidParams(f"agents disagree on the number of opinions: {sorted(sizes)}")
        if self.schedule.M != agents[0].M:
            raise InvalidParams(
                f"schedule has {self.schedule.M} intensities, agents have M={agents[0].M}"
            )
        object.__setattr__(self, "agents", agents)

    @classmethod
    def homogeneous(
        cls,
        graph: Graph,
        Q: RateMatrix,
        lambdas: Union[IntensitySchedule, InfluenceIntensities, Sequence[float]],
    ) -> "NetworkModel":
        if isinstance(lambdas, IntensitySchedule):
            schedule = lambdas
        else:
            schedule = IntensitySchedule.constant(lambdas)
        return cls(graph, tuple([Q] * graph.n_nodes), schedule)

    @classmethod
    def peer_assembly(
        cls, n_agents: int, q12: float, q21: float, lambda1: float, lambda2: float
    ) -> "NetworkModel":
        return cls.homogeneous(
            Graph.complete(n_agents), RateMatrix.two_state(q12, q21), (lambda1, lambda2)
        )

    @property
    def n_agents(self) -> int:
        return self.graph.n_nodes

    @property
    def n_opinions(self) -> int:
        return self.agents[0].M

    @property
    def identical_agents(self) -> bool:
        first = self.agents[0]
        return all(a is first or a.same_as(first) for a in self.agents[1:])

    def intensities_at(self, t: float = 0.0) -> InfluenceIntensities:
        return self.schedule.at(t)

    def rate_tensor(self) -> np.ndarray:
        """Stacked stand-alone generators, shape (N, M, M)."""
        return np.stack([a.entries for a in self.agents])


@dataclass
class ProbabilityTrajectory:
    """Probability vectors on a time grid (one row per grid point)."""
    times: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        if self.probabilities.shape[0] != len(self.times):
            raise DimensionMismatch(len(self.times), self.probabilities.shape[0], "trajectory")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.probabilities[-1]


@dataclass(frozen=True, eq=False)
class MasterGenerator:
    """Sparse M^N x M^N rate operator of the master chain (Q0, A0 or Q0+A0)."""
    matrix: sp.csr_matrix
    n_opinions: int
    n_agents: int

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __add__(self, other: "MasterGenerator") -> "MasterGenerator":
        if (self.n_opinions, self.n_agents) != (other.n_opinions, other.n_agents):
            raise DimensionMismatch(self.n_states, other.n_states, "generator")
        return MasterGenerator((self.matrix + other.matrix).tocsr(), self.n_opinions, self.n_agents)


@dataclass(frozen=True, eq=False)
class BirthDeathChain:
    """
    Lumped Peer Assembly chain on {0..N}.

    mu[j-1] is the birth rate j-1 -> j (j = 1..N); nu[j] is the death rate
    j+1 -> j (j = 0..N-1).
    """
    n_agents: int
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        if mu.shape != (self.n_agents,) or nu.shape != (self.n_agents,):
            raise DimensionMismatch(self.n_agents, max(mu.size, nu.size), "rate array")
        if np.any(mu < 0) or np.any(nu < 0):
            raise InvalidParams("birth and death rates must be nonnegative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    @property
    def n_states(self) -> int:
        return self.n_agents + 1

    @property
    def is_irreducible(self) -> bool:
        return bool(np.all(self.mu > 0) and np.all(self.nu > 0))

    def generator(self) -> sp.csr_matrix:
        """Tridiagonal Psi: births on the upper diagonal, deaths on the lower."""
        diagonal = np.zeros(self.n_states)
        diagonal[:-1] -= self.mu
        diagonal[1:] -= self.nu
        return sp.diags([self.nu, diagonal, self.mu], [-1, 0, 1], format="csr")


@dataclass(frozen=True)
class PairJointState:
    """Joint law of a representative agent pair; pi12 = pi21 by exchangeability."""
    pi11: float
    pi22: float

    def __post_init__(self):
        if self.pi11 < -PROBABILITY_TOL or self.pi22 < -PROBABILITY_TOL:
            raise InvalidDistribution(f"pair probabilities must be >= 0: {self.pi11}, {self.pi22}")
        if self.pi11 + self.pi22 > 1 + PROBABILITY_TOL:
            raise InvalidDistribution(f"pi11 + pi22 = {self.pi11 + self.pi22} exceeds 1")

    @property
    def pi12(self) -> float:
        return 0.5 * (1.0 - self.pi11 - self.pi22)

    @classmethod
    def independent(cls, pi1: float) -> "PairJointState":
        return cls(pi1 * pi1, (1.0 - pi1) * (1.0 - pi1))


@dataclass
class MarginalTrajectory:
    """Per-agent marginals on a grid, shape (T, N, M)."""
    times: np.ndarray
    fields: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class PairJointTrajectory:
    times: np.ndarray
    pi11: np.ndarray
    pi22: np.ndarray

    @property
    def pi12(self) -> np.ndarray:
        return 0.5 * (1.0 - self.pi11 - self.pi22)


@dataclass
class SamplePath:
    """An SSA realization: initial opinions plus the ordered event list."""
    initial: np.ndarray  # opinion index per agent
    times: np.ndarray
    agents: np.ndarray
    old: np.ndarray
    new: np.ndarray
    t_end: float
    seed: Optional[int]
    n_opinions: int

    @property
    def n_agents(self) -> int:
        return len(self.initial)

    @property
    def n_events(self) -> int:
        return len(self.times)

    def final_opinions(self) -> np.ndarray:
        opinions = self.initial.copy()
        if self.n_events:
            # the last event touching an agent fixes its final opinion
            last = {}
            for k, a in enumerate(self.agents):
                last[int(a)] = k
            for a, k in last.items():
                opinions[a] = self.new[k]
        return opinions


@dataclass
class Ensemble:
    """Replicated sample paths sharing one network."""
    paths: List[SamplePath]
    master_seed: Optional[int] = None

    def __post_init__(self):
        if not self.paths:
            raise InvalidParams("an ensemble needs at least one replication")
        seeds = [p.seed for p in self.paths if p.seed is not None]
        if len(set(seeds)) != len(seeds):
            raise InvalidParams("replication seeds must be distinct")

    @property
    def seeds(self) -> List[Optional[int]]:
        return [p.seed for p in self.paths]

    def __len__(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class EstimateWithError:
    """A Monte Carlo estimate with its batch-means standard error."""
    value: float
    std_error: float
    n: int  # number of batches behind the error estimate

    def __post_init__(self):
        if self.std_error < 0:
            raise InvalidParams(f"standard error must be >= 0, got {self.std_error}")
