"""
Interaction graph generators: empty, complete, star and Watts-Strogatz small world.

Small-world graphs start from a ring lattice where every node is joined to its
k nearest neighbours on each side (degree 2k), then each lattice edge is
rewired with probability p to a uniformly drawn target, redrawing targets that
would create a self-loop or a duplicate edge. Rewiring keeps the edge count.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import networkx as nx
import numpy as np

from opinion_markov.errors import InvalidParams
from opinion_markov.models import Graph
from opinion_markov.rng import make_rng

logger = logging.getLogger(__name__)

KINDS = ("empty", "complete", "star", "smallworld")


@dataclass(frozen=True)
class TopologySpec:
    kind: str
    n_nodes: int
    k: int = 1  # ring half-degree
    p: float = 0.2  # rewiring probability
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParams(f"unknown topology {self.kind!r}; expected one of {KINDS}")
        if self.n_nodes < 1:
            raise InvalidParams(f"N must be >= 1, got {self.n_nodes}")
        if self.kind == "smallworld":
            if not (1 <= self.k and 2 * self.k < self.n_nodes):
                raise InvalidParams(
                    f"smallworld needs 1 <= k < N/2, got k={self.k}, N={self.n_nodes}"
                )
            if not (0.0 <= self.p <= 1.0):
                raise InvalidParams(f"smallworld needs 0 <= p <= 1, got p={self.p}")

    @classmethod
    def parse(cls, text: str) -> "TopologySpec":
        """Parse 'kind:N=100,k=1,p=0.2,seed=7' (only N is required)."""
        kind, _, params = text.partition(":")
        values = {}
        for item in filter(None, params.split(",")):
            key, sep, value = item.partition("=")
            if not sep:
                raise InvalidParams(f"expected key=value in topology spec, got {item!r}")
            values[key.strip()] = value.strip()
        unknown = set(values) - {"N", "k", "p", "seed"}
        if unknown:
            raise InvalidParams(f"unknown topology parameters {sorted(unknown)}")
        if "N" not in values:
            raise InvalidParams("topology spec needs N")
        return cls(
            kind=kind.strip(),
            n_nodes=int(values["N"]),
            k=int(values.get("k", 1)),
            p=float(values.get("p", 0.2)),
            seed=int(values["seed"]) if "seed" in values else None,
        )


def generate(spec: TopologySpec) -> Graph:
    n = spec.n_nodes
    if spec.kind == "empty":
        g = nx.empty_graph(n)
    elif spec.kind == "complete":
        g = nx.complete_graph(n)
    elif spec.kind == "star":
        # node 0 is the hub
        g = nx.star_graph(n - 1) if n > 1 else nx.empty_graph(1)
    else:
        # networkx takes the full lattice degree; same PRNG family as the simulator
        g = nx.watts_strogatz_graph(n, 2 * spec.k, spec.p, seed=make_rng(spec.seed))

    graph = Graph.from_networkx(g)
    if spec.kind == "smallworld":
        logger.info(
            f"Small world N={n} k={spec.k} p={spec.p} seed={spec.seed}: "
            f"{graph.n_edges} edges, connected={graph.is_connected()}"
        )
    return graph


def write_edge_list(graph: Graph, path: Union[str, Path]) -> None:
    """First line N, then one 1-based 'u v' line per edge."""
    lines = [str(graph.n_nodes)] + [f"{u + 1} {v + 1}" for u, v in graph.edges]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_edge_list(path: Union[str, Path]) -> Graph:
    with open(path, "r", encoding="utf-8") as f:
        rows = [line.split() for line in f if line.strip()]
    if not rows or len(rows[0]) != 1:
        raise InvalidParams(f"{path}: first line must hold the node count")
    n = int(rows[0][0])
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise InvalidParams(f"{path}:{lineno}: expected 'u v', got {' '.join(row)!r}")
        edges.append((int(row[0]) - 1, int(row[1]) - 1))
    return Graph.from_edges(n, edges)


def degree_summary(graph: Graph) -> dict:
    d = graph.degrees
    return {
        "nodes": graph.n_nodes,
        "edges": graph.n_edges,
        "min_degree": int(d.min()),
        "max_degree": int(d.max()),
        "mean_degree": float(np.mean(d)),
    }
