"""
Experiment configuration.

YAML files validated into pydantic models. Opinion and agent labels in
configs are 1-based; conversion to array indices happens in `to_network` and
the runner.
"""

import logging
import os
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from opinion_markov import topology
from opinion_markov.errors import ConfigParseError
from opinion_markov.models import (
    Graph,
    IntensitySchedule,
    NetworkModel,
    RateMatrix,
)
from opinion_markov.rng import derive_seed, make_rng

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "OPINION_MARKOV_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"
GRAPH_STREAM = 2**31  # stream index of the graph seed under the run seed

NonNegative = Annotated[float, Field(ge=0)]
Probability = Annotated[float, Field(ge=0, le=1)]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelBlock(_Block):
    """Stand-alone rates: one shared Q, or one matrix per agent."""
    M: int = Field(2, ge=2)
    Q: Optional[List[List[float]]] = None
    agent_Q: Optional[List[List[List[float]]]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.Q is None) == (self.agent_Q is None):
            raise ValueError("give exactly one of Q or agent_Q")
        for q in [self.Q] if self.Q is not None else self.agent_Q:
            if len(q) != self.M or any(len(row) != self.M for row in q):
                raise ValueError(f"rate matrices must be {self.M}x{self.M}")
        return self


class ScheduleSegment(_Block):
    start: NonNegative
    lambdas: List[NonNegative]


class InfluenceBlock(_Block):
    """Constant intensities or a piecewise-constant schedule."""
    lambdas: Optional[List[NonNegative]] = None
    schedule: Optional[List[ScheduleSegment]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.lambdas is None) == (self.schedule is None):
            raise ValueError("give exactly one of lambdas or schedule")
        return self

    def to_schedule(self) -> IntensitySchedule:
        if self.lambdas is not None:
            return IntensitySchedule.constant(self.lambdas)
        return IntensitySchedule(
            tuple(s.start for s in self.schedule), tuple(tuple(s.lambdas) for s in self.schedule)
        )


class GraphBlock(_Block):
    kind: Literal["empty", "complete", "star", "smallworld", "edges"] = "complete"
    N: Optional[int] = Field(None, ge=1)
    k: int = Field(1, ge=1)
    p: Probability = 0.2
    seed: Optional[int] = Field(None, ge=0)
    edge_list: Optional[str] = None

    @model_validator(mode="after")
    def _source(self):
        if self.kind == "edges":
            if not self.edge_list:
                raise ValueError("kind 'edges' needs edge_list")
            if not Path(self.edge_list).is_file():
                raise ValueError(f"edge list {self.edge_list} does not exist")
        elif self.N is None:
            raise ValueError(f"kind {self.kind!r} needs N")
        return self

    def build(self) -> Graph:
        if self.kind == "edges":
            return topology.read_edge_list(self.edge_list)
        spec = topology.TopologySpec(self.kind, self.N, k=self.k, p=self.p, seed=self.seed)
        return topology.generate(spec)


class InitialBlock(_Block):
    """
    iid/fixed/all act on agents; binomial/uniform/deterministic are laws of
    the opinion-1 count n1 with exchangeable agents.
    """
    kind: Literal["iid", "fixed", "all", "binomial", "uniform", "deterministic"] = "binomial"
    probabilities: Optional[List[Probability]] = None
    opinions: Optional[List[Annotated[int, Field(ge=1)]]] = None
    opinion: int = Field(1, ge=1)
    pi1: Probability = 0.5
    count: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _fields(self):
        if self.kind == "iid" and self.probabilities is None:
            raise ValueError("kind 'iid' needs probabilities")
        if self.kind == "fixed" and self.opinions is None:
            raise ValueError("kind 'fixed' needs opinions")
        return self


class RunBlock(_Block):
    solver: Literal["master", "lumped", "marginal", "pair", "ssa"]
    t_end: float = Field(10.0, gt=0)
    grid: Optional[List[NonNegative]] = None
    grid_points: int = Field(101, ge=2)
    replications: int = Field(1, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    burn_in: Optional[NonNegative] = None
    n_batches: int = Field(20, ge=2)
    n_jobs: int = 1
    sweep: Optional[List[List[NonNegative]]] = None
    max_states: int = Field(2**24, ge=1)
    stationary: bool = True

    @field_validator("grid")
    @classmethod
    def _sorted(cls, v):
        if v is not None and any(b < a for a, b in zip(v, v[1:])):
            raise ValueError("grid must be nondecreasing")
        return v

    @field_validator("sweep")
    @classmethod
    def _pairs(cls, v):
        if v is not None and any(len(pair) != 2 for pair in v):
            raise ValueError("sweep entries are [lambda1, lambda2] pairs")
        return v

    @model_validator(mode="after")
    def _grid_in_range(self):
        if self.grid is not None and self.grid and self.grid[-1] > self.t_end:
            raise ValueError(f"grid ends at {self.grid[-1]}, after t_end={self.t_end}")
        if self.burn_in is not None and self.burn_in >= self.t_end:
            raise ValueError(f"burn_in {self.burn_in} must be below t_end {self.t_end}")
        return self

    def times(self) -> np.ndarray:
        if self.grid is not None:
            return np.asarray(self.grid, dtype=float)
        return np.linspace(0.0, self.t_end, self.grid_points)


class OutputBlock(_Block):
    directory: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    events: bool = False  # write per-replication event logs (ssa)
    generator: bool = False  # write the master generator in coordinate format


class ExperimentConfig(_Block):
    model: ModelBlock
    influence: InfluenceBlock
    graph: GraphBlock
    initial: InitialBlock = InitialBlock()
    run: RunBlock
    output: OutputBlock = OutputBlock()
    derived: Optional[Dict[str, Any]] = None  # written by the resolver, ignored on input

    @model_validator(mode="after")
    def _consistent(self):
        m = self.model.M
        lambda_sets = (
            [self.influence.lambdas]
            if self.influence.lambdas is not None
            else [s.lambdas for s in self.influence.schedule]
        )
        if any(len(lams) != m for lams in lambda_sets):
            raise ValueError(f"every intensity vector needs M={m} entries")
        if self.model.agent_Q is not None and self.graph.N is not None:
            if len(self.model.agent_Q) != self.graph.N:
                raise ValueError(
                    f"agent_Q has {len(self.model.agent_Q)} matrices for N={self.graph.N}"
                )
        if self.initial.probabilities is not None and self.initial.kind == "iid":
            if len(self.initial.probabilities) != m:
                raise ValueError(f"initial.probabilities needs M={m} entries")
        if self.initial.opinions is not None and any(o > m for o in self.initial.opinions):
            raise ValueError(f"initial.opinions must lie in 1..{m}")
        if self.initial.opinion > m:
            raise ValueError(f"initial.opinion must lie in 1..{m}")
        return self

    @property
    def output_dir(self) -> Path:
        return Path(self.output.directory or os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))

    def to_network(self) -> NetworkModel:
        graph = self.graph.build()
        schedule = self.influence.to_schedule()
        if self.model.Q is not None:
            return NetworkModel.homogeneous(graph, RateMatrix(np.array(self.model.Q)), schedule)
        agents = tuple(RateMatrix(np.array(q)) for q in self.model.agent_Q)
        return NetworkModel(graph, agents, schedule)

    def resolved(self) -> "ExperimentConfig":
        """
        Copy with every implicit choice made explicit: run seed, graph seed and
        grid. Derived replication seeds are recorded under `derived`.
        """
        data = self.model_dump()
        run = data["run"]
        if run["seed"] is None:
            run["seed"] = int(make_rng().integers(0, 2**31))
        if data["graph"]["kind"] == "smallworld" and data["graph"]["seed"] is None:
            data["graph"]["seed"] = derive_seed(run["seed"], GRAPH_STREAM) % 2**31
        if run["grid"] is None:
            run["grid"] = [float(t) for t in self.run.times()]
        data["derived"] = {
            "replication_seeds": [derive_seed(run["seed"], k) for k in range(run["replications"])]
        }
        return ExperimentConfig.model_validate(data)

    def to_yaml(self) -> str:
        """YAML echo of the config; the output directory is left out."""
        data = self.model_dump(mode="json", exclude={"output": {"directory"}})
        return yaml.safe_dump(data, sort_keys=False)


def parse_config(data: Union[dict, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigParseError(f"config must be a mapping, got {type(data).__name__}")
    return ExperimentConfig.model_validate(data)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a YAML config. OSError propagates for unreadable files."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigParseError(f"{path}: {e}") from e
    logger.info(f"Loaded config {path}")
    return parse_config(data)
