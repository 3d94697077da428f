"""
Presets

Named experiments over the public config surface. A preset expands into one or
more sub-runs; each is an ordinary config dict and lands in its own
subdirectory with its own manifest and resolved config.
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from opinion_markov.config import parse_config
from opinion_markov.errors import UnknownPreset
from opinion_markov.experiment import ExperimentRunner

logger = logging.getLogger(__name__)

SubRun = Tuple[str, Dict[str, Any]]

UNIT_Q = [[-1.0, 1.0], [1.0, -1.0]]
PA_AGENTS = 100
PROMOTION_LAMBDAS = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
TOPOLOGIES = {
    "empty": {"kind": "empty"},
    "complete": {"kind": "complete"},
    "smallworld": {"kind": "smallworld", "k": 1, "p": 0.2},
    "star": {"kind": "star"},
}


def _config(
    solver: str,
    n_agents: int,
    t_end: float,
    seed: int,
    *,
    lambdas: Optional[List[float]] = None,
    schedule: Optional[List[Dict[str, Any]]] = None,
    graph: Optional[Dict[str, Any]] = None,
    initial: Optional[Dict[str, Any]] = None,
    **run: Any,
) -> Dict[str, Any]:
    influence = {"schedule": schedule} if schedule is not None else {"lambdas": lambdas}
    return {
        "model": {"M": 2, "Q": UNIT_Q},
        "influence": influence,
        "graph": {"N": n_agents, **(graph or {"kind": "complete"})},
        "initial": initial or {"kind": "binomial", "pi1": 0.5},
        "run": {"solver": solver, "t_end": t_end, "seed": seed, **run},
    }


def _sweep_config(seed: int, sweep: List[List[float]]) -> Dict[str, Any]:
    return _config("lumped", PA_AGENTS, 1.0, seed, lambdas=sweep[0], sweep=sweep, grid_points=2)


def table1(seed: int) -> List[SubRun]:
    """Stationary moments of the unbiased assembly for lambda in {0, 2, 10}."""
    sweep = [[0.0, 0.0], [2.0, 2.0], [10.0, 10.0]]
    return [("lumped", _sweep_config(seed, sweep))]


def uipa_sim1(seed: int) -> List[SubRun]:
    """Three initial laws crossed with three unbiased intensities, 5 realizations each."""
    initials = {
        "binomial": {"kind": "binomial", "pi1": 0.5},
        "uniform": {"kind": "uniform"},
        "deterministic": {"kind": "deterministic", "count": 0},
    }
    runs = []
    for init_name, initial in initials.items():
        for lam in (0.0, 2.0, 10.0):
            tag = f"{init_name}_lambda{lam:g}"
            common = dict(lambdas=[lam, lam], initial=initial, grid_points=201)
            runs.append((f"{tag}/lumped", _config("lumped", PA_AGENTS, 5.0, seed, **common)))
            ssa_run = _config("ssa", PA_AGENTS, 5.0, seed, replications=5, **common)
            runs.append((f"{tag}/ssa", ssa_run))
    return runs


def uipa_herd(seed: int) -> List[SubRun]:
    """N=20 assembly with growing unbiased influence; one realization each."""
    runs = []
    for lam in (10.0, 20.0, 200.0):
        common = dict(lambdas=[lam, lam], grid_points=1001)
        runs.append((f"lambda{lam:g}/lumped", _config("lumped", 20, 100.0, seed, **common)))
        ssa_run = _config("ssa", 20, 100.0, seed, replications=1, **common)
        runs.append((f"lambda{lam:g}/ssa", ssa_run))
    return runs


def _promotion(seed: int) -> List[SubRun]:
    sweep = [[lam, 0.0] for lam in PROMOTION_LAMBDAS]
    return [("lumped", _sweep_config(seed, sweep))]


def bipa_dist(seed: int) -> List[SubRun]:
    """Stationary laws under unilateral promotion of opinion 1."""
    return _promotion(seed)


def bipa_mv(seed: int) -> List[SubRun]:
    """Mean and variance against lambda1 with lambda2 = 0."""
    return _promotion(seed)


def _stepped(seed: int, schedule: List[Dict[str, Any]]) -> List[SubRun]:
    common = dict(schedule=schedule, grid_points=501, stationary=False)
    return [
        ("lumped", _config("lumped", PA_AGENTS, 10.0, seed, **common)),
        ("ssa", _config("ssa", PA_AGENTS, 10.0, seed, replications=3, **common)),
    ]


def bipa_oprev(seed: int) -> List[SubRun]:
    """lambda1 = 20 while lambda2 climbs 0..40 in five equal steps over [0, 10]."""
    schedule = [{"start": 2.0 * k, "lambdas": [20.0, 10.0 * k]} for k in range(5)]
    return _stepped(seed, schedule)


def bipa_step(seed: int) -> List[SubRun]:
    """Silent, promoted, balanced, then reversed influence on [0,1], [1,4], [4,7], [7,10]."""
    schedule = [
        {"start": 0.0, "lambdas": [0.0, 0.0]},
        {"start": 1.0, "lambdas": [20.0, 0.0]},
        {"start": 4.0, "lambdas": [20.0, 20.0]},
        {"start": 7.0, "lambdas": [16.0, 20.0]},
    ]
    return _stepped(seed, schedule)


def _multitopo(seed: int, lambdas: List[float]) -> List[SubRun]:
    return [
        (
            name,
            _config(
                "ssa",
                PA_AGENTS,
                500.0,
                seed,
                lambdas=lambdas,
                graph=graph,
                replications=10,
                grid_points=501,
                n_batches=20,
            ),
        )
        for name, graph in TOPOLOGIES.items()
    ]


def multitopo_u(seed: int) -> List[SubRun]:
    """Four topologies under unbiased influence lambda = 10."""
    return _multitopo(seed, [10.0, 10.0])


def multitopo_b1(seed: int) -> List[SubRun]:
    """Four topologies under unilateral influence lambda = (1, 0)."""
    return _multitopo(seed, [1.0, 0.0])


PRESETS: Dict[str, Callable[[int], List[SubRun]]] = {
    "table1": table1,
    "uipa-sim1": uipa_sim1,
    "uipa-herd": uipa_herd,
    "bipa-dist": bipa_dist,
    "bipa-mv": bipa_mv,
    "bipa-oprev": bipa_oprev,
    "bipa-step": bipa_step,
    "multitopo-u": multitopo_u,
    "multitopo-b1": multitopo_b1,
}


def expand_preset(name: str, seed: int = 1) -> List[SubRun]:
    if name not in PRESETS:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name](seed)


def run_preset(
    name: str,
    out: Union[str, Path],
    seed: int = 1,
    n_jobs: int = 1,
) -> Dict[str, Dict[str, Any]]:
    """Run every sub-run of a preset under `out/<sub-run>`; returns their summaries."""
    sub_runs = expand_preset(name, seed)
    logger.info(f"Preset {name}: {len(sub_runs)} sub-run(s) into {out}")
    summaries = {}
    for sub_name, data in sub_runs:
        if data["run"]["solver"] == "ssa":
            data["run"]["n_jobs"] = n_jobs
        runner = ExperimentRunner(parse_config(data), Path(out) / sub_name)
        summaries[sub_name] = runner.run()
    return summaries
