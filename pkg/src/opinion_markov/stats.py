"""
Estimators over sample paths.

All averages are time-weighted over the piecewise-constant path. Standard
errors come from non-overlapping batch means: the window [burn_in, t_end] is
cut into equal batches, each batch gives one estimate, and the spread of the
pooled batch estimates (across replications too) gives the error.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from opinion_markov.errors import GridOutOfRange, StateSpaceTooLarge, WindowTooShort
from opinion_markov.master import DEFAULT_MAX_STATES, encode_state
from opinion_markov.models import Ensemble, EstimateWithError, NetworkModel, SamplePath
from opinion_markov.ssa import count_steps

logger = logging.getLogger(__name__)

DEFAULT_BATCHES = 20
BURN_IN_RELAXATIONS = 10.0

PathsLike = Union[SamplePath, Ensemble, Sequence[SamplePath]]


def default_burn_in(network: NetworkModel) -> float:
    """10 / min_r(-trace Q^[r]); equals 10 / (q12 + q21) for two opinions."""
    exit_rates = [-float(np.trace(a.entries)) for a in network.agents]
    return BURN_IN_RELAXATIONS / min(exit_rates)


def _paths(paths: PathsLike) -> Sequence[SamplePath]:
    if isinstance(paths, SamplePath):
        return [paths]
    if isinstance(paths, Ensemble):
        return paths.paths
    return list(paths)


def _batch_edges(
    paths: Sequence[SamplePath], burn_in: float, t_end: Optional[float], n_batches: int
) -> np.ndarray:
    horizon = min(p.t_end for p in paths)
    t_end = horizon if t_end is None else t_end
    if t_end > horizon:
        raise GridOutOfRange(f"window end {t_end} beyond the simulated horizon {horizon}")
    if n_batches < 2:
        raise WindowTooShort(f"batch means need at least 2 batches, got {n_batches}")
    if not 0.0 <= burn_in < t_end:
        raise WindowTooShort(f"empty averaging window [{burn_in}, {t_end}]")
    return np.linspace(burn_in, t_end, n_batches + 1)


def _occupancy(
    starts: np.ndarray, values: np.ndarray, t_end: float, edges: np.ndarray, n_bins: int
) -> np.ndarray:
    """Fraction of each batch spent at each value, shape (n_batches, n_bins)."""
    ends = np.append(starts[1:], t_end)
    out = np.empty((edges.size - 1, n_bins))
    for b in range(edges.size - 1):
        lo, hi = edges[b], edges[b + 1]
        overlap = np.clip(np.minimum(ends, hi) - np.maximum(starts, lo), 0.0, None)
        out[b] = np.bincount(values, weights=overlap, minlength=n_bins) / (hi - lo)
    return out


def _count_occupancy(paths: Sequence[SamplePath], opinion: int, edges: np.ndarray) -> np.ndarray:
    """Batch occupancy of n_j over {0..N}, pooled: shape (R * n_batches, N + 1)."""
    n = paths[0].n_agents
    blocks = []
    for path in paths:
        starts, values = count_steps(path, opinion)
        blocks.append(_occupancy(starts, values, path.t_end, edges, n + 1))
    return np.vstack(blocks)


def _estimate(batch_values: np.ndarray, value: float) -> EstimateWithError:
    k = batch_values.size
    return EstimateWithError(float(value), float(batch_values.std(ddof=1) / np.sqrt(k)), int(k))


def ensemble_moments(
    paths: PathsLike,
    opinion: int,
    burn_in: float,
    t_end: Optional[float] = None,
    n_batches: int = DEFAULT_BATCHES,
) -> Tuple[EstimateWithError, EstimateWithError]:
    """
    Time-average mean and variance of n_j/N after burn-in, pooled over
    replications. `opinion` is 0-based.
    """
    paths = _paths(paths)
    edges = _batch_edges(paths, burn_in, t_end, n_batches)
    occupancy = _count_occupancy(paths, opinion, edges)
    share = np.arange(occupancy.shape[1]) / (occupancy.shape[1] - 1)

    batch_means = occupancy @ share
    mean = float(batch_means.mean())
    batch_vars = occupancy @ (share - mean) ** 2
    return _estimate(batch_means, mean), _estimate(batch_vars, batch_vars.mean())


def time_average_moments(
    path: SamplePath,
    opinion: int,
    burn_in: float,
    t_end: Optional[float] = None,
    n_batches: int = DEFAULT_BATCHES,
) -> Tuple[EstimateWithError, EstimateWithError]:
    return ensemble_moments([path], opinion, burn_in, t_end, n_batches)


def empirical_count_distribution(
    paths: PathsLike,
    opinion: int,
    burn_in: float,
    t_end: Optional[float] = None,
    n_batches: int = DEFAULT_BATCHES,
) -> Tuple[np.ndarray, np.ndarray]:
    """Time-weighted law of n_j over {0..N} with per-bin standard errors."""
    paths = _paths(paths)
    edges = _batch_edges(paths, burn_in, t_end, n_batches)
    occupancy = _count_occupancy(paths, opinion, edges)
    p = occupancy.mean(axis=0)
    stderr = occupancy.std(axis=0, ddof=1) / np.sqrt(occupancy.shape[0])
    return p / p.sum(), stderr


def state_steps(path: SamplePath) -> Tuple[np.ndarray, np.ndarray]:
    """Step function of the master state index along the path."""
    m, n = path.n_opinions, path.n_agents
    weights = m ** (n - 1 - path.agents.astype(np.int64))
    deltas = (path.new - path.old) * weights
    code0 = encode_state(path.initial, m)
    return np.concatenate([[0.0], path.times]), code0 + np.concatenate([[0], np.cumsum(deltas)])


def empirical_state_distribution(
    path: SamplePath,
    burn_in: float,
    t_end: Optional[float] = None,
    n_batches: int = DEFAULT_BATCHES,
    max_states: int = DEFAULT_MAX_STATES,
) -> Tuple[np.ndarray, np.ndarray]:
    """Time-weighted occupancy of every master state with batch-means errors."""
    n_states = path.n_opinions**path.n_agents
    if n_states > max_states:
        raise StateSpaceTooLarge(n_states, max_states)
    edges = _batch_edges([path], burn_in, t_end, n_batches)
    starts, codes = state_steps(path)
    occupancy = _occupancy(starts, codes, path.t_end, edges, n_states)
    p = occupancy.mean(axis=0)
    stderr = occupancy.std(axis=0, ddof=1) / np.sqrt(occupancy.shape[0])
    logger.debug(f"State occupancy over {n_states} states from {path.n_events} events")
    return p / p.sum(), stderr
