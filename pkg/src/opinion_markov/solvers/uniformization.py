"""
Uniformization for CTMC transients.

p(t)' = p(0)' exp(G t) evaluated as a Poisson mixture of powers of the
stochastic kernel P = I + G / Lambda, Lambda = max |g_ii|. Every term is
nonnegative, so the result stays a probability vector, and the Poisson tail
beyond the truncation point bounds the error a priori.
"""

import logging
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

from opinion_markov.errors import DimensionMismatch, InvalidParams

logger = logging.getLogger(__name__)

POISSON_TAIL = 1e-12

Generator = Union[np.ndarray, sp.spmatrix]


def uniformization_rate(generator: Generator) -> float:
    return float(np.abs(generator.diagonal()).max()) if generator.shape[0] else 0.0


def _kernel_transpose(generator: Generator, rate: float) -> sp.csr_matrix:
    g = sp.csr_matrix(generator, dtype=float)
    return (sp.identity(g.shape[0], format="csr") + g / rate).T.tocsr()


def _advance(kernel_t: sp.csr_matrix, p: np.ndarray, mean: float, tail: float) -> np.ndarray:
    """Apply exp(G dt)' to p, with mean = Lambda * dt Poisson jumps."""
    right = int(poisson.isf(tail, mean)) + 1
    left = int(poisson.ppf(tail, mean))
    weights = poisson.pmf(np.arange(right + 1), mean)

    result = np.zeros_like(p)
    v = p
    for k in range(right + 1):
        if k >= left:
            result += weights[k] * v
        if k < right:
            v = kernel_t @ v

    # truncated tails removed mass at both ends; restore unit sum
    return result / result.sum()


def transient(
    generator: Generator,
    p0: np.ndarray,
    times,
    tail: float = POISSON_TAIL,
) -> np.ndarray:
    """
    Distribution at each time in `times` (nondecreasing, >= 0), started from p0 at t=0.

    Returns an array of shape (len(times), n_states).
    """
    n = generator.shape[0]
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (n,):
        raise DimensionMismatch(n, p0.size, "initial distribution")
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise InvalidParams("time grid must be nondecreasing and start at or after 0")

    out = np.empty((times.size, n))
    rate = uniformization_rate(generator)
    if rate == 0.0:
        out[:] = p0
        return out

    kernel_t = _kernel_transpose(generator, rate)
    logger.debug(f"Uniformization: {n} states, rate {rate:.4g}, horizon {times[-1]:.4g}")

    p = p0.copy()
    t_prev = 0.0
    for k, t in enumerate(times):
        if t > t_prev:
            p = _advance(kernel_t, p, rate * (t - t_prev), tail)
            t_prev = t
        out[k] = p
    return out


def transient_piecewise(
    starts: Sequence[float],
    generators: Sequence[Generator],
    p0: np.ndarray,
    times,
    tail: float = POISSON_TAIL,
) -> np.ndarray:
    """
    Transient under a piecewise-constant generator: generators[k] acts from
    starts[k] (starts[0] == 0) until starts[k+1]. Same layout as `transient`.
    """
    times = np.asarray(times, dtype=float)
    n = generators[0].shape[0]
    out = np.empty((times.size, n))
    if times.size == 0:
        return out
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise InvalidParams("time grid must be nondecreasing and start at or after 0")

    p = np.asarray(p0, dtype=float)
    for k, start in enumerate(starts):
        if start > times[-1]:
            break
        end = starts[k + 1] if k + 1 < len(starts) else np.inf
        inside = (times >= start) & (times < end)
        stops = times[inside] - start
        crosses = end <= times[-1]
        if crosses:
            stops = np.append(stops, end - start)
        traj = transient(generators[k], p, stops, tail)
        out[inside] = traj[: int(inside.sum())]
        if crosses:
            p = traj[-1]
    return out
