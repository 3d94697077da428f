"""
Error types.

Every failure the engine reports is an OpinionModelError, so callers (and the
CLI) can catch one class. Subclasses name the violated property and carry the
offending indices or fields.
"""

from typing import Optional, Sequence, Tuple


class OpinionModelError(ValueError):
    """Base class for all validation and numerical errors."""


class InvalidParams(OpinionModelError):
    pass


class NegativeOffDiagonal(OpinionModelError):
    """A rate matrix has a negative off-diagonal entry (not Metzler)."""

    def __init__(self, indices: Sequence[Tuple[int, int]]):
        self.indices = list(indices)
        super().__init__(f"negative off-diagonal rate at (row, col) {self.indices}")


class RowSumNonzero(OpinionModelError):
    """A rate matrix row does not sum to zero."""

    def __init__(self, rows: Sequence[int]):
        self.rows = list(rows)
        super().__init__(f"rows {self.rows} do not sum to zero")


class Reducible(OpinionModelError):
    """The transition graph of a rate matrix is not strongly connected."""

    def __init__(self, components: Sequence[Sequence[int]]):
        self.components = [list(c) for c in components]
        super().__init__(
            f"rate matrix is reducible; strongly connected components: {self.components}"
        )


class WrongOpinionCount(OpinionModelError):
    pass


class StateSpaceTooLarge(OpinionModelError):
    def __init__(self, n_states: int, limit: int):
        self.n_states = n_states
        self.limit = limit
        super().__init__(
            f"master state space has {n_states} states, above the limit of {limit}"
        )


class DimensionMismatch(OpinionModelError):
    def __init__(self, expected: int, got: int, what: str = "vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has dimension {got}, expected {expected}")


class ReducibleGenerator(OpinionModelError):
    def __init__(self, n_components: int):
        self.n_components = n_components
        super().__init__(
            f"master generator is reducible ({n_components} strongly connected components)"
        )


class IndexOutOfRange(OpinionModelError):
    pass


class SameAgent(OpinionModelError):
    pass


class ReducibleChain(OpinionModelError):
    """A birth-death chain has a zero birth or death rate."""

    def __init__(self, births: Sequence[int], deaths: Sequence[int]):
        self.births = list(births)
        self.deaths = list(deaths)
        super().__init__(
            f"birth-death chain is reducible: zero mu at j={self.births}, "
            f"zero nu at j={self.deaths}"
        )


class DegenerateDenominator(OpinionModelError):
    pass


class InvalidQuantile(OpinionModelError):
    pass


class HeterogeneousAgents(OpinionModelError):
    pass


class BiasedIntensities(OpinionModelError):
    pass


class InvalidInitialOpinions(OpinionModelError):
    pass


class NonfiniteRate(OpinionModelError):
    def __init__(self, agent: Optional[int] = None):
        self.agent = agent
        where = f" for agent {agent}" if agent is not None else ""
        super().__init__(f"non-finite transition rate{where}")


class InvalidDistribution(OpinionModelError):
    pass


class GridOutOfRange(OpinionModelError):
    pass


class WindowTooShort(OpinionModelError):
    pass


class UnknownPreset(OpinionModelError):
    pass


class ConfigParseError(OpinionModelError):
    """The config file could not be read as YAML."""
