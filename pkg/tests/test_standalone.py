"""Tests for the isolated-agent analytics."""

import numpy as np
import pytest

from opinion_markov.errors import WrongOpinionCount
from opinion_markov.models import RateMatrix
from opinion_markov.standalone import (
    stand_alone_stationary,
    stand_alone_transient,
    stand_alone_variance,
)


class TestStandAlone:
    def test_two_state_stationary(self):
        pi = stand_alone_stationary(RateMatrix.two_state(1.0, 3.0))
        np.testing.assert_allclose(pi, [0.75, 0.25])

    def test_three_state_stationary_is_left_null_vector(self, rng):
        q = RateMatrix.from_off_diagonal(rng.uniform(0.2, 2.0, size=(3, 3)))
        pi = stand_alone_stationary(q)
        np.testing.assert_allclose(pi @ q.entries, 0.0, atol=1e-12)
        assert pi.sum() == pytest.approx(1.0)

    def test_accepts_plain_arrays(self):
        np.testing.assert_allclose(stand_alone_stationary([[-2.0, 2.0], [2.0, -2.0]]), [0.5, 0.5])

    def test_variance(self):
        assert stand_alone_variance(RateMatrix.two_state(1.0, 1.0)) == pytest.approx(0.25)
        assert stand_alone_variance(RateMatrix.two_state(1.0, 3.0)) == pytest.approx(3.0 / 16.0)

    def test_variance_needs_two_opinions(self):
        with pytest.raises(WrongOpinionCount):
            stand_alone_variance(RateMatrix.from_off_diagonal(np.ones((3, 3))))

    def test_transient_matches_exponential(self):
        q12, q21 = 1.0, 3.0
        grid = np.linspace(0.0, 2.0, 9)
        traj = stand_alone_transient(RateMatrix.two_state(q12, q21), [0.0, 1.0], grid)
        expected = 0.75 * (1.0 - np.exp(-(q12 + q21) * grid))
        np.testing.assert_allclose(traj.probabilities[:, 0], expected, atol=1e-11)
        np.testing.assert_allclose(traj.probabilities.sum(axis=1), 1.0, atol=1e-12)
