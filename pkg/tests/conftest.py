"""Shared fixtures."""

import textwrap

import numpy as np
import pytest

from opinion_markov.models import NetworkModel
from opinion_markov.rng import make_rng


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(20240601)


@pytest.fixture
def three_agent_network() -> NetworkModel:
    """Three binary agents on a complete graph with biased influence."""
    return NetworkModel.peer_assembly(3, q12=1.0, q21=2.0, lambda1=1.0, lambda2=3.0)


@pytest.fixture
def write_config(tmp_path):
    """Write a YAML config body into tmp_path and return its path."""

    def _write(body: str, name: str = "config.yaml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(body), encoding="utf-8")
        return path

    return _write
