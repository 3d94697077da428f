"""Tests for the closed marginal and pair dynamics."""

import networkx as nx
import numpy as np
import pytest

from opinion_markov import lumped, marginal, master
from opinion_markov.errors import (
    BiasedIntensities,
    DimensionMismatch,
    HeterogeneousAgents,
    InvalidParams,
)
from opinion_markov.models import (
    Graph,
    IntensitySchedule,
    NetworkModel,
    PairJointState,
    RateMatrix,
)
from opinion_markov.rng import make_rng
from opinion_markov.standalone import stand_alone_stationary


def random_network(n_agents: int, n_opinions: int, seed: int) -> NetworkModel:
    rng = make_rng(seed)
    graph = Graph.from_networkx(nx.gnp_random_graph(n_agents, 0.5, seed=seed))
    q = RateMatrix.from_off_diagonal(rng.uniform(0.5, 2.0, size=(n_opinions, n_opinions)))
    lam = float(rng.uniform(0.5, 3.0))
    return NetworkModel.homogeneous(graph, q, [lam] * n_opinions)


def master_marginals(network: NetworkModel, field: np.ndarray, grid) -> np.ndarray:
    m = network.n_opinions
    pi0 = master.product_distribution(field)
    traj = master.master_transient(master.build_master_generator(network), pi0, grid)
    return np.stack(
        [
            np.stack([master.marginal_of_agent(p, r, m) for r in range(network.n_agents)])
            for p in traj.probabilities
        ]
    )


class TestMarginalClosure:
    GRID = [0.0, 0.25, 0.5, 1.0, 2.0]

    @pytest.mark.parametrize(
        "n_agents, n_opinions, seed", [(4, 2, 0), (5, 3, 1), (6, 2, 2), (3, 3, 3), (6, 3, 4)]
    )
    def test_matches_master_marginals(self, n_agents, n_opinions, seed):
        network = random_network(n_agents, n_opinions, seed)
        field = make_rng(seed + 100).dirichlet(np.ones(n_opinions), size=n_agents)
        traj = marginal.marginal_ode_solve(network, field, self.GRID)
        expected = master_marginals(network, field, self.GRID)
        assert np.abs(traj.fields - expected).max() <= 1e-8

    @pytest.mark.parametrize("n_opinions, seed", [(2, 5), (3, 6)])
    def test_every_agent_converges_to_stand_alone_law(self, n_opinions, seed):
        network = random_network(6, n_opinions, seed)
        field = np.eye(n_opinions)[np.arange(6) % n_opinions]
        traj = marginal.marginal_ode_solve(network, field, [0.0, 100.0])
        target = stand_alone_stationary(network.agents[0])
        np.testing.assert_allclose(traj.fields[-1], np.tile(target, (6, 1)), atol=1e-6)

    def test_follows_unbiased_schedule(self):
        schedule = IntensitySchedule((0.0, 0.7), ((1.0, 1.0), (6.0, 6.0)))
        graph = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        network = NetworkModel.homogeneous(graph, RateMatrix.two_state(1.0, 0.5), schedule)
        field = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
        grid = [0.0, 0.5, 0.7, 1.0, 1.5]
        traj = marginal.marginal_ode_solve(network, field, grid)
        p = master.master_transient_scheduled(network, master.product_distribution(field), grid)
        expected = np.stack(
            [[master.marginal_of_agent(pt, r, 2) for r in range(4)] for pt in p.probabilities]
        )
        assert np.abs(traj.fields - expected).max() <= 1e-8

    def test_isolated_agents_evolve_alone(self):
        graph = Graph.from_edges(2, [])
        network = NetworkModel.homogeneous(graph, RateMatrix.two_state(1.0, 3.0), (9, 9))
        traj = marginal.marginal_ode_solve(network, [[0.0, 1.0], [0.0, 1.0]], [0.5])
        expected = 0.75 * (1.0 - np.exp(-4.0 * 0.5))
        np.testing.assert_allclose(traj.fields[0, :, 0], expected, atol=1e-9)

    def test_lambda_override(self):
        network = NetworkModel.peer_assembly(4, 1.0, 1.0, 5.0, 0.0)
        field = np.tile([0.2, 0.8], (4, 1))
        traj = marginal.marginal_ode_solve(network, field, [0.0, 1.0], lam=5.0)
        assert traj.fields.shape == (2, 4, 2)

    def test_pa_mean_trajectory(self):
        network = NetworkModel.peer_assembly(5, 1.0, 2.0, 4.0, 4.0)
        grid = np.linspace(0.0, 2.0, 5)
        traj = marginal.marginal_ode_solve(network, np.tile([0.1, 0.9], (5, 1)), grid)
        expected = marginal.uipa_mean_trajectory(1.0, 2.0, 0.1, grid)
        np.testing.assert_allclose(traj.fields[:, :, 0].mean(axis=1), expected, atol=1e-9)

    def test_biased_intensities(self):
        network = NetworkModel.peer_assembly(3, 1.0, 1.0, 2.0, 1.0)
        with pytest.raises(BiasedIntensities):
            marginal.marginal_ode_solve(network, np.full((3, 2), 0.5), [1.0])

    def test_heterogeneous_agents(self):
        agents = (RateMatrix.two_state(1.0, 1.0), RateMatrix.two_state(1.0, 2.0))
        network = NetworkModel(Graph.complete(2), agents, IntensitySchedule.constant((1.0, 1.0)))
        with pytest.raises(HeterogeneousAgents):
            marginal.marginal_ode_solve(network, np.full((2, 2), 0.5), [1.0])

    def test_initial_shape(self):
        network = NetworkModel.peer_assembly(3, 1.0, 1.0, 1.0, 1.0)
        with pytest.raises(DimensionMismatch):
            marginal.marginal_ode_solve(network, np.full((2, 2), 0.5), [1.0])


class TestPairDynamics:
    @pytest.mark.parametrize("n_agents", range(2, 9))
    def test_matches_master_pair_joint(self, n_agents):
        rng = make_rng(n_agents)
        q12, q21, lam = rng.uniform(0.3, 3.0, size=3)
        grid = [0.0, 0.3, 1.0, 3.0]
        network = NetworkModel.peer_assembly(n_agents, q12, q21, lam, lam)
        pi0 = master.product_distribution(np.tile([0.3, 0.7], (n_agents, 1)))
        p = master.master_transient(master.build_master_generator(network), pi0, grid)
        start = PairJointState.independent(0.3)
        traj = marginal.pair_joint_ode_solve(n_agents, q12, q21, lam, start, grid)
        joints = np.stack([master.pair_joint(pt, 0, 1, 2) for pt in p.probabilities])
        np.testing.assert_allclose(traj.pi11, joints[:, 0, 0], atol=1e-8)
        np.testing.assert_allclose(traj.pi22, joints[:, 1, 1], atol=1e-8)
        np.testing.assert_allclose(traj.pi12, joints[:, 0, 1], atol=1e-8)

    def test_converges_to_stationary_pair(self):
        traj = marginal.pair_joint_ode_solve(100, 1.0, 1.0, 10.0, PairJointState(1.0, 0.0), [50.0])
        assert traj.pi11[-1] == pytest.approx(109.0 / 416.0, abs=1e-12)
        assert marginal.pair_joint_stationary(100, 1.0, 1.0, 10.0) == pytest.approx(109.0 / 416.0)

    def test_pair_identity_gives_closed_form_variance(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 200))
            q12, q21, lam = rng.uniform(0.1, 10.0, size=3)
            pi1 = lumped.uipa_mean_closed_form(q12, q21)
            pi11 = marginal.pair_joint_stationary(n, q12, q21, lam)
            var = marginal.count_variance_from_pair(n, pi1, pi11)
            closed = lumped.uipa_variance_closed_form(n, q12, q21, lam)
            assert var == pytest.approx(closed, rel=1e-12)

    @pytest.mark.parametrize("args", [(1, 1.0, 1.0, 1.0), (5, 0.0, 1.0, 1.0), (5, 1.0, 1.0, -2.0)])
    def test_invalid(self, args):
        with pytest.raises(InvalidParams):
            marginal.pair_joint_stationary(*args)
