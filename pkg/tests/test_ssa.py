"""Tests for the event-driven simulator."""

import numpy as np
import pytest

from opinion_markov import lumped, master, ssa, stats
from opinion_markov.errors import GridOutOfRange, InvalidInitialOpinions, InvalidParams
from opinion_markov.models import Graph, IntensitySchedule, NetworkModel, RateMatrix
from opinion_markov.rng import make_rng
from opinion_markov.topology import TopologySpec, generate


def smallworld_network(n_agents: int = 30, n_opinions: int = 3) -> NetworkModel:
    graph = generate(TopologySpec("smallworld", n_agents, k=2, p=0.3, seed=9))
    q = RateMatrix.from_off_diagonal(np.full((n_opinions, n_opinions), 0.7))
    return NetworkModel.homogeneous(graph, q, [2.0, 1.0, 4.0][:n_opinions])


class TestInitialConditions:
    def test_fixed_labels_are_one_based(self):
        sigma = ssa.sample_initial(ssa.InitialCondition.fixed([1, 2, 2]), 3)
        np.testing.assert_array_equal(sigma, [0, 1, 1])

    def test_all(self):
        sigma = ssa.sample_initial(ssa.InitialCondition.all(3), 4, 3)
        np.testing.assert_array_equal(sigma, [2] * 4)

    def test_counts_assigns_exactly_n1(self):
        law = np.zeros(11)
        law[3] = 1.0
        sigma = ssa.sample_initial(ssa.InitialCondition.counts(law), 10, seed=4)
        assert np.count_nonzero(sigma == 0) == 3

    def test_iid_is_seeded(self):
        init = ssa.InitialCondition.iid([0.3, 0.7])
        a = ssa.sample_initial(init, 50, seed=1)
        b = ssa.sample_initial(init, 50, seed=1)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize(
        "init, n_opinions",
        [
            (ssa.InitialCondition.fixed([1, 2]), 2),
            (ssa.InitialCondition.fixed([1, 3, 1]), 2),
            (ssa.InitialCondition.iid([0.2, 0.3, 0.5]), 2),
            (ssa.InitialCondition.counts(np.full(5, 0.2)), 2),
            (ssa.InitialCondition.counts(np.full(4, 0.25)), 3),
            (ssa.InitialCondition.all(3), 2),
        ],
    )
    def test_rejects(self, init, n_opinions):
        with pytest.raises(InvalidInitialOpinions):
            ssa.sample_initial(init, 3, n_opinions)

    def test_unknown_kind(self):
        with pytest.raises(InvalidParams):
            ssa.InitialCondition("random")


class TestSimulator:
    def test_select_walks_the_rate_table(self):
        network = NetworkModel.peer_assembly(2, 1.0, 1.0, 0.0, 0.0)
        sim = ssa.GillespieSimulator(network, np.array([0, 0]), make_rng(0))
        np.testing.assert_allclose(sim.rates, [[0.0, 1.0], [0.0, 1.0]])
        assert sim.select(0.0) == (0, 1)
        assert sim.select(0.99) == (1, 1)

    def test_fire_updates_neighbour_rates(self):
        network = NetworkModel.peer_assembly(3, 1.0, 1.0, 4.0, 4.0)
        sim = ssa.GillespieSimulator(network, np.array([0, 0, 1]), make_rng(0))
        assert sim.rates[2, 0] == pytest.approx(1.0 + 4.0)
        old = sim.fire(1, 1)
        assert old == 0
        assert sim.rates[2, 0] == pytest.approx(1.0 + 2.0)
        assert sim.rates[0, 1] == pytest.approx(1.0 + 4.0)
        assert sim.rate_discrepancy() < 1e-12

    def test_incremental_table_stays_exact(self):
        network = smallworld_network()
        sim = ssa.GillespieSimulator(network, make_rng(3).integers(0, 3, size=30), make_rng(4))
        for _ in range(5000):
            sim.step(np.inf)
        assert sim.n_events == 5000
        assert sim.rate_discrepancy() < 1e-9

    def test_lone_agent_spends_half_its_time_on_each_opinion(self):
        network = NetworkModel.homogeneous(
            Graph.from_edges(1, []), RateMatrix.two_state(1.0, 1.0), (0.0, 0.0)
        )
        path = ssa.simulate_path(network, np.array([0]), 20_000.0, seed=6)
        mean, _ = stats.time_average_moments(path, 0, burn_in=5.0)
        assert abs(mean.value - 0.5) <= 3.0 * mean.std_error

    def test_wrong_initial_size(self):
        network = NetworkModel.peer_assembly(3, 1.0, 1.0, 1.0, 1.0)
        with pytest.raises(InvalidInitialOpinions):
            ssa.GillespieSimulator(network, np.array([0, 1]), make_rng(0))


class TestPaths:
    def test_same_seed_same_path(self):
        network = smallworld_network()
        sigma0 = np.arange(30) % 3
        a = ssa.simulate_path(network, sigma0, 5.0, seed=42)
        b = ssa.simulate_path(network, sigma0, 5.0, seed=42)
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.agents, b.agents)
        np.testing.assert_array_equal(a.new, b.new)

    def test_different_seeds_differ(self):
        network = smallworld_network()
        sigma0 = np.arange(30) % 3
        a = ssa.simulate_path(network, sigma0, 5.0, seed=1)
        b = ssa.simulate_path(network, sigma0, 5.0, seed=2)
        assert a.n_events != b.n_events or not np.array_equal(a.times, b.times)

    def test_events_are_consistent(self):
        network = smallworld_network()
        path = ssa.simulate_path(network, np.zeros(30, dtype=int), 3.0, seed=7)
        assert path.n_events > 0
        assert np.all(np.diff(path.times) > 0)
        assert 0.0 < path.times[0] and path.times[-1] < 3.0
        assert np.all(path.old != path.new)
        sigma = path.initial.copy()
        for agent, old, new in zip(path.agents, path.old, path.new):
            assert sigma[agent] == old
            sigma[agent] = new
        np.testing.assert_array_equal(sigma, path.final_opinions())

    def test_intensities_switch_at_breakpoints(self):
        schedule = IntensitySchedule((0.0, 5.0), ((0.0, 0.0), (100.0, 0.0)))
        q = RateMatrix.two_state(0.01, 0.01)
        network = NetworkModel.homogeneous(Graph.complete(20), q, schedule)
        path = ssa.simulate_path(network, np.arange(20) % 2, 10.0, seed=3)
        assert np.count_nonzero(path.times < 5.0) <= 5
        assert np.all(path.final_opinions() == 0)

    def test_counts_on_grid(self):
        network = smallworld_network(n_opinions=2)
        path = ssa.simulate_path(network, np.zeros(30, dtype=int), 4.0, seed=5)
        grid = np.linspace(0.0, 4.0, 9)
        counts = ssa.count_trajectory(path, grid)
        assert counts.shape == (9, 2)
        np.testing.assert_array_equal(counts.sum(axis=1), 30)
        assert counts[0, 0] == 30
        with pytest.raises(GridOutOfRange):
            ssa.path_counts(path, 0, [5.0])

    def test_invalid_horizon(self):
        with pytest.raises(InvalidParams):
            ssa.simulate_path(smallworld_network(), np.zeros(30, dtype=int), 0.0)


class TestEnsemble:
    def test_seeds_and_order_do_not_depend_on_workers(self):
        network = NetworkModel.peer_assembly(10, 1.0, 1.0, 2.0, 2.0)
        init = ssa.InitialCondition.iid([0.5, 0.5])
        serial = ssa.run_ensemble(network, init, 2.0, 4, master_seed=11, n_jobs=1)
        parallel = ssa.run_ensemble(network, init, 2.0, 4, master_seed=11, n_jobs=2)
        assert serial.seeds == parallel.seeds
        assert len(set(serial.seeds)) == 4
        for a, b in zip(serial.paths, parallel.paths):
            np.testing.assert_array_equal(a.initial, b.initial)
            np.testing.assert_array_equal(a.times, b.times)

    def test_needs_a_replication(self):
        network = NetworkModel.peer_assembly(3, 1.0, 1.0, 1.0, 1.0)
        with pytest.raises(InvalidParams):
            ssa.run_ensemble(network, ssa.InitialCondition.all(1), 1.0, 0, master_seed=1)


@pytest.mark.slow
class TestLongRunAgreement:
    def test_three_agent_occupancy_matches_master_chain(self, three_agent_network):
        pi = master.master_steady_state(master.build_master_generator(three_agent_network))
        path = ssa.simulate_path(three_agent_network, np.array([0, 1, 0]), 20_000.0, seed=2024)
        p, stderr = stats.empirical_state_distribution(path, burn_in=10.0, n_batches=20)
        assert np.all(np.abs(p - pi) <= 3.0 * stderr)

    def test_hundred_agent_variance(self):
        network = NetworkModel.peer_assembly(100, 1.0, 1.0, 10.0, 10.0)
        init = ssa.InitialCondition.iid([0.5, 0.5])
        ensemble = ssa.run_ensemble(network, init, 600.0, 1, master_seed=5)
        mean, var = stats.ensemble_moments(ensemble, 0, burn_in=10.0, n_batches=20)
        assert abs(mean.value - 0.5) <= 3.0 * mean.std_error
        assert abs(var.value - 0.0144) <= 3.0 * var.std_error

    def test_topology_ordering_of_variance(self):
        variances = {}
        for kind in ("empty", "complete", "smallworld", "star"):
            graph = generate(TopologySpec(kind, 100, k=1, p=0.2, seed=17))
            network = NetworkModel.homogeneous(graph, RateMatrix.two_state(1.0, 1.0), (10.0, 10.0))
            init = ssa.InitialCondition.iid([0.5, 0.5])
            ensemble = ssa.run_ensemble(network, init, 800.0, 1, master_seed=8)
            mean, var = stats.ensemble_moments(ensemble, 0, burn_in=10.0, n_batches=20)
            assert abs(mean.value - 0.5) <= max(0.03, 3.0 * mean.std_error)
            variances[kind] = var
        assert variances["star"].value > variances["complete"].value
        assert variances["complete"].value > variances["smallworld"].value
        assert variances["smallworld"].value > variances["empty"].value
        assert abs(variances["empty"].value - 0.0025) <= 3.0 * variances["empty"].std_error

    def test_schedule_switch_matches_the_count_chain(self):
        schedule = IntensitySchedule((0.0, 1.0), ((0.0, 0.0), (20.0, 0.0)))
        network = NetworkModel.homogeneous(Graph.complete(10), RateMatrix.two_state(1, 1), schedule)
        init = ssa.InitialCondition.iid([0.5, 0.5])
        ensemble = ssa.run_ensemble(network, init, 3.0, 400, master_seed=31)
        grid = np.array([0.5, 1.0, 2.0, 3.0])
        shares = np.stack([ssa.path_counts(p, 0, grid) for p in ensemble.paths]) / 10
        mean = shares.mean(axis=0)
        stderr = shares.std(axis=0, ddof=1) / np.sqrt(len(ensemble.paths))

        p0 = lumped.initial_count_distribution("binomial", 10, pi1=0.5)
        exact = lumped.pa_transient_scheduled(10, 1.0, 1.0, schedule, p0, grid)
        expected = exact.probabilities @ np.arange(11) / 10
        assert mean[-1] > 0.8
        assert np.all(np.abs(mean - expected) <= 4.0 * stderr)

    def test_strong_influence_herds_at_consensus(self):
        network = NetworkModel.peer_assembly(20, 1.0, 1.0, 200.0, 200.0)
        init = ssa.InitialCondition.iid([0.5, 0.5])
        ensemble = ssa.run_ensemble(network, init, 100.0, 3, master_seed=12)
        consensus = []
        for path in ensemble.paths:
            p, _ = stats.empirical_count_distribution(path, 0, burn_in=5.0)
            consensus.append(p[0] + p[20])
        assert max(consensus) >= 0.5

    def test_small_assembly_histogram_matches_the_count_chain(self):
        network = NetworkModel.peer_assembly(6, 1.0, 2.0, 3.0, 1.0)
        pbar = lumped.pa_steady_state(lumped.build_pa_chain(6, 1.0, 2.0, 3.0, 1.0))
        init = ssa.InitialCondition.iid([0.5, 0.5])
        ensemble = ssa.run_ensemble(network, init, 3000.0, 4, master_seed=77)
        p, stderr = stats.empirical_count_distribution(ensemble, 0, burn_in=5.0)
        total_variation = 0.5 * np.abs(p - pbar).sum()
        assert total_variation <= 3.0 * 0.5 * stderr.sum()

    def test_star_histogram_is_bimodal(self):
        graph = generate(TopologySpec("star", 100))
        network = NetworkModel.homogeneous(graph, RateMatrix.two_state(1.0, 1.0), (10.0, 10.0))
        path = ssa.simulate_path(network, np.arange(100) % 2, 400.0, seed=3)
        p, _ = stats.empirical_count_distribution(path, 0, burn_in=5.0)
        low, high = int(np.argmax(p[:50])), 51 + int(np.argmax(p[51:]))
        assert low < 25
        assert high > 75
        assert p[40:61].min() < 0.5 * min(p[low], p[high])
