"""
Experiment Runner

Resolves a config, builds the network, dispatches to the named solver and
writes the run directory (aka orchestrator).
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import comb

from opinion_markov import lumped, marginal, master, ssa, stats
from opinion_markov.config import ExperimentConfig
from opinion_markov.errors import BiasedIntensities, InvalidParams
from opinion_markov.models import (
    MarginalTrajectory,
    NetworkModel,
    PairJointState,
    ProbabilityTrajectory,
)
from opinion_markov.outputs import (
    ArtifactWriter,
    count_trajectory_frame,
    count_transient_frame,
    distribution_frame,
    events_frame,
    histogram_frame,
    marginal_frame,
    moments_frame,
    pair_frame,
    stationary_marginal_frame,
)

logger = logging.getLogger(__name__)

COUNT_LAWS = ("binomial", "uniform", "deterministic")


def _exact(statistic: str, value: float) -> Dict[str, Any]:
    return {"statistic": statistic, "value": float(value), "std_error": 0.0, "n": 0}


def peer_assembly_rates(network: NetworkModel) -> Tuple[float, float]:
    """(q12, q21) if the network is a Peer Assembly, else InvalidParams."""
    n = network.n_agents
    if network.n_opinions != 2:
        raise InvalidParams(f"the Peer Assembly has two opinions, got M={network.n_opinions}")
    if n < 2 or network.graph.n_edges != n * (n - 1) // 2:
        raise InvalidParams("the Peer Assembly needs a complete graph on N >= 2 agents")
    if not network.identical_agents:
        raise InvalidParams("the Peer Assembly needs identical agents")
    q = network.agents[0].entries
    return float(q[0, 1]), float(q[1, 0])


def pair_intensity(network: NetworkModel) -> float:
    """The common lambda of a Peer Assembly with constant unbiased influence."""
    if not network.schedule.is_constant:
        raise InvalidParams("pair dynamics need constant intensities")
    lambdas = network.schedule.segments[0]
    if not lambdas.is_unbiased:
        raise BiasedIntensities(f"pair dynamics need lambda1 = lambda2, got {lambdas.values}")
    return lambdas.values[0]


def check_preconditions(config: ExperimentConfig) -> NetworkModel:
    """
    Build the network and apply what the configured solver requires of it,
    without solving anything. Raises the same errors a run would.
    """
    network = config.to_network()
    solver = config.run.solver
    if config.initial.kind in COUNT_LAWS and network.n_opinions != 2:
        raise InvalidParams(f"count laws need M=2, got M={network.n_opinions}")
    if solver == "master":
        master.check_state_space(network.n_agents, network.n_opinions, config.run.max_states)
    elif solver == "marginal":
        marginal.closure_schedule(network)
    elif solver in ("lumped", "pair"):
        peer_assembly_rates(network)
    if solver == "pair":
        pair_intensity(network)
        if config.initial.kind == "fixed":
            raise InvalidParams(
                "pair dynamics need an exchangeable initial law, not fixed ones"
            )
    return network


class ExperimentRunner:
    """Wires a config to the solvers and the artifact writer."""

    def __init__(self, config: ExperimentConfig, directory: Optional[Union[str, Path]] = None):
        self.config = config.resolved()
        self.directory = Path(directory) if directory is not None else self.config.output_dir

        # Configure logging - suppress noisy joblib worker logs
        logging.basicConfig(
            level=logging.INFO,
            format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
            datefmt="%H:%M:%S",
        )
        logging.getLogger("joblib").setLevel(logging.WARNING)

    def run(self) -> Dict[str, Any]:
        """Run the configured solver; returns the summary also written to the manifest."""
        cfg = self.config
        logger.info(f"Starting {cfg.run.solver} run into {self.directory}")
        network = check_preconditions(cfg)
        logger.info(
            f"Network: N={network.n_agents}, M={network.n_opinions}, "
            f"{network.graph.n_edges} edges, {len(network.schedule.segments)} intensity segment(s)"
        )

        writer = ArtifactWriter(self.directory, cfg.output.format)
        handlers = {
            "master": self._run_master,
            "lumped": self._run_lumped,
            "marginal": self._run_marginal,
            "pair": self._run_pair,
            "ssa": self._run_ssa,
        }
        summary = {
            "solver": cfg.run.solver,
            "n_agents": network.n_agents,
            "n_opinions": network.n_opinions,
            **handlers[cfg.run.solver](network, writer),
        }
        writer.finish(cfg.to_yaml(), summary)
        logger.info(f"Finished {cfg.run.solver} run: {len(writer.artifacts)} artifacts")
        return summary

    # --- initial conditions ---

    def _count_law(self, n: int) -> np.ndarray:
        init = self.config.initial
        if init.kind in COUNT_LAWS:
            return lumped.initial_count_distribution(init.kind, n, pi1=init.pi1, count=init.count)
        if init.kind == "iid":
            return lumped.initial_count_distribution("binomial", n, pi1=init.probabilities[0])
        if init.kind == "all":
            count = n if init.opinion == 1 else 0
            return lumped.initial_count_distribution("deterministic", n, count=count)
        ones = sum(1 for o in init.opinions if o == 1)
        return lumped.initial_count_distribution("deterministic", n, count=ones)

    def _agent_initial(self, network: NetworkModel) -> ssa.InitialCondition:
        init = self.config.initial
        if init.kind == "iid":
            return ssa.InitialCondition.iid(init.probabilities)
        if init.kind == "fixed":
            return ssa.InitialCondition.fixed(init.opinions)
        if init.kind == "all":
            return ssa.InitialCondition.all(init.opinion)
        if network.n_opinions != 2:
            raise InvalidParams(f"count laws need M=2, got M={network.n_opinions}")
        if init.kind == "binomial":
            return ssa.InitialCondition.iid([init.pi1, 1.0 - init.pi1])
        return ssa.InitialCondition.counts(self._count_law(network.n_agents))

    def _master_initial(self, network: NetworkModel) -> np.ndarray:
        n, m = network.n_agents, network.n_opinions
        init = self.config.initial
        if init.kind == "iid":
            return master.product_distribution(np.tile(init.probabilities, (n, 1)))
        if init.kind in ("fixed", "all"):
            sigma = ssa.sample_initial(self._agent_initial(network), n, m)
            p = np.zeros(m**n)
            p[master.encode_state(sigma, m)] = 1.0
            return p
        if m != 2:
            raise InvalidParams(f"count laws need M=2, got M={m}")
        # exchangeable: the mass of count c is spread evenly over its states
        law = self._count_law(n)
        counts = (master.state_digits(n, m) == 0).sum(axis=1)
        return law[counts] / comb(n, counts)

    def _marginal_initial(self, network: NetworkModel) -> np.ndarray:
        n, m = network.n_agents, network.n_opinions
        init = self.config.initial
        if init.kind == "iid":
            return np.tile(np.asarray(init.probabilities, dtype=float), (n, 1))
        if init.kind in ("fixed", "all"):
            sigma = ssa.sample_initial(self._agent_initial(network), n, m)
            return np.eye(m)[sigma]
        law = self._count_law(n)
        pi1 = float(np.arange(n + 1) @ law) / n
        return np.tile([pi1, 1.0 - pi1], (n, 1))

    def _pair_initial(self, n: int) -> PairJointState:
        init = self.config.initial
        if init.kind == "fixed":
            raise InvalidParams("pair dynamics need an exchangeable initial law, not fixed ones")
        if init.kind == "iid":
            return PairJointState.independent(init.probabilities[0])
        law = self._count_law(n)
        c = np.arange(n + 1)
        pairs = n * (n - 1)
        return PairJointState(
            float((c * (c - 1)) @ law) / pairs,
            float(((n - c) * (n - c - 1)) @ law) / pairs,
        )

    # --- solvers ---

    def _run_master(self, network: NetworkModel, writer: ArtifactWriter) -> Dict[str, Any]:
        cfg = self.config
        n, m = network.n_agents, network.n_opinions
        times = cfg.run.times()
        traj = master.master_transient_scheduled(
            network, self._master_initial(network), times, cfg.run.max_states
        )
        fields = np.stack(
            [
                np.stack([master.marginal_of_agent(p, r, m) for r in range(n)])
                for p in traj.probabilities
            ]
        )
        writer.table(
            "marginals",
            marginal_frame(MarginalTrajectory(times, fields)),
            "Per-agent opinion marginals of the master chain",
        )
        counts = np.stack([master.count_distribution(p, 0, m) for p in traj.probabilities])
        writer.table(
            "counts",
            count_transient_frame(ProbabilityTrajectory(times, counts)),
            "Law of n1 over time from the master chain",
        )

        summary: Dict[str, Any] = {}
        if cfg.output.generator or (cfg.run.stationary and network.schedule.is_constant):
            gen = master.build_master_generator(network, max_states=cfg.run.max_states)
            if cfg.output.generator:
                path = writer.directory / "generator.coo"
                master.write_generator_coo(gen, path)
                writer.file(path, "Master generator, header 'n_states nnz' then 'row col value'")
        if cfg.run.stationary and network.schedule.is_constant:
            pi = master.master_steady_state(gen)
            stationary_counts = master.count_distribution(pi, 0, m)
            writer.table(
                "stationary_counts", distribution_frame(stationary_counts), "Stationary law of n1"
            )
            marg = np.stack([master.marginal_of_agent(pi, r, m) for r in range(n)])
            writer.table(
                "stationary_marginals",
                stationary_marginal_frame(marg),
                "Stationary per-agent marginals",
            )
            mean, var = lumped.pa_moments(stationary_counts)
            writer.table(
                "moments",
                moments_frame([_exact("mean_n1", mean), _exact("var_n1", var)]),
                "Stationary mean and variance of n1/N",
            )
            summary.update({"mean": mean, "var": var})
        return summary

    def _run_lumped(self, network: NetworkModel, writer: ArtifactWriter) -> Dict[str, Any]:
        cfg = self.config
        n = network.n_agents
        q12, q21 = peer_assembly_rates(network)
        times = cfg.run.times()
        traj = lumped.pa_transient_scheduled(
            n, q12, q21, network.schedule, self._count_law(n), times
        )
        writer.table("transient", count_transient_frame(traj), "Law of n1 over time")
        writer.table(
            "bands", lumped.transient_bands(traj), "Mean of n1/N with 2.5/97.5 percentiles"
        )

        summary: Dict[str, Any] = {}
        if cfg.run.stationary and network.schedule.is_constant:
            lambda1, lambda2 = network.schedule.segments[0].values
            pbar = lumped.pa_steady_state(lumped.build_pa_chain(n, q12, q21, lambda1, lambda2))
            writer.table("stationary", distribution_frame(pbar), "Stationary law of n1")
            mean, var = lumped.pa_moments(pbar)
            rows = [_exact("mean_n1", mean), _exact("var_n1", var)]
            if lambda1 == lambda2:
                rows.append(_exact("mean_n1_closed_form", lumped.uipa_mean_closed_form(q12, q21)))
                var_closed = lumped.uipa_variance_closed_form(n, q12, q21, lambda1)
                rows.append(_exact("var_n1_closed_form", var_closed))
            writer.table("moments", moments_frame(rows), "Stationary mean and variance of n1/N")
            summary.update({"mean": mean, "var": var})

        if cfg.run.sweep:
            sweep = lumped.moment_sweep(n, q12, q21, cfg.run.sweep)
            writer.table(
                "sweep", sweep, "Stationary moments and percentile band per intensity pair"
            )
            frames = []
            for lambda1, lambda2 in cfg.run.sweep:
                frame = distribution_frame(
                    lumped.pa_steady_state(lumped.build_pa_chain(n, q12, q21, lambda1, lambda2))
                )
                frame.insert(0, "lambda2", float(lambda2))
                frame.insert(0, "lambda1", float(lambda1))
                frames.append(frame)
            writer.table(
                "sweep_distributions",
                pd.concat(frames, ignore_index=True),
                "Stationary law of n1 per intensity pair",
            )
            summary["sweep_points"] = len(cfg.run.sweep)
        return summary

    def _run_marginal(self, network: NetworkModel, writer: ArtifactWriter) -> Dict[str, Any]:
        traj = marginal.marginal_ode_solve(
            network, self._marginal_initial(network), self.config.run.times()
        )
        writer.table(
            "marginals", marginal_frame(traj), "Per-agent marginals from the closed marginal ODE"
        )
        final = traj.fields[-1]
        return {"final_max_deviation": float(np.abs(final - final.mean(axis=0)).max())}

    def _run_pair(self, network: NetworkModel, writer: ArtifactWriter) -> Dict[str, Any]:
        n = network.n_agents
        q12, q21 = peer_assembly_rates(network)
        lam = pair_intensity(network)

        traj = marginal.pair_joint_ode_solve(
            n, q12, q21, lam, self._pair_initial(n), self.config.run.times()
        )
        writer.table("pair", pair_frame(traj), "Joint law of a representative agent pair")

        pi1 = lumped.uipa_mean_closed_form(q12, q21)
        pi11 = marginal.pair_joint_stationary(n, q12, q21, lam)
        var = marginal.count_variance_from_pair(n, pi1, pi11)
        writer.table(
            "moments",
            moments_frame([_exact("pi11", pi11), _exact("mean_n1", pi1), _exact("var_n1", var)]),
            "Stationary pair probability and moments of n1/N",
        )
        return {"pi11": pi11, "mean": pi1, "var": var}

    def _run_ssa(self, network: NetworkModel, writer: ArtifactWriter) -> Dict[str, Any]:
        cfg = self.config
        run = cfg.run
        ensemble = ssa.run_ensemble(
            network, self._agent_initial(network), run.t_end, run.replications, run.seed, run.n_jobs
        )
        times = run.times()
        writer.table(
            "counts",
            count_trajectory_frame(times, [ssa.count_trajectory(p, times) for p in ensemble.paths]),
            "Opinion counts of every replication on the grid",
        )
        if cfg.output.events:
            for k, path in enumerate(ensemble.paths):
                writer.table(
                    f"events_{k + 1}", events_frame(path), f"Event log of replication {k + 1}"
                )

        summary: Dict[str, Any] = {"events": int(sum(p.n_events for p in ensemble.paths))}
        burn_in = run.burn_in if run.burn_in is not None else stats.default_burn_in(network)
        if burn_in >= run.t_end:
            logger.warning(
                f"Burn-in {burn_in:.3g} leaves no averaging window before t_end={run.t_end}"
            )
            return summary

        rows: List[Dict[str, Any]] = []
        for j in range(network.n_opinions):
            mean, var = stats.ensemble_moments(ensemble, j, burn_in, run.t_end, run.n_batches)
            for name, estimate in ((f"mean_n{j + 1}", mean), (f"var_n{j + 1}", var)):
                rows.append(
                    {
                        "statistic": name,
                        "value": estimate.value,
                        "std_error": estimate.std_error,
                        "n": estimate.n,
                    }
                )
            if j == 0:
                summary.update({"mean": mean.value, "var": var.value})
        writer.table(
            "moments",
            moments_frame(rows),
            f"Time-average moments of n_j/N after burn-in {burn_in:.6g}",
        )

        p, stderr = stats.empirical_count_distribution(
            ensemble, 0, burn_in, run.t_end, run.n_batches
        )
        writer.table(
            "histogram",
            histogram_frame(p, stderr),
            "Time-weighted law of n1 with batch-means errors",
        )
        summary["burn_in"] = burn_in
        return summary
