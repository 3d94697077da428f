"""
CLI Entrypoint for the Opinion Markov Engine

Runs a YAML experiment config or a named preset and writes the results as
tables plus a manifest. Status goes to stderr; results go to files.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from opinion_markov import topology
from opinion_markov.config import load_config
from opinion_markov.errors import ConfigParseError, OpinionModelError, UnknownPreset
from opinion_markov.experiment import ExperimentRunner, check_preconditions
from opinion_markov.presets import PRESETS, run_preset

EXIT_OK = 0
EXIT_CONFIG_PARSE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_UNKNOWN_PRESET = 5


# Parse command-line arguments
def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="opinion-markov",
        description="Opinion Markov Engine - exact and simulated opinion dynamics on networks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run an experiment config")
    run.add_argument("config", type=str, help="Path to a YAML experiment config")
    run.add_argument(
        "--out", "-o",
        type=str,
        default=None,
        help="Output directory (default: output.directory, then $OPINION_MARKOV_OUTPUT_DIR)",
    )

    preset = commands.add_parser("preset", help="Run a named preset")
    preset.add_argument("name", type=str, help=f"One of: {', '.join(PRESETS)}")
    preset.add_argument(
        "--out", "-o", type=str, default=None, help="Output directory (default: results/<name>)"
    )
    preset.add_argument("--seed", "-s", type=int, default=1, help="Run seed (default: 1)")
    preset.add_argument(
        "--jobs", "-j", type=int, default=1, help="Parallel jobs for simulations (default: 1)"
    )

    topo = commands.add_parser("topo", help="Generate a graph and write its edge list")
    topo.add_argument(
        "spec", type=str, help="Topology spec, e.g. smallworld:N=100,k=1,p=0.2,seed=7"
    )
    topo.add_argument("--out", "-o", type=str, required=True, help="Edge-list file to write")

    validate = commands.add_parser("validate", help="Validate a config without running it")
    validate.add_argument("config", type=str, help="Path to a YAML experiment config")

    return parser.parse_args(argv)


def _run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    summary = ExperimentRunner(config, args.out).run()
    print(json.dumps(summary, indent=2, ensure_ascii=False), file=sys.stderr)
    return EXIT_OK


def _preset(args: argparse.Namespace) -> int:
    out = Path(args.out) if args.out else Path("results") / args.name
    summaries = run_preset(args.name, out, seed=args.seed, n_jobs=args.jobs)
    print(f"Preset {args.name}: {len(summaries)} sub-run(s) saved to {out}", file=sys.stderr)
    return EXIT_OK


def _topo(args: argparse.Namespace) -> int:
    graph = topology.generate(topology.TopologySpec.parse(args.spec))
    topology.write_edge_list(graph, args.out)
    print(json.dumps(topology.degree_summary(graph)), file=sys.stderr)
    print(f"Edge list saved to {args.out}", file=sys.stderr)
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    config = load_config(args.config).resolved()
    network = check_preconditions(config)
    print(
        f"{args.config}: valid ({config.run.solver}, N={network.n_agents}, "
        f"M={network.n_opinions})",
        file=sys.stderr,
    )
    return EXIT_OK


# Main entry point of the entire program
def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = parse_args(argv)
    commands = {"run": _run, "preset": _preset, "topo": _topo, "validate": _validate}
    try:
        return commands[args.command](args)
    except UnknownPreset as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_UNKNOWN_PRESET
    except ConfigParseError as e:
        print(f"Error: config parse failed: {e}", file=sys.stderr)
        return EXIT_CONFIG_PARSE
    except ValidationError as e:
        print(f"Error: invalid config:\n{e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OpinionModelError as e:
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO


# Just some standard boilerplate
if __name__ == "__main__":
    sys.exit(main())
