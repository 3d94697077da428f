"""
Run artifacts: tables, manifest and the resolved config echo.

One directory per run. Every table is written with pandas and listed in
manifest.json with its columns and a description. Nothing time-dependent is
written, so a re-run with the same config reproduces the files byte for byte.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from opinion_markov.models import (
    MarginalTrajectory,
    PairJointTrajectory,
    ProbabilityTrajectory,
    SamplePath,
)

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RESOLVED_CONFIG = "config.resolved.yaml"


class ArtifactWriter:
    """Collects the artifacts of one run directory."""

    def __init__(self, directory: Union[str, Path], fmt: str = "csv"):
        self.directory = Path(directory)
        self.fmt = fmt
        self.artifacts: List[Dict] = []
        self.directory.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, frame: pd.DataFrame, description: str) -> Path:
        path = self.directory / f"{name}.{self.fmt}"
        if self.fmt == "json":
            frame.to_json(path, orient="records", indent=2)
        else:
            frame.to_csv(path, index=False)
        self._record(path, description, list(frame.columns), len(frame))
        return path

    def file(self, path: Path, description: str, columns: Optional[List[str]] = None) -> None:
        """Register a file written by someone else."""
        self._record(path, description, columns or [], None)

    def _record(
        self, path: Path, description: str, columns: List[str], rows: Optional[int]
    ) -> None:
        entry = {"file": path.name, "description": description, "columns": columns}
        if rows is not None:
            entry["rows"] = rows
        self.artifacts.append(entry)
        logger.info(f"Wrote {path}")

    def finish(self, config_yaml: str, summary: Optional[Dict] = None) -> Path:
        (self.directory / RESOLVED_CONFIG).write_text(config_yaml, encoding="utf-8")
        manifest = {
            "config": RESOLVED_CONFIG,
            "artifacts": self.artifacts,
            "summary": summary or {},
        }
        path = self.directory / MANIFEST
        path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return path


# Frame builders. Agents, opinions and counts follow the 1-based file conventions.

def distribution_frame(p: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"i": np.arange(len(p)), "p": p})


def histogram_frame(p: np.ndarray, stderr: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"i": np.arange(len(p)), "p": p, "stderr": stderr})


def count_transient_frame(trajectory: ProbabilityTrajectory) -> pd.DataFrame:
    t, n_states = len(trajectory.times), trajectory.probabilities.shape[1]
    return pd.DataFrame(
        {
            "t": np.repeat(trajectory.times, n_states),
            "i": np.tile(np.arange(n_states), t),
            "p": trajectory.probabilities.ravel(),
        }
    )


def marginal_frame(trajectory: MarginalTrajectory) -> pd.DataFrame:
    t, n, m = trajectory.fields.shape
    return pd.DataFrame(
        {
            "t": np.repeat(trajectory.times, n * m),
            "agent": np.tile(np.repeat(np.arange(1, n + 1), m), t),
            "opinion": np.tile(np.arange(1, m + 1), t * n),
            "prob": trajectory.fields.ravel(),
        }
    )


def pair_frame(trajectory: PairJointTrajectory) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": trajectory.times,
            "pi11": trajectory.pi11,
            "pi22": trajectory.pi22,
            "pi12": trajectory.pi12,
        }
    )


def moments_frame(rows: List[Dict]) -> pd.DataFrame:
    """Rows of (statistic, value, std_error, n); exact results carry std_error 0 and n 0."""
    return pd.DataFrame(rows, columns=["statistic", "value", "std_error", "n"])


def events_frame(path: SamplePath) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": path.times,
            "agent": path.agents + 1,
            "from": path.old + 1,
            "to": path.new + 1,
        }
    )


def count_trajectory_frame(
    times: np.ndarray, counts_by_replicate: List[np.ndarray]
) -> pd.DataFrame:
    """Long format t, replicate, n1..nM; `counts_by_replicate[k]` has shape (T, M)."""
    frames = []
    for k, counts in enumerate(counts_by_replicate):
        frame = pd.DataFrame(counts, columns=[f"n{j + 1}" for j in range(counts.shape[1])])
        frame.insert(0, "replicate", k + 1)
        frame.insert(0, "t", times)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def stationary_marginal_frame(marginals: np.ndarray) -> pd.DataFrame:
    n, m = marginals.shape
    return pd.DataFrame(
        {
            "agent": np.repeat(np.arange(1, n + 1), m),
            "opinion": np.tile(np.arange(1, m + 1), n),
            "prob": marginals.ravel(),
        }
    )
