"""Monte-Carlo delay-RMSE sweeps over sampling schemes and sample counts.

Each cell ``(scheme, rectified, ma, k)`` runs ``n_trials`` independent
trials. Trial ``t`` uses the seed ``base_seed + t``, so cells are
reproducible and independent of scheduling. Cells can be spread over a
process pool; the number of workers comes from ``SPARSESOUND_WORKERS``,
with a default of 1. The result rows are sorted before they are returned.
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .absorption import AbsorptionModel
from .analysis import delay_rmse
from .channel import AntennaPattern, SoundingModel, synthesize
from .estimator import SageConfig, SageEstimator
from .sampling import make_grid

log = logging.getLogger(__name__)

WORKERS_ENV = "SPARSESOUND_WORKERS"


@dataclass(frozen=True)
class Cell:
    scheme: str
    rectified: bool
    ma: bool
    k: int


@dataclass(frozen=True)
class Scenario:
    """Everything shared by the cells of one sweep."""

    paths: tuple
    f_start: float
    bandwidth: float
    snr_db: float | None
    absorption: AbsorptionModel
    sage: SageConfig
    n_trials: int = 10
    base_seed: int = 0
    top_n: int | None = None
    pointings: np.ndarray | None = None
    pattern: AntennaPattern | None = None


def run_cell(cell: Cell, scenario: Scenario) -> list[tuple]:
    """Rows ``(scheme, rectified, ma, k, trial, rmse_s)`` for one cell."""
    grid = make_grid(cell.scheme, scenario.f_start, scenario.bandwidth, cell.k)
    kwargs = {}
    if scenario.pointings is not None:
        kwargs["pointings"] = scenario.pointings
    if scenario.pattern is not None:
        kwargs["pattern"] = scenario.pattern
    absorption = scenario.absorption if cell.ma else AbsorptionModel.none()
    model = SoundingModel(grid, absorption=absorption, **kwargs)
    config = replace(scenario.sage, rectified=cell.rectified)
    estimator = SageEstimator(model, config)
    top_n = scenario.top_n or min(len(scenario.paths), config.n_paths)
    rows = []
    for trial in range(scenario.n_trials):
        y = synthesize(model, scenario.paths, scenario.snr_db, seed=scenario.base_seed + trial)
        est = estimator.run(y)
        rows.append((cell.scheme, cell.rectified, cell.ma, cell.k, trial,
                     delay_rmse(est, scenario.paths, top_n)))
    log.info("cell %s done", cell)
    return rows


def _run_cell_args(args):
    return run_cell(*args)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def run_sweep(cells, scenario: Scenario, workers: int | None = None) -> list[tuple]:
    """Evaluate every cell and return all rows in sorted order."""
    cells = list(cells)
    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1 or len(cells) == 1:
        chunks = [run_cell(c, scenario) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell_args, [(c, scenario) for c in cells]))
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=lambda r: (r[0], r[1], r[2], r[3], r[4]))


def cell_grid(schemes, rectified_opts, ma_opts, k_values) -> list[Cell]:
    return [Cell(s, bool(r), bool(m), int(k))
            for s in schemes for r in rectified_opts for m in ma_opts for k in k_values]


def aggregate(rows) -> dict[tuple, float]:
    """Per-cell RMS over trials: ``sqrt(mean(rmse_t^2))``."""
    acc: dict[tuple, list[float]] = {}
    for scheme, rect, ma, k, _trial, rmse in rows:
        acc.setdefault((scheme, rect, ma, k), []).append(rmse)
    return {key: float(np.sqrt(np.mean(np.square(v)))) for key, v in sorted(acc.items())}


def write_rows(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "rectified", "ma", "k", "trial", "rmse_s"])
        for scheme, rect, ma, k, trial, rmse in rows:
            w.writerow([scheme, str(rect).lower(), str(ma).lower(), k, trial, f"{rmse:.12g}"])
    return path


def write_summary(summary: dict, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "rectified", "ma", "k", "rmse_s"])
        for (scheme, rect, ma, k), v in summary.items():
            w.writerow([scheme, str(rect).lower(), str(ma).lower(), k, f"{v:.12g}"])
    return path
