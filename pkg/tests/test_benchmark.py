import pytest

from sparsesound.absorption import default_synthetic_model
from sparsesound.benchmark import (Cell, Scenario, aggregate, cell_grid, run_cell, run_sweep,
                                   worker_count, write_rows)
from sparsesound.channel import table_one_paths
from sparsesound.estimator import SageConfig


def scenario(n_trials=2):
    return Scenario(paths=tuple(table_one_paths()), f_start=370e9, bandwidth=20e9, snr_db=50.0,
                    absorption=default_synthetic_model(), sage=SageConfig(n_paths=5),
                    n_trials=n_trials, base_seed=7)


def test_single_cell_one_row():
    rows = run_cell(Cell("pfs", True, True, 70), scenario(1))
    assert len(rows) == 1
    scheme, rect, ma, k, trial, rmse = rows[0]
    assert (scheme, rect, ma, k, trial) == ("pfs", True, True, 70, 0)
    assert rmse < 0.01e-9


def test_cell_grid():
    cells = cell_grid(["pfs", "ufs"], [False, True], [True], [50, 70])
    assert len(cells) == 8 and Cell("ufs", True, True, 70) in cells


def test_sweep_sorted_and_parallel_identical():
    cells = [Cell("pfs", False, False, 50), Cell("cfs", False, False, 50)]
    serial = run_sweep(cells, scenario(), workers=1)
    parallel = run_sweep(cells, scenario(), workers=2)
    assert serial == parallel
    assert serial == sorted(serial, key=lambda r: r[:5])
    assert [r[0] for r in serial] == ["cfs", "cfs", "pfs", "pfs"]


def test_aggregate_rms():
    rows = [("pfs", True, True, 50, 0, 3.0), ("pfs", True, True, 50, 1, 4.0)]
    assert aggregate(rows) == {("pfs", True, True, 50): pytest.approx((12.5) ** 0.5)}


def test_worker_env(monkeypatch):
    monkeypatch.delenv("SPARSESOUND_WORKERS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("SPARSESOUND_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("SPARSESOUND_WORKERS", "0")
    assert worker_count() == 1
    monkeypatch.setenv("SPARSESOUND_WORKERS", "many")
    with pytest.raises(ValueError):
        worker_count()


def test_write_rows(tmp_path):
    path = write_rows([("pfs", True, False, 50, 0, 1.23456789012345e-12)], tmp_path / "b.csv")
    assert path.read_text().splitlines() == ["scheme,rectified,ma,k,trial,rmse_s",
                                             "pfs,true,false,50,0,1.23456789012e-12"]
