"""Post-processing: impulse responses, PDAPs, scoring and channel statistics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .channel import MeasurementSet, PathParams
from .sampling import FrequencyGrid

_CHUNK_ELEMENTS = 4_000_000


@dataclass
class CirProfile:
    """Delay-domain response of one pointing.

    ``power_db`` is ``20 log10 |h|``; ``h`` keeps the complex values.
    """

    delay_grid: np.ndarray
    h: np.ndarray
    pointing: tuple[float, float] | str = "aggregate"

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.h)

    @property
    def power_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.h))


def adjoint_nudft_cir(samples, grid: FrequencyGrid, delay_grid, window: str | None = None,
                      pointing: tuple[float, float] | str = "aggregate") -> CirProfile:
    """``h(tau) = sum_k w_k y_k exp(+j 2 pi f_k tau)`` on an arbitrary delay grid.

    No ``1/K`` scaling is applied. ``window="hann"`` tapers the samples by
    their index before the transform. This suppresses leakage in dense-grid
    peak picking. Divide by :func:`window_gain` to read amplitudes.
    """
    y = np.asarray(samples, dtype=np.complex128).ravel()
    if y.size != grid.k_count:
        raise ValueError(f"expected {grid.k_count} samples for one pointing, got {y.size}")
    w = window_weights(window, y.size)
    yw = y * w
    taus = np.asarray(delay_grid, dtype=np.float64)
    f = grid.frequencies
    chunk = max(1, _CHUNK_ELEMENTS // f.size)
    h = np.concatenate([np.exp(2j * np.pi * np.outer(taus[i:i + chunk], f)) @ yw
                        for i in range(0, taus.size, chunk)]) if taus.size else np.zeros(0, complex)
    return CirProfile(taus, h, pointing)


def window_weights(window: str | None, k: int) -> np.ndarray:
    if window is None or window == "none":
        return np.ones(k)
    if window == "hann":
        return np.hanning(k + 2)[1:-1]
    raise ValueError(f"unknown window {window!r}")


def window_gain(window: str | None, k: int) -> float:
    """Coherent gain of the window: the CIR peak of a unit path."""
    return float(window_weights(window, k).sum())


def pdap(measurement: MeasurementSet, delay_grid, window: str | None = None) -> list[CirProfile]:
    """Per-pointing CIRs (power-delay-angular profile)."""
    y = measurement.as_matrix()
    return [adjoint_nudft_cir(y[m], measurement.grid, delay_grid, window,
                              (float(az), float(el)))
            for m, (az, el) in enumerate(measurement.pointings)]


def write_pdap_csv(profiles: list[CirProfile], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pointing_az_deg", "tau_s", "power_db"])
        for p in profiles:
            az = math.degrees(p.pointing[0]) if isinstance(p.pointing, tuple) else float("nan")
            for t, d in zip(p.delay_grid, p.power_db):
                w.writerow([f"{az:.12g}", f"{t:.12g}", f"{d:.12g}" if np.isfinite(d) else "-inf"])
    return path


def pick_cir_peaks(cir: CirProfile, threshold_db: float = 10.0,
                   dynamic_range_db: float | None = None, gain: float = 1.0,
                   max_peaks: int | None = None) -> list[PathParams]:
    """Treat local maxima of ``|h|`` as multipath components.

    A peak is kept when it rises ``threshold_db`` above the median level
    (a noise-floor proxy) and, if given, lies within ``dynamic_range_db``
    of the strongest peak. Amplitudes are ``h(tau) / gain``. Pass
    :func:`window_gain` for windowed CIRs, or ``K`` for the raw adjoint.
    """
    mag = cir.magnitude
    if mag.size < 3 or not np.any(mag > 0):
        return []
    idx = np.nonzero((mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:]))[0] + 1
    floor = float(np.median(mag))
    keep = mag[idx] > floor * 10.0 ** (threshold_db / 20.0)
    idx = idx[keep]
    if idx.size and dynamic_range_db is not None:
        idx = idx[mag[idx] >= mag[idx].max() * 10.0 ** (-dynamic_range_db / 20.0)]
    idx = idx[np.argsort(-mag[idx], kind="stable")]
    if max_peaks is not None:
        idx = idx[:max_peaks]
    az, el = cir.pointing if isinstance(cir.pointing, tuple) else (0.0, math.pi / 2)
    return [PathParams(complex(cir.h[i] / gain), float(cir.delay_grid[i]), az, el) for i in idx]


def _path_list(paths) -> list[PathParams]:
    return list(paths.paths) if hasattr(paths, "paths") else list(paths)


def rank_by_amplitude(paths) -> list[PathParams]:
    return sorted(_path_list(paths), key=lambda p: -abs(p.amplitude))


def delay_rmse(estimates, truth, top_n: int | None = None) -> float:
    """RMSE of delays after pairing by descending amplitude rank."""
    est = rank_by_amplitude(estimates)
    tru = rank_by_amplitude(truth)
    if not est or not tru:
        raise ValueError("delay RMSE needs non-empty estimate and truth sets")
    n = min(len(est), len(tru)) if top_n is None else top_n
    if n < 1 or n > min(len(est), len(tru)):
        raise ValueError(f"top_n={top_n} exceeds the available paths")
    d = np.array([e.delay - t.delay for e, t in zip(est[:n], tru[:n])])
    return float(np.sqrt(np.mean(d ** 2)))


@dataclass(frozen=True)
class ChannelStats:
    """Path loss ``-10 log10 sum |alpha|^2`` and power-weighted RMS delay spread."""

    path_loss_db: float
    rms_delay_spread_s: float

    def to_dict(self) -> dict:
        return asdict(self)


def channel_stats(paths) -> ChannelStats:
    paths = _path_list(paths)
    p = np.array([abs(x.amplitude) ** 2 for x in paths], dtype=np.float64)
    tau = np.array([x.delay for x in paths], dtype=np.float64)
    total = float(p.sum()) if p.size else 0.0
    if not total > 0:
        raise ValueError("channel statistics need at least one path with positive power")
    mean = float(np.sum(p * tau) / total)
    var = float(np.sum(p * (tau - mean) ** 2) / total)
    return ChannelStats(-10.0 * math.log10(total), math.sqrt(max(var, 0.0)))


def cdf(values) -> list[tuple[float, float]]:
    """Empirical CDF as ``(value, P[X <= value])`` pairs, one per sample."""
    v = np.sort(np.asarray(list(values), dtype=np.float64))
    if v.size == 0:
        raise ValueError("CDF of an empty sample")
    return [(float(x), (i + 1) / v.size) for i, x in enumerate(v)]


def write_cdf_csv(pairs, path, name: str = "value") -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([name, "cdf"])
        for x, p in pairs:
            w.writerow([f"{x:.12g}", f"{p:.12g}"])
    return path


def write_stats_json(stats: ChannelStats, path, **extra) -> Path:
    path = Path(path)
    path.write_text(json.dumps({**stats.to_dict(), **extra}, indent=2))
    return path
