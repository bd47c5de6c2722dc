"""Spatio-frequency channel measurement model and synthesis.

A measurement stacks the channel frequency response over ``K`` probe
frequencies and ``M`` antenna pointings into one vector of length ``K*M``.
Ordering is pointing-major: element ``m*K + k`` (0-based) belongs to
pointing ``m`` and frequency ``k``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .absorption import AbsorptionModel
from .sampling import FrequencyGrid, custom_grid, load_scheme


@dataclass(frozen=True)
class PathParams:
    """One multipath component.

    ``elevation`` is the polar angle from zenith, so the horizon is ``pi/2``.
    """

    amplitude: complex
    delay: float
    azimuth: float = 0.0
    elevation: float = math.pi / 2

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ValueError("path delay must be non-negative")
        if not 0.0 <= self.elevation <= math.pi:
            raise ValueError("elevation must lie in [0, pi]")
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        object.__setattr__(self, "azimuth", float(self.azimuth) % (2 * math.pi))

    @property
    def power(self) -> float:
        return abs(self.amplitude) ** 2


def table_one_paths() -> list[PathParams]:
    """Five-path benchmark channel (delays 5-200 ns, amplitudes 1 to 0.03)."""
    delays = [5e-9, 50e-9, 100e-9, 150e-9, 200e-9]
    mags = [1.0, 0.3, 0.1, 0.07, 0.03]
    phases = [0.0, math.pi / 4, math.pi / 4, -math.pi / 3, -math.pi / 3]
    return [PathParams(mag * complex(math.cos(ph), math.sin(ph)), tau)
            for tau, mag, ph in zip(delays, mags, phases)]


def _unit_vectors(az, el) -> np.ndarray:
    az = np.asarray(az, dtype=np.float64)
    el = np.asarray(el, dtype=np.float64)
    return np.stack([np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)], axis=-1)


def angular_separation(direction, pointing) -> np.ndarray:
    """Great-circle angle between ``(az, el)`` pairs (broadcasting)."""
    u = _unit_vectors(*direction)
    v = _unit_vectors(*pointing)
    return np.arccos(np.clip(np.sum(u * v, axis=-1), -1.0, 1.0))


@dataclass(frozen=True)
class AntennaPattern:
    """Receive antenna pattern.

    For ``gaussian_horn`` the amplitude gain is
    ``g0 * exp(-2 ln2 (dpsi / hpbw)^2)``, so the power pattern is 3 dB down
    at ``dpsi = hpbw / 2``.
    """

    kind: str = "isotropic"
    hpbw: float | None = None
    boresight_gain: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("isotropic", "gaussian_horn"):
            raise ValueError(f"unknown antenna pattern {self.kind!r}")
        if self.kind == "gaussian_horn" and not (self.hpbw and self.hpbw > 0):
            raise ValueError("gaussian_horn needs a positive hpbw")
        if self.boresight_gain <= 0:
            raise ValueError("boresight gain must be positive")

    def gain(self, direction, pointing) -> np.ndarray:
        if self.kind == "isotropic":
            shape = np.broadcast_shapes(np.shape(direction[0]), np.shape(pointing[0]))
            return np.full(shape, self.boresight_gain)
        dpsi = angular_separation(direction, pointing)
        return self.boresight_gain * np.exp(-2.0 * math.log(2.0) * (dpsi / self.hpbw) ** 2)


def antenna_gain(pattern: AntennaPattern, direction, pointing) -> float:
    return float(pattern.gain(direction, pointing))


def azimuth_ring(m: int, elevation: float = math.pi / 2) -> np.ndarray:
    """``m`` pointings uniformly spaced in azimuth, shape ``(m, 2)``."""
    az = 2 * math.pi * np.arange(m) / m
    return np.column_stack([az, np.full(m, elevation)])


@dataclass(frozen=True, eq=False)
class SoundingModel:
    """Everything needed to evaluate a steering vector.

    Parameters
    ----------
    grid
        Probe frequencies.
    pointings
        Antenna boresight directions, ``(M, 2)`` array of ``(az, el)``.
    pattern
        Antenna pattern shared by all pointings.
    absorption
        Molecular absorption model.
    """

    grid: FrequencyGrid
    pointings: np.ndarray = field(default_factory=lambda: np.array([[0.0, math.pi / 2]]))
    pattern: AntennaPattern = field(default_factory=AntennaPattern)
    absorption: AbsorptionModel = field(default_factory=AbsorptionModel.none)

    def __post_init__(self) -> None:
        p = np.atleast_2d(np.asarray(self.pointings, dtype=np.float64))
        if p.shape[1] != 2 or p.shape[0] < 1:
            raise ValueError("pointings must be an (M, 2) array of (az, el)")
        p.setflags(write=False)
        object.__setattr__(self, "pointings", p)

    @property
    def k(self) -> int:
        return self.grid.k_count

    @property
    def m(self) -> int:
        return self.pointings.shape[0]

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies

    def without_absorption(self) -> SoundingModel:
        return SoundingModel(self.grid, self.pointings, self.pattern, AbsorptionModel.none())

    def spatial_gains(self, az: float, el: float) -> np.ndarray:
        """Pattern gain of every pointing toward ``(az, el)``, shape ``(M,)``."""
        return self.pattern.gain((az, el), (self.pointings[:, 0], self.pointings[:, 1]))

    def frequency_response(self, tau) -> np.ndarray:
        """``G_MA(f_k, tau) exp(-j 2 pi f_k tau)``; shape ``(..., K)`` for array ``tau``."""
        tau = np.asarray(tau, dtype=np.float64)
        f = self.frequencies
        phase = np.exp(-2j * np.pi * f * tau[..., None])
        if self.absorption.enabled:
            phase = phase * self.absorption.gain(f, tau[..., None])
        return phase

    def steering(self, tau: float, az: float = 0.0, el: float = math.pi / 2) -> np.ndarray:
        """Stacked steering vector of length ``K*M`` (pointing-major)."""
        if tau < 0:
            raise ValueError("delay must be non-negative")
        g = self.spatial_gains(az, el)
        return np.outer(g, self.frequency_response(tau)).ravel()


def steering_vector(grid, pointings, pattern, absorption, tau, az, el) -> np.ndarray:
    return SoundingModel(grid, pointings, pattern, absorption).steering(tau, az, el)


@dataclass(eq=False)
class MeasurementSet:
    """Stacked CFR samples together with the grid and pointings that produced them."""

    grid: FrequencyGrid
    pointings: np.ndarray
    samples: np.ndarray
    noise_variance: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.pointings = np.atleast_2d(np.asarray(self.pointings, dtype=np.float64))
        self.samples = np.asarray(self.samples, dtype=np.complex128).ravel()
        if self.samples.size != self.grid.k_count * self.pointings.shape[0]:
            raise ValueError(
                f"expected {self.grid.k_count * self.pointings.shape[0]} samples "
                f"(K={self.grid.k_count}, M={self.pointings.shape[0]}), got {self.samples.size}")

    @property
    def k(self) -> int:
        return self.grid.k_count

    @property
    def m(self) -> int:
        return self.pointings.shape[0]

    def as_matrix(self) -> np.ndarray:
        """Samples reshaped to ``(M, K)``."""
        return self.samples.reshape(self.m, self.k)

    def scaled(self, c: complex) -> MeasurementSet:
        return MeasurementSet(self.grid, self.pointings, self.samples * c,
                              self.noise_variance * abs(c) ** 2, dict(self.metadata))


def synthesize(model: SoundingModel, paths, snr_db: float | None = None,
               seed: int | None = 0) -> MeasurementSet:
    """Superpose ``paths`` through ``model`` and add complex white Gaussian noise.

    The noise variance per sample is ``max|alpha|^2 / 10**(snr_db/10)``;
    ``snr_db=None`` gives a noiseless measurement.
    """
    paths = list(paths)
    y = np.zeros(model.k * model.m, dtype=np.complex128)
    for p in paths:
        y += p.amplitude * model.steering(p.delay, p.azimuth, p.elevation)
    sigma2 = 0.0
    if snr_db is not None:
        if not paths:
            raise ValueError("relative SNR needs at least one path")
        sigma2 = max(p.power for p in paths) / 10.0 ** (snr_db / 10.0)
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((2, y.size))
        y = y + math.sqrt(sigma2 / 2.0) * (noise[0] + 1j * noise[1])
    meta = {"absorption": model.absorption.name, "seed": seed, "snr_db": snr_db,
            "pattern": model.pattern.kind}
    return MeasurementSet(model.grid, model.pointings, y, sigma2, meta)


class MeasurementFormatError(ValueError):
    """Raised for malformed measurement CSV files; carries the offending row."""

    def __init__(self, path, row: int | None, message: str):
        self.path = str(path)
        self.row = row
        where = f"{path}:{row}" if row is not None else str(path)
        super().__init__(f"{where}: {message}")


MEASUREMENT_HEADER = ["pointing_az_deg", "pointing_el_deg", "f_hz", "re", "im"]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def paths_to_records(paths) -> list[dict]:
    return [{"amp_re": p.amplitude.real, "amp_im": p.amplitude.imag,
             "delay_s": p.delay, "az_rad": p.azimuth, "el_rad": p.elevation} for p in paths]


def paths_from_records(records) -> list[PathParams]:
    return [PathParams(complex(r["amp_re"], r["amp_im"]), r["delay_s"],
                       r.get("az_rad", 0.0), r.get("el_rad", math.pi / 2)) for r in records]


def write_measurement(ms: MeasurementSet, path, truth=None) -> Path:
    """Write the CSV plus a ``.meta.json`` sidecar (noise variance, metadata, truth)."""
    path = Path(path)
    y = ms.as_matrix()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MEASUREMENT_HEADER)
        for m, (az, el) in enumerate(ms.pointings):
            az_deg, el_deg = _fmt(math.degrees(az)), _fmt(math.degrees(el))
            for k, f in enumerate(ms.grid.frequencies):
                w.writerow([az_deg, el_deg, _fmt(f), _fmt(y[m, k].real), _fmt(y[m, k].imag)])
    meta = {"noise_variance": ms.noise_variance, "k": ms.k, "m": ms.m,
            "scheme": ms.grid.scheme, "metadata": ms.metadata}
    if truth is not None:
        meta["truth"] = paths_to_records(truth)
    sidecar(path).write_text(json.dumps(meta, indent=2, default=str))
    return path


def sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def read_measurement(path, scheme_path=None) -> tuple[MeasurementSet, list[PathParams] | None]:
    """Load a measurement CSV (and its sidecar if present).

    With ``scheme_path`` the CSV frequencies are validated against the scheme
    file, whose full-precision frequencies then replace the CSV values.
    Returns the measurement and the embedded truth paths (or ``None``).
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MEASUREMENT_HEADER:
            raise MeasurementFormatError(path, 1, f"expected header {','.join(MEASUREMENT_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise MeasurementFormatError(path, lineno, f"expected 5 fields, got {len(row)}")
            try:
                rows.append((lineno, *(float(c) for c in row)))
            except ValueError:
                raise MeasurementFormatError(path, lineno, f"non-numeric field in {row!r}") from None
    if not rows:
        raise MeasurementFormatError(path, None, "no data rows")

    pointings: list[tuple[float, float]] = []
    freqs: list[list[float]] = []
    values: list[list[complex]] = []
    for lineno, az, el, f, re, im in rows:
        key = (az, el)
        if not pointings or pointings[-1] != key:
            if key in pointings:
                raise MeasurementFormatError(path, lineno, "rows are not grouped by pointing")
            pointings.append(key)
            freqs.append([])
            values.append([])
        if freqs[-1] and f <= freqs[-1][-1]:
            raise MeasurementFormatError(path, lineno, "frequencies not increasing within pointing")
        freqs[-1].append(f)
        values[-1].append(complex(re, im))
    f0 = np.array(freqs[0])
    for m, fl in enumerate(freqs[1:], start=1):
        if len(fl) != f0.size or not np.allclose(fl, f0, rtol=1e-11, atol=0):
            raise MeasurementFormatError(path, None, f"pointing {m} uses a different frequency list")

    if scheme_path is not None:
        grid = load_scheme(scheme_path)
        if grid.k_count != f0.size or not np.allclose(grid.frequencies, f0, rtol=1e-11, atol=0):
            raise MeasurementFormatError(path, None, f"frequencies do not match scheme {scheme_path}")
    else:
        grid = custom_grid(f0)

    meta_path = sidecar(path)
    noise_variance, metadata, truth = 0.0, {}, None
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        noise_variance = float(meta.get("noise_variance", 0.0))
        metadata = meta.get("metadata", {})
        if "truth" in meta:
            truth = paths_from_records(meta["truth"])
    pts = np.radians(np.array(pointings))
    ms = MeasurementSet(grid, pts, np.array(values).ravel(), noise_variance, metadata)
    return ms, truth
