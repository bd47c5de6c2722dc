"""Single-path delay likelihood profiles and their diagnostics.

The plain profile of a target vector ``y`` is ``|a(tau)^H y| / ||a(tau)||``.
The absorption-dependent norm keeps the peak on the true delay even though
``G_MA`` shrinks with delay. The rectified profile weights each frequency
by the local sampling step ``f'(v_k)`` and undoes the absorption gain:

    I_k(tau) = f'(v_k) ||a(tau)|| / (G_c(f_k, tau) G_c(f_k, tau_ref))

Here ``G_c`` is the gain clipped at the model's ``floor_db``. The
rectified value is ``|(I o a)^H y| / ||a||``.

For a single fixed direction ``(az, el)`` the stacked steering vector
factorizes as ``g (x) h(tau)``. ``g`` holds the real per-pointing pattern
gains and ``h`` the per-frequency response. Every profile is therefore
evaluated on the beam-combined vector ``z = sum_m g_m y_m`` of length ``K``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad_vec

from .channel import MeasurementSet, SoundingModel
from .sampling import FrequencyGrid, local_steps, pfs_frequency, pfs_local_step

#: Largest number of matrix elements built at once when scanning a delay grid.
_CHUNK_ELEMENTS = 4_000_000


def default_delta(grid: FrequencyGrid) -> float:
    """Default delay-grid spacing, ``1 / (8 B)``."""
    return 1.0 / (8.0 * grid.bandwidth)


def delay_axis(lo: float, hi: float, delta: float) -> np.ndarray:
    """Uniform delay grid ``lo, lo+delta, ...`` not exceeding ``hi``."""
    if not delta > 0:
        raise ValueError("delay spacing must be positive")
    if lo < 0 or not hi > lo:
        raise ValueError(f"invalid delay range ({lo}, {hi})")
    n = int(math.floor((hi - lo) / delta * (1 + 1e-12))) + 1
    return lo + delta * np.arange(n)


def _samples(target) -> np.ndarray:
    if isinstance(target, MeasurementSet):
        return target.samples
    return np.asarray(target, dtype=np.complex128).ravel()


def beam_combine(model: SoundingModel, y, az: float, el: float) -> tuple[np.ndarray, float]:
    """Return ``z = sum_m g_m y_m`` and ``||g||`` for direction ``(az, el)``."""
    y = _samples(y)
    if y.size != model.k * model.m:
        raise ValueError(f"target has {y.size} samples, model expects {model.k * model.m}")
    g = model.spatial_gains(az, el)
    z = g @ y.reshape(model.m, model.k)
    return z, float(np.linalg.norm(g))


def rectifier_weights(model: SoundingModel, tau, ref_delay: float) -> np.ndarray:
    """Literal ``I(f; tau)`` of shape ``(..., K)``, using the direction-free norm ``||h(tau)||``.

    The full ``||a||`` equals ``||g|| * ||h||``; the ``||g||`` factor is
    applied by :func:`rectified_profile`.
    """
    tau = np.asarray(tau, dtype=np.float64)
    f = model.frequencies
    fprime = local_steps(model.grid)
    h = model.frequency_response(tau)
    hnorm = np.linalg.norm(h, axis=-1, keepdims=True)
    ab = model.absorption
    if ab.enabled:
        denom = ab.clipped_gain(f, tau[..., None]) * ab.clipped_gain(f, ref_delay)
    else:
        denom = np.ones_like(f)
    return fprime * hnorm / denom


@dataclass(eq=False)
class DelayDictionary:
    """Cached per-delay quantities for repeated scans over a fixed delay grid.

    Attributes
    ----------
    taus
        The delay grid.
    phase
        ``exp(+j 2 pi f_k tau_t)``, shape ``(T, K)``.
    gain
        ``G_MA(f_k, tau_t)`` or ``None`` when absorption is disabled.
    hnorm
        ``||h(tau_t)||``, shape ``(T,)``.
    """

    model: SoundingModel
    taus: np.ndarray
    phase: np.ndarray = field(init=False, repr=False)
    gain: np.ndarray | None = field(init=False, repr=False)
    unclipped_ratio: np.ndarray | None = field(init=False, repr=False)
    hnorm: np.ndarray = field(init=False, repr=False)
    fprime: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        f = self.model.frequencies
        self.taus = np.asarray(self.taus, dtype=np.float64)
        self.phase = np.exp(2j * np.pi * np.outer(self.taus, f))
        self.fprime = local_steps(self.model.grid)
        ab = self.model.absorption
        if ab.enabled:
            self.gain = ab.gain(f, self.taus[:, None])
            self.hnorm = np.linalg.norm(self.gain, axis=1)
            clipped = ab.clipped_gain(f, self.taus[:, None])
            # G / G_c is exactly 1 unless the floor is active somewhere.
            self.unclipped_ratio = None if np.all(clipped == self.gain) else self.gain / clipped
            self._absorbed_phase = self.phase * self.gain
            self._rect_phase = (self.phase if self.unclipped_ratio is None
                                else self.phase * self.unclipped_ratio)
        else:
            self.gain = None
            self.unclipped_ratio = None
            self.hnorm = np.full(self.taus.size, math.sqrt(f.size))
            self._absorbed_phase = self.phase
            self._rect_phase = self.phase

    def plain(self, z: np.ndarray) -> np.ndarray:
        """``|h(tau)^H z| / ||h(tau)||`` for every delay."""
        return np.abs(self._absorbed_phase @ z) / self.hnorm

    def rectified(self, z: np.ndarray, ref_delay: float) -> np.ndarray:
        """``|(I o h)^H z| / ||h||`` for every delay (``||h||`` cancels analytically here)."""
        return np.abs(self._rect_phase @ self.rectified_input(z, ref_delay))

    def rectified_input(self, z: np.ndarray, ref_delay: float) -> np.ndarray:
        ab = self.model.absorption
        w = self.fprime
        if ab.enabled:
            w = w / ab.clipped_gain(self.model.frequencies, ref_delay)
        return w * z


@dataclass
class LikelihoodProfile:
    """A normalized delay profile; ``values`` peak at exactly 1."""

    delay_grid: np.ndarray
    values: np.ndarray
    normalization: float
    rectified: bool = False
    ref_delay: float | None = None

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.values))

    @property
    def peak_delay(self) -> float:
        return float(self.delay_grid[self.peak_index])

    @property
    def delta(self) -> float:
        return float(self.delay_grid[1] - self.delay_grid[0]) if self.delay_grid.size > 1 else 0.0

    def db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(self.values)

    def write_csv(self, path) -> Path:
        path = Path(path)
        db = self.db()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau_s", "value_linear", "value_db"])
            for t, v, d in zip(self.delay_grid, self.values, db):
                w.writerow([f"{t:.12g}", f"{v:.12g}", f"{d:.12g}" if np.isfinite(d) else "-inf"])
        return path


def _scan(values_fn, taus: np.ndarray, k: int) -> np.ndarray:
    chunk = max(1, _CHUNK_ELEMENTS // max(k, 1))
    return np.concatenate([values_fn(taus[i:i + chunk]) for i in range(0, taus.size, chunk)])


def _normalize(taus, raw, rectified, ref_delay) -> LikelihoodProfile:
    if taus.size == 0:
        raise ValueError("empty delay grid")
    peak = float(raw.max())
    values = raw / peak if peak > 0 else raw.copy()
    return LikelihoodProfile(taus, values, peak, rectified, ref_delay)


def profile(target, model: SoundingModel, delay_range: tuple[float, float],
            delta: float | None = None, az: float = 0.0, el: float = math.pi / 2
            ) -> LikelihoodProfile:
    """Plain single-path likelihood ``|a^H y| / ||a||`` over a delay grid."""
    delta = default_delta(model.grid) if delta is None else delta
    taus = delay_axis(*delay_range, delta)
    z, gnorm = beam_combine(model, target, az, el)

    def block(t):
        h = model.frequency_response(t)
        return np.abs(h.conj() @ z) / (np.linalg.norm(h, axis=1) * gnorm)

    return _normalize(taus, _scan(block, taus, model.k), False, None)


def rectified_profile(target, model: SoundingModel, delay_range: tuple[float, float],
                      ref_delay: float, delta: float | None = None, az: float = 0.0,
                      el: float = math.pi / 2) -> LikelihoodProfile:
    """Rectified likelihood ``|(I o a)^H y| / ||a||`` anchored at ``ref_delay``."""
    if ref_delay < 0:
        raise ValueError("reference delay must be non-negative")
    delta = default_delta(model.grid) if delta is None else delta
    taus = delay_axis(*delay_range, delta)
    z, gnorm = beam_combine(model, target, az, el)

    def block(t):
        h = model.frequency_response(t)
        anorm = np.linalg.norm(h, axis=1) * gnorm
        weights = rectifier_weights(model, t, ref_delay) * gnorm   # ||a|| = ||g|| ||h||
        return np.abs((weights * h).conj() @ z) / anorm

    return _normalize(taus, _scan(block, taus, model.k), True, ref_delay)


# ---------------------------------------------------------------------------
# Poisson-summation decomposition


def _analytic_mapping(grid: FrequencyGrid):
    """Return ``f(v)`` and ``f'(v)`` callables on continuous index ``v`` (1-based)."""
    k = grid.k_count
    if grid.scheme == "pfs":
        return (lambda v: pfs_frequency(v, grid.f_start, grid.bandwidth, k),
                lambda v: pfs_local_step(v, grid.bandwidth, k))
    if grid.scheme == "ufs":
        df = grid.bandwidth / (k - 1)
        return (lambda v: grid.f_start + (v - 1.0) * df,
                lambda v: np.full(np.shape(v), df) if np.ndim(v) else df)
    raise ValueError(f"scheme {grid.scheme!r} has no analytic frequency mapping")


def poisson_component(grid: FrequencyGrid, m: int, taus, absorption=None,
                      tau_true: float = 0.0, rectified: bool = False,
                      limits: str = "cell", epsrel: float = 1e-8) -> np.ndarray:
    """Order-``m`` Poisson-summation component ``s_m(tau)`` of the noiseless response.

    ``s_m(tau) = int W(v) G(f(v), tau) G(f(v), tau_true) exp(j 2 pi (f(v) (tau - tau_true) - m v)) dv``

    Here ``W = f'`` when ``rectified`` and 1 otherwise. Summing over all
    ``m`` reproduces the direct sum over the samples ``k = 1..K``. With
    ``limits="cell"`` the integral runs over ``[1/2, K + 1/2]``, which counts
    every sample with unit weight. ``limits="nodes"`` integrates over
    ``[1, K]``, which gives the end samples half weight.

    Parameters
    ----------
    grid
        A PFS or UFS grid (an analytic ``f(v)`` is required).
    m
        Replica order; ``m = 0`` is the mainlobe term.
    taus
        Delays at which to evaluate the component.
    absorption
        Optional :class:`~sparsesound.absorption.AbsorptionModel`.
    """
    fv, fpv = _analytic_mapping(grid)
    k = grid.k_count
    if limits == "cell":
        lo, hi = 0.5, k + 0.5
    elif limits == "nodes":
        lo, hi = 1.0, float(k)
    else:
        raise ValueError("limits must be 'cell' or 'nodes'")
    taus = np.asarray(taus, dtype=np.float64)
    dtau = taus - tau_true
    use_gain = absorption is not None and absorption.enabled

    def integrand(v):
        f = fv(v)
        val = np.exp(2j * np.pi * (f * dtau - m * v))
        if use_gain:
            val = val * absorption.gain(f, taus) * absorption.gain(f, tau_true)
        if rectified:
            val = val * fpv(v)
        return val

    val, _ = quad_vec(integrand, lo, hi, epsrel=epsrel, limit=4000)
    return val


def direct_response(grid: FrequencyGrid, taus, absorption=None, tau_true: float = 0.0,
                    rectified: bool = False) -> np.ndarray:
    """Direct sum over samples of the same integrand as :func:`poisson_component` (``m``-free)."""
    f = grid.frequencies
    taus = np.asarray(taus, dtype=np.float64)
    val = np.exp(2j * np.pi * np.outer(taus - tau_true, f))
    if absorption is not None and absorption.enabled:
        val = val * absorption.gain(f, taus[:, None]) * absorption.gain(f, tau_true)
    if rectified:
        val = val * local_steps(grid)
    return val.sum(axis=1)


@dataclass(frozen=True)
class SidelobePrediction:
    """Delay band (relative to the true delay) where the order-``m`` lobe can appear."""

    order: int
    delay_band: tuple[float, float]


def predict_sidelobe_bands(grid: FrequencyGrid, m_max: int,
                           include_negative: bool = False
                           ) -> tuple[list[SidelobePrediction], bool]:
    """Stationary-phase lobe bands ``[m / f'_max, m / f'_min]`` for ``m = 1..m_max``.

    Returns the bands and whether consecutive orders cannot overlap
    (``min f' >= max f' / 2``).
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    steps = local_steps(grid)
    smin, smax = float(steps.min()), float(steps.max())
    orders = list(range(1, m_max + 1))
    if include_negative:
        orders = [-m for m in reversed(orders)] + orders
    bands = [SidelobePrediction(m, tuple(sorted((m / smax, m / smin)))) for m in orders]
    return bands, smin >= smax / 2.0 * (1 - 1e-12)


# ---------------------------------------------------------------------------
# Profile metrics


def _first_null_right(values: np.ndarray, i: int) -> int | None:
    j = i
    while j < values.size - 1 and values[j + 1] < values[j]:
        j += 1
    return j if j != i and j < values.size - 1 else None


def _first_null_left(values: np.ndarray, i: int) -> int | None:
    j = i
    while j > 0 and values[j - 1] < values[j]:
        j -= 1
    return j if j != i and j > 0 else None


def mainlobe_width(p: LikelihoodProfile, kind: str = "null_to_null") -> float:
    """Mainlobe width in seconds.

    ``null_to_null`` walks outward from the peak bin to the first local
    minimum on each side. ``minus3db`` interpolates linearly to the
    ``-3 dB`` crossings. A peak on the edge of the grid is treated as
    symmetric, so the width is twice the one-sided extent.
    """
    v, t = p.values, p.delay_grid
    i = p.peak_index
    if kind == "null_to_null":
        right = _first_null_right(v, i)
        left = _first_null_left(v, i)
        if i == 0 and right is not None:
            return 2.0 * float(t[right] - t[0])
        if i == v.size - 1 and left is not None:
            return 2.0 * float(t[-1] - t[left])
        if left is None or right is None:
            raise ValueError("no mainlobe nulls inside the profile range")
        return float(t[right] - t[left])
    if kind == "minus3db":
        level = v[i] * 10.0 ** (-3.0 / 20.0)
        below = np.nonzero(v[i:] < level)[0]
        right = None
        if below.size:
            j = i + int(below[0])
            right = float(np.interp(level, [v[j], v[j - 1]], [t[j], t[j - 1]]))
        below = np.nonzero(v[:i + 1][::-1] < level)[0]
        left = None
        if below.size:
            j = i - int(below[0])
            left = float(np.interp(level, [v[j], v[j + 1]], [t[j], t[j + 1]]))
        if i == 0 and right is not None:
            return 2.0 * (right - float(t[0]))
        if i == v.size - 1 and left is not None:
            return 2.0 * (float(t[-1]) - left)
        if left is None or right is None:
            raise ValueError("no -3 dB crossings inside the profile range")
        return right - left
    raise ValueError("kind must be 'null_to_null' or 'minus3db'")


def first_null_offset(p: LikelihoodProfile) -> float:
    """Largest distance from the peak to its neighbouring mainlobe null."""
    v, t, i = p.values, p.delay_grid, p.peak_index
    offsets = []
    right = _first_null_right(v, i)
    left = _first_null_left(v, i)
    if right is not None:
        offsets.append(float(t[right] - t[i]))
    if left is not None:
        offsets.append(float(t[i] - t[left]))
    if not offsets:
        raise ValueError("no mainlobe nulls inside the profile range")
    return max(offsets)


@dataclass
class SidelobeMetrics:
    """Sidelobe statistics in dB relative to the peak."""

    max_sidelobe_db: float
    floor_db: float
    positions: np.ndarray
    levels_db: np.ndarray

    def to_dict(self) -> dict:
        return {"max_sidelobe_db": self.max_sidelobe_db, "floor_db": self.floor_db,
                "positions_s": self.positions.tolist(), "levels_db": self.levels_db.tolist()}


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of interior strict-left / non-strict-right local maxima."""
    v = values
    idx = np.nonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1
    return idx


def sidelobe_metrics(p: LikelihoodProfile, exclusion: float) -> SidelobeMetrics:
    """Maximum and median level outside ``|tau - tau_peak| <= exclusion``.

    ``positions`` lists the local maxima outside the exclusion window,
    strongest first.
    """
    if exclusion < 0:
        raise ValueError("exclusion must be non-negative")
    t = p.delay_grid
    outside = np.abs(t - p.peak_delay) > exclusion
    if not np.any(outside):
        raise ValueError("exclusion window covers the entire profile")
    db = p.db()
    peaks = local_maxima(p.values)
    peaks = peaks[outside[peaks]]
    order = np.argsort(-p.values[peaks], kind="stable")
    peaks = peaks[order]
    return SidelobeMetrics(float(db[outside].max()), float(np.median(db[outside])),
                           t[peaks].copy(), db[peaks].copy())


def empirical_udr(grid: FrequencyGrid, search_horizon: float, threshold_db: float = -1.0,
                  absorption=None, delta: float | None = None) -> float | None:
    """Delay of the first ambiguity lobe reaching ``threshold_db`` of the mainlobe.

    A noiseless single path at zero delay is profiled over
    ``[0, search_horizon]``. Starting from the first mainlobe null, the
    function finds the first bin at or above the threshold. It then climbs
    to that lobe's local maximum and returns the maximum's delay. It returns
    ``None`` when no such lobe exists within the horizon.
    """
    from .absorption import AbsorptionModel

    model = SoundingModel(grid, absorption=absorption or AbsorptionModel.none())
    p = profile(model.steering(0.0), model, (0.0, search_horizon), delta)
    v = p.values
    start = _first_null_right(v, 0)
    if start is None:
        return None
    level = 10.0 ** (threshold_db / 20.0)
    hits = np.nonzero(v[start:] >= level * v[0])[0]
    if hits.size == 0:
        return None
    j = start + int(hits[0])
    while j < v.size - 1 and v[j + 1] > v[j]:
        j += 1
    return float(p.delay_grid[j])


def write_metrics_json(path, **metrics) -> Path:
    path = Path(path)

    def conv(x):
        if isinstance(x, np.ndarray):
            return x.tolist()
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        if hasattr(x, "to_dict"):
            return x.to_dict()
        if x is not None and isinstance(x, float) and not math.isfinite(x):
            return str(x)
        return x

    path.write_text(json.dumps({k: conv(v) for k, v in metrics.items()}, indent=2, default=conv))
    return path
