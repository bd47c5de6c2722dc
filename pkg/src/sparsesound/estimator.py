"""SAGE and likelihood-rectified SAGE (LR-SAGE) multipath estimation.

Each iteration visits the paths in turn:

* E-step: cancel every other path from the data.
* M-step: maximize the single-path objective of what remains over
  delay (and direction when several pointings exist).
* Re-estimate the amplitude by projection.

Classical SAGE maximizes ``|a^H x| / ||a||``. LR-SAGE maximizes the
rectified objective ``|(I o a)^H x| / ||a||``, anchored at the path's
previous delay estimate.

The algorithm needs a starting point, so it is initialized by serial
interference cancellation. The running objective is the energy explained
by the current model, ``||y||^2 - ||y - sum_l alpha_l a_l||^2``. This
quantity never decreases under classical SAGE updates.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import MeasurementSet, PathParams, SoundingModel, paths_from_records, paths_to_records
from .likelihood import DelayDictionary, beam_combine, default_delta, delay_axis


@dataclass
class SageConfig:
    """Estimator settings.

    Parameters
    ----------
    n_paths
        Number of paths to estimate.
    max_iterations
        Upper bound on full E/M sweeps after initialization.
    convergence_eps
        Stop when the relative change of the objective falls below this.
    delay_search
        ``(lo, hi, delta)``; ``delta=None`` uses ``1 / (8 B)``.
    refine
        Polish the coarse grid maximum with a bounded scalar search.
    rectified
        Use the LR-SAGE objective.
    model_absorption
        Whether steering vectors include the absorption gain. ``None``
        follows ``rectified``, so classical SAGE assumes a free-space
        channel and LR-SAGE uses the absorption model.
    azimuth_grid, elevation_grid
        Candidate directions (radians) for the alternating angle search. It
        only runs with more than one pointing.
    angle_sweeps
        Delay/angle alternations per M-step.
    default_direction
        Direction used when no angle search takes place.
    detection_factor
        During initialization a path is seeded only if its matched-filter
        energy exceeds ``detection_factor * noise_variance``.
    """

    n_paths: int = 5
    max_iterations: int = 20
    convergence_eps: float = 1e-4
    delay_search: tuple = (0.0, 220e-9, None)
    refine: bool = True
    rectified: bool = False
    model_absorption: bool | None = None
    azimuth_grid: np.ndarray | None = None
    elevation_grid: np.ndarray | None = None
    angle_sweeps: int = 2
    default_direction: tuple[float, float] = (0.0, math.pi / 2)
    detection_factor: float = 25.0
    init_sweeps: int = 1

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        lo, hi = self.delay_search[0], self.delay_search[1]
        if not hi > lo or lo < 0:
            raise ValueError(f"empty delay search range ({lo}, {hi})")
        if len(self.delay_search) == 2:
            self.delay_search = (lo, hi, None)

    @property
    def uses_absorption(self) -> bool:
        return self.rectified if self.model_absorption is None else self.model_absorption


@dataclass
class EstimateSet:
    """Estimated paths, sorted by descending amplitude magnitude."""

    paths: list[PathParams]
    iterations_used: int = 0
    final_objective: float = 0.0
    per_iteration_trace: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.paths = sorted(self.paths, key=lambda p: -abs(p.amplitude))

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.paths])

    def to_dict(self) -> dict:
        return {"paths": paths_to_records(self.paths), "iterations": self.iterations_used,
                "final_objective": self.final_objective,
                "objective_trace": list(self.per_iteration_trace), "warnings": list(self.warnings)}

    @classmethod
    def from_dict(cls, data: dict) -> EstimateSet:
        try:
            paths = paths_from_records(data["paths"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed estimate record: {exc}") from None
        trace = [float(x) for x in data.get("objective_trace", [])]
        return cls(paths, int(data.get("iterations", 0)),
                   float(data.get("final_objective", trace[-1] if trace else 0.0)),
                   trace, list(data.get("warnings", [])))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path) -> EstimateSet:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _vector(y) -> np.ndarray:
    if isinstance(y, MeasurementSet):
        return y.samples
    return np.asarray(y, dtype=np.complex128).ravel()


def estimate_amplitude(residual, steering) -> complex:
    """Least-squares amplitude ``a^H x / ||a||^2``."""
    a = np.asarray(steering, dtype=np.complex128).ravel()
    energy = float(np.vdot(a, a).real)
    if energy == 0.0:
        raise ValueError("zero steering vector")
    return complex(np.vdot(a, np.asarray(residual).ravel()) / energy)


def e_step(y, paths, target_index: int, model: SoundingModel) -> np.ndarray:
    """Data with the contributions of every path except ``target_index`` removed."""
    paths = list(paths)
    if not 0 <= target_index < len(paths):
        raise IndexError(f"target index {target_index} out of range for {len(paths)} paths")
    x = _vector(y).copy()
    for i, p in enumerate(paths):
        if i != target_index and p.amplitude != 0:
            x -= p.amplitude * model.steering(p.delay, p.azimuth, p.elevation)
    return x


@dataclass
class StepResult:
    delay: float
    azimuth: float
    elevation: float
    objective: float


class SageEstimator:
    """SAGE / LR-SAGE bound to a sounding model and configuration.

    The delay dictionary is built once per instance. Reuse one estimator to
    process many measurements taken on the same grid.
    """

    def __init__(self, model: SoundingModel, config: SageConfig):
        self.model = model
        self.config = config
        self.steer_model = model if config.uses_absorption else model.without_absorption()
        lo, hi, delta = config.delay_search
        self.delta = default_delta(model.grid) if delta is None else float(delta)
        self.lo, self.hi = float(lo), float(hi)
        self.taus = delay_axis(self.lo, self.hi, self.delta)
        self._dictionary: DelayDictionary | None = None
        self.search_angles = (model.m > 1 and config.azimuth_grid is not None) or (
            model.m > 1 and config.elevation_grid is not None)

    @property
    def dictionary(self) -> DelayDictionary:
        if self._dictionary is None:
            self._dictionary = DelayDictionary(self.steer_model, self.taus)
        return self._dictionary

    # -- objectives ---------------------------------------------------------

    def _score_grid(self, z, gnorm, rectified, ref):
        d = self.dictionary
        if rectified:
            return d.rectified(z, ref)
        return d.plain(z) / gnorm

    def _score_at(self, z, gnorm, tau, rectified, ref) -> float:
        m = self.steer_model
        h = m.frequency_response(tau)
        if rectified:
            # |(I o a)^H x| / ||a||: the ||a|| inside I cancels the denominator.
            ab = m.absorption
            w = self.dictionary.fprime
            if ab.enabled:
                f = m.frequencies
                w = w / (ab.clipped_gain(f, tau) * ab.clipped_gain(f, ref))
            return float(abs(np.vdot(w * h, z)))
        return float(abs(np.vdot(h, z)) / (np.linalg.norm(h) * gnorm))

    def objective(self, x, tau, az, el, rectified=None, ref=None) -> float:
        """Single-path objective of residual ``x`` at one parameter point."""
        rectified = self.config.rectified if rectified is None else rectified
        z, gnorm = beam_combine(self.steer_model, x, az, el)
        return self._score_at(z, gnorm, tau, rectified, tau if ref is None else ref)

    def _delay_search(self, x, az, el, rectified, ref) -> tuple[float, float]:
        z, gnorm = beam_combine(self.steer_model, x, az, el)
        if gnorm == 0:
            return self.lo, 0.0
        scores = self._score_grid(z, gnorm, rectified, ref)
        i = int(np.argmax(scores))
        best_tau, best = float(self.taus[i]), float(scores[i])
        if self.config.refine and best > 0:
            a = max(self.lo, best_tau - self.delta)
            b = min(self.hi, best_tau + self.delta)
            res = minimize_scalar(lambda t: -self._score_at(z, gnorm, t, rectified, ref),
                                  bounds=(a, b), method="bounded",
                                  options={"xatol": self.delta / 1000.0})
            if -res.fun > best:
                best_tau, best = float(res.x), float(-res.fun)
        return best_tau, best

    def _angle_search(self, x, tau) -> tuple[float, float]:
        cfg = self.config
        az_grid = np.atleast_1d(cfg.azimuth_grid if cfg.azimuth_grid is not None
                                else [cfg.default_direction[0]])
        el_grid = np.atleast_1d(cfg.elevation_grid if cfg.elevation_grid is not None
                                else [cfg.default_direction[1]])
        m = self.steer_model
        h = m.frequency_response(tau)
        c = x.reshape(m.m, m.k) @ h.conj()                        # per-pointing matched outputs
        az, el = np.meshgrid(az_grid, el_grid, indexing="ij")
        g = m.pattern.gain((az[..., None], el[..., None]),
                           (m.pointings[:, 0], m.pointings[:, 1]))  # (A, E, M)
        score = np.abs(g @ c) / np.maximum(np.linalg.norm(g, axis=-1), 1e-300)
        i, j = np.unravel_index(int(np.argmax(score)), score.shape)
        return float(az_grid[i]), float(el_grid[j])

    def m_step(self, x, prev: PathParams | None = None, rectified: bool | None = None,
               ref_delay: float | None = None) -> StepResult:
        """Maximize the single-path objective of residual ``x``.

        ``ref_delay`` anchors the rectifier; it defaults to ``prev.delay``.
        """
        rectified = self.config.rectified if rectified is None else rectified
        x = _vector(x)
        az, el = ((prev.azimuth, prev.elevation) if prev is not None
                  else self.config.default_direction)
        if ref_delay is None:
            ref_delay = prev.delay if prev is not None else self.lo
        sweeps = self.config.angle_sweeps if self.search_angles else 1
        tau, score = self.lo, 0.0
        for _ in range(max(sweeps, 1)):
            tau, score = self._delay_search(x, az, el, rectified, ref_delay)
            if self.search_angles:
                az, el = self._angle_search(x, tau)
        if self.search_angles:
            tau, score = self._delay_search(x, az, el, rectified, ref_delay)
        return StepResult(tau, az, el, score)

    def amplitude(self, x, tau, az, el) -> complex:
        return estimate_amplitude(x, self.steer_model.steering(tau, az, el))

    # -- main loop -------------------------------------------------------------

    def _initialize(self, y, noise_variance):
        cfg = self.config
        residual = y.copy()
        threshold = (cfg.detection_factor * noise_variance if noise_variance > 0
                     else 1e-24 * float(np.vdot(y, y).real))
        paths, notes = [], []
        for l in range(cfg.n_paths):
            step = self.m_step(residual, rectified=False)
            if cfg.rectified:
                step = self.m_step(residual, PathParams(0, step.delay, step.azimuth, step.elevation),
                                   rectified=True, ref_delay=step.delay)
            a = self.steer_model.steering(step.delay, step.azimuth, step.elevation)
            alpha = estimate_amplitude(residual, a)
            explained = abs(alpha) ** 2 * float(np.vdot(a, a).real)
            if not explained > threshold:
                msg = (f"only {l} of {cfg.n_paths} paths could be seeded above the noise floor; "
                       f"padding with zero-amplitude placeholders")
                warnings.warn(msg, RuntimeWarning, stacklevel=3)
                notes.append(msg)
                az, el = cfg.default_direction
                paths.extend(PathParams(0, self.lo, az, el) for _ in range(cfg.n_paths - l))
                break
            paths.append(PathParams(alpha, step.delay, step.azimuth, step.elevation))
            residual = residual - alpha * a
            if cfg.init_sweeps > 0 and len(paths) > 1:
                paths, residual = self._sweeps(y, paths, residual, cfg.init_sweeps)
        return paths, residual, notes

    def _sweep(self, paths, residual):
        """One SAGE pass over all non-placeholder paths; returns the largest delay move."""
        max_move = 0.0
        for l, p in enumerate(paths):
            if p.amplitude == 0:
                continue
            a_old = self.steer_model.steering(p.delay, p.azimuth, p.elevation)
            x = residual + p.amplitude * a_old                      # E-step
            step = self.m_step(x, p)
            if not self.config.rectified:
                # Ascent guard: keep the previous delay if the search did not improve on it.
                old = self.objective(x, p.delay, p.azimuth, p.elevation, rectified=False)
                if old >= step.objective:
                    step = StepResult(p.delay, p.azimuth, p.elevation, old)
            a = self.steer_model.steering(step.delay, step.azimuth, step.elevation)
            alpha = estimate_amplitude(x, a)
            max_move = max(max_move, abs(step.delay - p.delay))
            paths[l] = PathParams(alpha, step.delay, step.azimuth, step.elevation)
            residual = x - alpha * a
        return residual, max_move

    def _sweeps(self, y, paths, residual, n):
        for _ in range(n):
            residual, move = self._sweep(paths, residual)
            if move < self.delta / 100.0:
                break
        return paths, residual

    def run(self, y) -> EstimateSet:
        """Estimate ``config.n_paths`` paths from measurement ``y``."""
        cfg = self.config
        noise_variance = y.noise_variance if isinstance(y, MeasurementSet) else 0.0
        y = _vector(y)
        if y.size != self.model.k * self.model.m:
            raise ValueError(f"measurement has {y.size} samples, model expects "
                             f"{self.model.k * self.model.m}")
        energy = float(np.vdot(y, y).real)
        paths, residual, notes = self._initialize(y, noise_variance)

        def explained(r):
            return energy - float(np.vdot(r, r).real)

        trace = [explained(residual)]
        iterations = 0
        for it in range(1, cfg.max_iterations + 1):
            iterations = it
            residual, max_move = self._sweep(paths, residual)
            trace.append(explained(residual))
            prev = trace[-2]
            rel = abs(trace[-1] - prev) / max(abs(prev), 1e-300)
            if rel < cfg.convergence_eps or max_move < self.delta / 100.0:
                break
        return EstimateSet(paths, iterations, trace[-1], trace, notes)


def m_step(residual, config: SageConfig, model: SoundingModel,
           prev_delay: float | None = None) -> StepResult:
    """Single M-step with a throw-away estimator (convenience wrapper)."""
    est = SageEstimator(model, config)
    prev = None
    if prev_delay is not None:
        az, el = config.default_direction
        prev = PathParams(0, prev_delay, az, el)
    return est.m_step(residual, prev)


def run(y, config: SageConfig, model: SoundingModel) -> EstimateSet:
    """Run SAGE (or LR-SAGE when ``config.rectified``) on ``y``."""
    return SageEstimator(model, config).run(y)
