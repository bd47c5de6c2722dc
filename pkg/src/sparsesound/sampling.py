"""Frequency sampling grids for frequency-domain channel sounding.

Four constructions are provided: uniform (UFS), coprime (CFS), nested (NFS)
and parabolic (PFS) sampling. Every constructor returns a
:class:`FrequencyGrid`, which is the object the likelihood analysis and the
estimators are parameterized by. Arbitrary user grids are wrapped with
:func:`custom_grid`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

SCHEMES = ("ufs", "cfs", "nfs", "pfs", "custom")


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Ordered set of probe frequencies with the scheme that produced it.

    Parameters
    ----------
    frequencies
        Probe frequencies in Hz, strictly increasing.
    scheme
        One of ``"ufs"``, ``"cfs"``, ``"nfs"``, ``"pfs"`` or ``"custom"``.
    f_start
        Nominal start of the swept band (Hz).
    bandwidth
        Nominal swept bandwidth (Hz).
    params
        Scheme-specific parameters (``df`` for UFS; ``m``, ``n``, ``df_base``
        for CFS; ``n1``, ``n2``, ``df_base`` for NFS; ``a``, ``kappa`` for PFS).
    """

    frequencies: np.ndarray
    scheme: str
    f_start: float
    bandwidth: float
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        f = np.array(self.frequencies, dtype=np.float64)
        if f.ndim != 1 or f.size < 2:
            raise ValueError("a frequency grid needs at least two points")
        if not np.all(np.isfinite(f)):
            raise ValueError("frequencies must be finite")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        f.setflags(write=False)
        object.__setattr__(self, "frequencies", f)

    @property
    def k_count(self) -> int:
        """Number of probe frequencies."""
        return int(self.frequencies.size)

    @property
    def f_center(self) -> float:
        return self.f_start + self.bandwidth / 2

    def __len__(self) -> int:
        return self.k_count

    def __repr__(self) -> str:
        return (f"FrequencyGrid(scheme={self.scheme!r}, k={self.k_count}, "
                f"f_start={self.f_start:.6g}, bandwidth={self.bandwidth:.6g})")


def _check_band(f_start: float, bandwidth: float) -> None:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if f_start < 0:
        raise ValueError("f_start must be non-negative")


def gen_ufs(f_start: float, bandwidth: float, k: int) -> FrequencyGrid:
    """Uniform grid of ``k`` points spanning ``[f_start, f_start + bandwidth]``."""
    _check_band(f_start, bandwidth)
    if k < 2:
        raise ValueError("UFS needs k >= 2")
    df = bandwidth / (k - 1)
    f = f_start + df * np.arange(k, dtype=np.float64)
    f[-1] = f_start + bandwidth
    return FrequencyGrid(f, "ufs", f_start, bandwidth, {"df": df})


def gen_cfs(f_start: float, bandwidth: float, m: int, n: int) -> FrequencyGrid:
    """Coprime grid: union of an ``m``-point and an ``n``-point sparse sub-array.

    The sub-arrays have steps ``n * df_base`` and ``m * df_base`` with
    ``df_base = bandwidth / (m * n)``, so the joint ambiguity period is
    ``1 / df_base``. Both start at ``f_start``, which they share.
    """
    _check_band(f_start, bandwidth)
    if m < 1 or n < 1:
        raise ValueError("sub-array sizes must be positive")
    if not m < n:
        raise ValueError("CFS requires m < n")
    if math.gcd(m, n) != 1:
        raise ValueError(f"m={m} and n={n} are not coprime")
    df_base = bandwidth / (m * n)
    idx = np.union1d(np.arange(m) * n, np.arange(n) * m)
    f = f_start + idx * df_base
    params = {"m": m, "n": n, "df_base": df_base,
              "nominal_k": m + n, "unique_k": int(idx.size)}
    return FrequencyGrid(f, "cfs", f_start, bandwidth, params)


def gen_cfs_auto(f_start: float, bandwidth: float, k: int) -> FrequencyGrid:
    """Coprime grid with the UDR-maximizing split of a budget of ``k`` points.

    Odd ``k`` uses the consecutive pair ``((k-1)/2, (k+1)/2)``. Even ``k`` uses
    ``(k/2 - 1, k/2 + 1)`` when coprime and otherwise ``(k/2, k/2 + 1)``, whose
    shared origin brings the unique count back to ``k``.
    """
    if k < 5:
        raise ValueError("CFS needs a budget of at least 5 points")
    if k % 2:
        m, n, rule = (k - 1) // 2, (k + 1) // 2, "odd"
    elif math.gcd(k // 2 - 1, k // 2 + 1) == 1:
        m, n, rule = k // 2 - 1, k // 2 + 1, "even-spread"
    else:
        m, n, rule = k // 2, k // 2 + 1, "even-consecutive"
    grid = gen_cfs(f_start, bandwidth, m, n)
    grid.params["split_rule"] = rule
    grid.params["budget_k"] = k
    return grid


def gen_nfs(f_start: float, bandwidth: float, n1: int, n2: int) -> FrequencyGrid:
    """Nested grid: ``n1`` dense points at ``df_base`` plus ``n2`` sparse at ``n1 * df_base``.

    Both sub-arrays are indexed from one, so the lowest probe sits at
    ``f_start + df_base``. The point ``n1 * df_base`` is shared.
    """
    _check_band(f_start, bandwidth)
    if n1 < 2 or n2 < 2:
        raise ValueError("NFS needs n1 >= 2 and n2 >= 2")
    df_base = bandwidth / (n1 * n2)
    idx = np.union1d(np.arange(1, n1 + 1), np.arange(1, n2 + 1) * n1)
    f = f_start + idx * df_base
    f[-1] = f_start + bandwidth
    params = {"n1": n1, "n2": n2, "df_base": df_base,
              "nominal_k": n1 + n2, "unique_k": int(idx.size)}
    return FrequencyGrid(f, "nfs", f_start, bandwidth, params)


def gen_nfs_auto(f_start: float, bandwidth: float, k: int) -> FrequencyGrid:
    """Nested grid with the split ``n1 = k // 2``, ``n2 = k - n1``."""
    if k < 4:
        raise ValueError("NFS needs a budget of at least 4 points")
    n1 = k // 2
    grid = gen_nfs(f_start, bandwidth, n1, k - n1)
    grid.params["budget_k"] = k
    return grid


def pfs_coefficients(bandwidth: float, k: int) -> tuple[float, float]:
    """Curvature ``a`` and minimum step ``kappa`` of the parabolic local step."""
    a = 3.0 * bandwidth / (k - 1) ** 3
    kappa = 3.0 * bandwidth / (4.0 * (k - 1))
    return a, kappa


def pfs_frequency(v, f_start: float, bandwidth: float, k: int):
    """Continuous PFS frequency law evaluated at (possibly fractional) index ``v``.

    Written in the normalized index ``u = (v - 1) / (k - 1)`` so that the
    endpoints ``v = 1`` and ``v = k`` evaluate to ``f_start`` and
    ``f_start + bandwidth`` without rounding.
    """
    u = (np.asarray(v, dtype=np.float64) - 1.0) / (k - 1)
    return f_start + bandwidth * ((u - 0.5) ** 3 + 0.125 + 0.75 * u)


def pfs_local_step(v, bandwidth: float, k: int):
    """Analytic local frequency step ``a (v - (k+1)/2)^2 + kappa`` (Hz per index)."""
    a, kappa = pfs_coefficients(bandwidth, k)
    v = np.asarray(v, dtype=np.float64)
    return a * (v - (k + 1) / 2) ** 2 + kappa


def gen_pfs(f_start: float, bandwidth: float, k: int) -> FrequencyGrid:
    """Parabolic frequency sampling with ``k`` points.

    The local step is a parabola about the band center whose minimum is half
    its maximum, which keeps neighbouring ambiguous lobes from overlapping.
    """
    _check_band(f_start, bandwidth)
    if k < 4:
        raise ValueError("PFS needs k >= 4")
    a, kappa = pfs_coefficients(bandwidth, k)
    f = pfs_frequency(np.arange(1, k + 1), f_start, bandwidth, k)
    return FrequencyGrid(f, "pfs", f_start, bandwidth, {"a": a, "kappa": kappa})


def custom_grid(frequencies, scheme_params: dict | None = None) -> FrequencyGrid:
    """Wrap an arbitrary increasing frequency list."""
    f = np.asarray(frequencies, dtype=np.float64)
    if f.size < 2:
        raise ValueError("a frequency grid needs at least two points")
    return FrequencyGrid(f, "custom", float(f[0]), float(f[-1] - f[0]),
                         dict(scheme_params or {}))


def local_steps(grid: FrequencyGrid) -> np.ndarray:
    """Local frequency step at every index.

    PFS uses the analytic derivative; every other scheme uses central
    differences with one-sided differences at the ends.
    """
    if grid.scheme == "pfs":
        return pfs_local_step(np.arange(1, grid.k_count + 1),
                              grid.bandwidth, grid.k_count)
    return np.gradient(grid.frequencies)


def local_step(grid: FrequencyGrid, index: int) -> float:
    """Local frequency step at the 1-based ``index``."""
    if not 1 <= index <= grid.k_count:
        raise IndexError(f"index {index} outside 1..{grid.k_count}")
    return float(local_steps(grid)[index - 1])


def predicted_udr(grid: FrequencyGrid) -> float | None:
    """Theoretical unambiguous delay range in seconds.

    Returns ``math.inf`` for PFS, which has no periodic ambiguity, and
    ``None`` for custom grids where no closed form exists.
    """
    if grid.scheme == "ufs":
        return (grid.k_count - 1) / grid.bandwidth
    if grid.scheme in ("cfs", "nfs"):
        return 1.0 / grid.params["df_base"]
    if grid.scheme == "pfs":
        return math.inf
    return None


def _jsonable(params: dict) -> dict:
    out = {}
    for key, val in params.items():
        if isinstance(val, np.generic):
            val = val.item()
        out[key] = val
    return out


def scheme_to_dict(grid: FrequencyGrid) -> dict:
    return {
        "scheme": grid.scheme,
        "f_start_hz": float(grid.f_start),
        "bandwidth_hz": float(grid.bandwidth),
        "k": grid.k_count,
        "frequencies_hz": [float(f) for f in grid.frequencies],
        "params": _jsonable(grid.params),
    }


def scheme_from_dict(data: dict) -> FrequencyGrid:
    """Rebuild a grid from its scheme-file mapping; the frequency list is authoritative."""
    try:
        freqs = data["frequencies_hz"]
        scheme = data.get("scheme", "custom")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scheme record: {exc}") from None
    f = np.asarray(freqs, dtype=np.float64)
    if "k" in data and int(data["k"]) != f.size:
        raise ValueError(f"scheme file declares k={data['k']} but lists {f.size} frequencies")
    f_start = float(data.get("f_start_hz", f[0]))
    bandwidth = float(data.get("bandwidth_hz", f[-1] - f[0]))
    return FrequencyGrid(f, scheme, f_start, bandwidth, dict(data.get("params", {})))


def save_scheme(grid: FrequencyGrid, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scheme_to_dict(grid), indent=2))
    return path


def load_scheme(path) -> FrequencyGrid:
    return scheme_from_dict(json.loads(Path(path).read_text()))


def make_grid(scheme: str, f_start: float, bandwidth: float, k: int | None = None,
              **kwargs) -> FrequencyGrid:
    """Dispatch by scheme name.

    ``k`` is the point budget for the automatic splits; explicit ``m``/``n``
    (CFS) or ``n1``/``n2`` (NFS) override it.
    """
    scheme = scheme.lower()
    if scheme == "ufs":
        return gen_ufs(f_start, bandwidth, k)
    if scheme == "pfs":
        return gen_pfs(f_start, bandwidth, k)
    if scheme == "cfs":
        if kwargs.get("m") is not None and kwargs.get("n") is not None:
            return gen_cfs(f_start, bandwidth, kwargs["m"], kwargs["n"])
        return gen_cfs_auto(f_start, bandwidth, k)
    if scheme == "nfs":
        if kwargs.get("n1") is not None and kwargs.get("n2") is not None:
            return gen_nfs(f_start, bandwidth, kwargs["n1"], kwargs["n2"])
        return gen_nfs_auto(f_start, bandwidth, k)
    raise ValueError(f"unknown scheme {scheme!r}")
