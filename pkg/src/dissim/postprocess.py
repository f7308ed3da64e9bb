"""Turning raw occupation series into one clean Floquet period.

The pipeline is ``discard_transient -> floquet_average -> extrapolate_r ->
center -> stretch``.  Period curves live on the uniform grid
``t_mod_tau = j tau / grid_points`` with ``tau = 2 pi / Omega``; a sample at
absolute time ``t`` belongs to grid point ``t mod tau``.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import ValidationError
from .lattice import DensitySeries, LatticeParams, n_max

DEFAULT_CUT = 30


@dataclass
class PeriodCurve:
    """Occupation over one Floquet period.

    ``grid`` holds times in ``[0, tau)`` and ``values`` the (averaged)
    occupation there; ``n_periods`` counts how many periods were averaged.
    """

    grid: np.ndarray
    values: np.ndarray
    n_periods: int
    tau: float

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise ValidationError("grid and values must have the same shape")

    def replace_values(self, values) -> "PeriodCurve":
        return PeriodCurve(self.grid.copy(), np.asarray(values, dtype=float), self.n_periods, self.tau)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def k_m(self, k: float) -> np.ndarray:
        """Gauge-invariant momentum of each grid point, wrapped to ``[-pi, pi)``."""
        km = k + 2 * np.pi * self.grid / self.tau
        return (km + np.pi) % (2 * np.pi) - np.pi

    def as_nkm(self, k: float) -> tuple[np.ndarray, np.ndarray]:
        """``(k_m, n)`` sorted by ``k_m``, ready for :func:`dissim.lattice.dc_current`."""
        km = self.k_m(k)
        order = np.argsort(km)
        return km[order], self.values[order]


def discard_transient(series: DensitySeries, n_cut: int = DEFAULT_CUT) -> DensitySeries:
    """Drop the first ``n_cut`` samples."""
    if n_cut < 0:
        raise ValidationError("n_cut must be >= 0")
    if n_cut >= len(series):
        raise ValidationError(f"series of length {len(series)} is too short to drop {n_cut} samples")
    return DensitySeries(series.times[n_cut:], series.values[n_cut:], series.params, dict(series.meta))


def interpolate_quadratic(times: np.ndarray, values: np.ndarray, targets) -> np.ndarray:
    """Local three-point Lagrange interpolation on a uniform time grid.

    Each target uses the sample nearest to it and its two neighbours
    (shifted inward at the ends), so the error is ``O(dt^3)``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if len(times) < 3:
        raise ValidationError("quadratic interpolation needs at least 3 samples")
    h = times[1] - times[0]
    if np.max(np.abs(np.diff(times) - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValidationError("samples must be uniformly spaced")
    lo, hi = times[0] - 1e-9 * abs(h), times[-1] + 1e-9 * abs(h)
    if np.any(targets < lo) or np.any(targets > hi):
        raise ValidationError("interpolation target outside the sampled range")
    x = (targets - times[0]) / h
    mid = np.clip(np.rint(x).astype(int), 1, len(times) - 2)
    u = x - mid
    y0, y1, y2 = values[mid - 1], values[mid], values[mid + 1]
    return y1 + 0.5 * u * (y2 - y0) + 0.5 * u * u * (y2 - 2 * y1 + y0)


def _tau(series: DensitySeries, tau: float | None) -> float:
    if tau is not None:
        return float(tau)
    if series.params is None or series.params.Omega <= 0:
        raise ValidationError("Floquet period unknown: pass tau or a series with Omega > 0")
    return series.params.tau


def floquet_average(
    series: DensitySeries,
    grid_points: int = 200,
    tau: float | None = None,
) -> PeriodCurve:
    """Average the series over every complete Floquet period it spans.

    Period ``l`` covers ``[l tau, (l + 1) tau)`` in absolute time; only
    periods lying wholly inside the sampled range are used, and the result
    is their mean (not their sum).
    """
    tau = _tau(series, tau)
    t0, t1 = series.times[0], series.times[-1]
    first = int(np.ceil(t0 / tau - 1e-9))
    last = int(np.floor(t1 / tau + 1e-9))  # exclusive end index of complete periods
    n_periods = last - first
    if n_periods < 2:
        raise ValidationError(f"series spans {n_periods} complete Floquet period(s); need at least 2")
    grid = tau * np.arange(grid_points) / grid_points
    targets = (grid[None, :] + tau * np.arange(first, last)[:, None]).ravel()
    samples = interpolate_quadratic(series.times, series.values, targets).reshape(n_periods, grid_points)
    return PeriodCurve(grid, samples.mean(axis=0), n_periods, tau)


def final_period(series: DensitySeries, grid_points: int = 200, tau: float | None = None) -> PeriodCurve:
    """Reconstruct one period from the last ``tau`` of data.

    Used when a run is shorter than two periods (the 50-step current sweep).
    """
    tau = _tau(series, tau)
    t1 = series.times[-1]
    if t1 - series.times[0] < tau - 1e-9:
        raise ValidationError("series is shorter than one Floquet period")
    grid = tau * np.arange(grid_points) / grid_points
    # absolute time in (t1 - tau, t1] congruent to each grid point
    shift = np.floor((t1 - grid) / tau)
    targets = grid + tau * shift
    values = interpolate_quadratic(series.times, series.values, targets)
    return PeriodCurve(grid, values, 1, tau)


def center(curve: PeriodCurve) -> PeriodCurve:
    """Shift the curve so its period mean is exactly 0.5."""
    return curve.replace_values(curve.values - curve.mean + 0.5)


def stretch(curve: PeriodCurve, Gamma: float, Omega: float) -> PeriodCurve:
    """Scale about 0.5 so the maximum equals ``n_max(Gamma, Omega)``.

    A curve with no excursion above 0.5 is returned unchanged with a warning.
    """
    amp = float(np.max(curve.values)) - 0.5
    if amp <= 1e-12:
        warnings.warn("curve has no amplitude above 1/2; stretch skipped", RuntimeWarning, stacklevel=2)
        return curve.replace_values(curve.values.copy())
    factor = (n_max(Gamma, Omega) - 0.5) / amp
    return curve.replace_values(0.5 + factor * (curve.values - 0.5))


def extrapolate_r(curves: dict[int, PeriodCurve], reps=(2, 3, 4), include_r1: bool = False) -> PeriodCurve:
    """Quadratic extrapolation in the reset count ``r`` to ``r = 0``.

    By default the fit passes exactly through ``r = 2, 3, 4``.  With
    ``include_r1`` the curves for ``r = 1..4`` are fitted by least squares.
    """
    reps = (1, 2, 3, 4) if include_r1 else tuple(reps)
    missing = [r for r in reps if r not in curves]
    if missing:
        raise ValidationError(f"missing curves for r = {missing}")
    ref = curves[reps[0]]
    for r in reps[1:]:
        if curves[r].grid.shape != ref.grid.shape or np.max(np.abs(curves[r].grid - ref.grid)) > 1e-12:
            raise ValidationError("curves must share a grid")
    r_arr = np.asarray(reps, dtype=float)
    design = np.vander(r_arr, 3, increasing=True)
    data = np.stack([curves[r].values for r in reps])
    coef, *_ = np.linalg.lstsq(design, data, rcond=None)
    return PeriodCurve(ref.grid.copy(), coef[0], min(curves[r].n_periods for r in reps), ref.tau)


def pipeline(
    series_by_r: dict[int, DensitySeries],
    Gamma: float,
    Omega: float,
    n_cut: int = DEFAULT_CUT,
    grid_points: int = 200,
    include_r1: bool = False,
) -> PeriodCurve:
    """discard -> average -> extrapolate -> center -> stretch."""
    curves = {
        r: floquet_average(discard_transient(s, n_cut), grid_points) for r, s in series_by_r.items()
    }
    curve = extrapolate_r(curves, include_r1=include_r1)
    return stretch(center(curve), Gamma, Omega)


def max_distance(a: PeriodCurve, b: PeriodCurve) -> float:
    return float(np.max(np.abs(a.values - b.values)))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is None:
        return text
    Path(path).write_text(text)
    return text


def series_to_csv(series: DensitySeries, path=None) -> str:
    """Columns ``t,n`` with full-precision floats."""
    return _write_rows(path, ["t", "n"], ([repr(float(t)), repr(float(n))] for t, n in zip(series.times, series.values)))


def curve_to_csv(curve: PeriodCurve, path=None) -> str:
    """Columns ``t_mod_tau,n_ave,n_periods``."""
    rows = ([repr(float(t)), repr(float(v)), str(curve.n_periods)] for t, v in zip(curve.grid, curve.values))
    return _write_rows(path, ["t_mod_tau", "n_ave", "n_periods"], rows)


def _read(text_or_path, expected):
    text = str(text_or_path)
    if "\n" not in text and Path(text).exists():
        text = Path(text).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != expected:
        raise ValidationError(f"expected header {expected}, got {rows[0] if rows else None}")
    return rows[1:]


def series_from_csv(text_or_path, params: LatticeParams | None = None) -> DensitySeries:
    rows = _read(text_or_path, ["t", "n"])
    arr = np.array([[float(a), float(b)] for a, b in rows]).reshape(-1, 2)
    return DensitySeries(arr[:, 0], arr[:, 1], params)


def curve_from_csv(text_or_path, tau: float) -> PeriodCurve:
    rows = _read(text_or_path, ["t_mod_tau", "n_ave", "n_periods"])
    grid = np.array([float(r[0]) for r in rows])
    values = np.array([float(r[1]) for r in rows])
    n_periods = int(rows[0][2]) if rows else 0
    return PeriodCurve(grid, values, n_periods, tau)
