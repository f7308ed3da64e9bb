"""Configured experiment runners behind the ``dissim`` command.

A configuration is an INI file with one section per parameter block::

    [run]       seed, shots
    [lattice]   Omega, Gamma, beta, k, dt, n_steps, n0, grid_points, n_cut
    [noise]     p0, p1, T, reps
    [sweep]     omega_min, omega_max, points, Gamma, beta, k, steps, grid_points, reps
    [hubbard]   U, B, beta, filling (or mu), order, steps, snapshots
    [fit]       steps, trials, shots (the shot count noise-fit uses)
    [verify]    tolerance_scale

Missing keys take the defaults in :data:`DEFAULTS`.  Every runner writes
CSV files into an output directory and returns the list of paths written.
"""

from __future__ import annotations

import configparser
import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import hubbard as hb
from .channels import ValidationError, trace_distance
from .lattice import (
    DensitySeries,
    LatticeParams,
    dc_current,
    dispersion,
    fermi,
    sweep_timestep,
    steady_state_nkm,
    steady_current,
    trotter_recurrence,
)
from .lindblad import scalar_nk_solution
from .noise import NoiseParams, fit_noise, run_recurrence, synthetic_data
from .postprocess import (
    PeriodCurve,
    center,
    curve_to_csv,
    discard_transient,
    extrapolate_r,
    final_period,
    floquet_average,
    pipeline,
    series_to_csv,
    stretch,
)

EXPERIMENTS = ("lattice-evolve", "current-sweep", "hubbard-thermal", "noise-fit", "verify")

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {"seed": "20210601", "shots": "0"},
    "lattice": {
        "Omega": "0.5", "Gamma": "0.1", "beta": "5", "k": "0", "dt": "0.7",
        "n_steps": "1000", "n0": "1", "grid_points": "200", "n_cut": "30",
    },
    "noise": {"p0": "0.97", "p1": "0.91", "T": "0.06", "reps": "1,2,3,4"},
    "sweep": {
        "omega_min": "0.1", "omega_max": "2.0", "points": "20", "Gamma": "0.1",
        "beta": "5", "k": "0", "steps": "50", "grid_points": "200", "reps": "2,3,4",
    },
    "hubbard": {
        "U": "1", "B": "0.25", "beta": "2", "filling": "0.83", "mu": "",
        "order": "0,2,3,1", "steps": "19", "snapshots": "0,5,19",
    },
    "fit": {"steps": "400", "trials": "1", "shots": "8192"},
    "verify": {"tolerance_scale": "1"},
}


def threads() -> int:
    """Worker cap from ``DISSIM_THREADS`` (default 1)."""
    raw = os.environ.get("DISSIM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValidationError(f"DISSIM_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


@dataclass
class ExperimentConfig:
    experiment: str
    sections: dict
    seed: int
    shots: int
    out: Path

    def get(self, section: str, key: str) -> str:
        return self.sections[section][key]

    def num(self, section: str, key: str) -> float:
        raw = self.get(section, key)
        try:
            return float(raw)
        except ValueError as exc:
            raise ValidationError(f"[{section}] {key} = {raw!r} is not a number") from exc

    def int(self, section: str, key: str) -> int:
        value = self.num(section, key)
        if value != int(value):
            raise ValidationError(f"[{section}] {key} must be an integer, got {value}")
        return int(value)

    def ints(self, section: str, key: str) -> tuple[int, ...]:
        raw = self.get(section, key)
        try:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        except ValueError as exc:
            raise ValidationError(f"[{section}] {key} = {raw!r} is not a list of integers") from exc


def load_config(
    experiment: str,
    path: str | Path | None = None,
    out: str | Path = ".",
    seed: int | None = None,
    shots: int | None = None,
    text: str | None = None,
) -> ExperimentConfig:
    """Read an INI config, fill defaults and apply command-line overrides."""
    if experiment not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep Omega / Gamma / T capitalised
    if path is not None:
        if not Path(path).exists():
            raise ValidationError(f"config file {path} not found")
        parser.read(path)
    if text is not None:
        parser.read_string(text)
    sections = {}
    for name, defaults in DEFAULTS.items():
        merged = dict(defaults)
        if parser.has_section(name):
            for key, value in parser.items(name):
                if key not in defaults:
                    raise ValidationError(f"unknown key [{name}] {key}")
                merged[key] = value
        sections[name] = merged
    unknown = set(parser.sections()) - set(DEFAULTS)
    if unknown:
        raise ValidationError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    cfg = ExperimentConfig(experiment, sections, 0, 0, Path(out))
    cfg.seed = int(seed) if seed is not None else cfg.int("run", "seed")
    # noise-fit draws its own synthetic data, so it reads [fit] shots instead of [run] shots
    fallback = ("fit", "shots") if experiment == "noise-fit" else ("run", "shots")
    cfg.shots = int(shots) if shots is not None else cfg.int(*fallback)
    if cfg.shots < 0:
        raise ValidationError("shots must be >= 0")
    return cfg


# --------------------------------------------------------------------------
# parameter blocks
# --------------------------------------------------------------------------


def lattice_params(cfg: ExperimentConfig) -> LatticeParams:
    return LatticeParams(
        Omega=cfg.num("lattice", "Omega"), Gamma=cfg.num("lattice", "Gamma"),
        beta=cfg.num("lattice", "beta"), k=cfg.num("lattice", "k"),
        dt=cfg.num("lattice", "dt"), n_steps=cfg.int("lattice", "n_steps"),
    )


def noise_params(cfg: ExperimentConfig) -> NoiseParams:
    return NoiseParams(p0=cfg.num("noise", "p0"), p1=cfg.num("noise", "p1"), T=cfg.num("noise", "T"))


def hubbard_params(cfg: ExperimentConfig) -> hb.HubbardParams:
    U, B, beta = cfg.num("hubbard", "U"), cfg.num("hubbard", "B"), cfg.num("hubbard", "beta")
    if cfg.get("hubbard", "mu").strip():
        mu = cfg.num("hubbard", "mu")
    else:
        mu = hb.mu_for_filling(cfg.num("hubbard", "filling"), B, beta, U)
    return hb.HubbardParams(mu=mu, B=B, beta=beta, U=U)


def sample_series(series: DensitySeries, shots: int, rng: np.random.Generator) -> DensitySeries:
    """Binomial estimate of each occupation from ``shots`` measurements."""
    if shots <= 0:
        return series
    p = np.clip(series.values, 0.0, 1.0)
    return DensitySeries(series.times, rng.binomial(shots, p) / shots, series.params, {"shots": shots})


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# runners
# --------------------------------------------------------------------------


def run_lattice_evolve(cfg: ExperimentConfig) -> list[Path]:
    """Ideal and noise-model series, their period averages and the processed curve."""
    lp = lattice_params(cfg)
    noise = noise_params(cfg)
    reps = cfg.ints("noise", "reps")
    n0 = cfg.num("lattice", "n0")
    grid_points = cfg.int("lattice", "grid_points")
    n_cut = cfg.int("lattice", "n_cut")
    rng = np.random.default_rng(cfg.seed)
    out = cfg.out
    written = []

    ideal = trotter_recurrence(lp, n0)
    written.append(_write(out / "series_ideal.csv", series_to_csv(ideal)))
    ideal_curve = floquet_average(discard_transient(ideal, n_cut), grid_points)
    written.append(_write(out / "curve_ideal.csv", curve_to_csv(ideal_curve)))
    steady = PeriodCurve(ideal_curve.grid, steady_state_nkm(lp, ideal_curve.k_m(lp.k) % (2 * np.pi)), 0, lp.tau)
    written.append(_write(out / "curve_steady.csv", curve_to_csv(steady)))

    noisy = {}
    for r in reps:
        series = sample_series(run_recurrence(lp, noise.with_(r=r), n0=n0), cfg.shots, rng)
        noisy[r] = series
        written.append(_write(out / f"series_r{r}.csv", series_to_csv(series)))
        curve = floquet_average(discard_transient(series, n_cut), grid_points)
        written.append(_write(out / f"curve_r{r}.csv", curve_to_csv(curve)))
    if all(r in noisy for r in (2, 3, 4)):
        processed = pipeline({r: noisy[r] for r in (2, 3, 4)}, lp.Gamma, lp.Omega, n_cut, grid_points)
        written.append(_write(out / "curve_processed.csv", curve_to_csv(processed)))
    return written


@dataclass
class SweepPoint:
    Omega: float
    dt: float
    J_lindblad: float
    J_ideal_trotter: float
    J_noisy_postprocessed: float
    trotter_bound: float
    halving_estimate: float
    converged: bool

    @property
    def within_tolerance(self) -> bool:
        tol = max(0.05 * abs(self.J_lindblad), self.trotter_bound)
        return abs(self.J_ideal_trotter - self.J_lindblad) <= tol


def _series_current(series: DensitySeries, k: float, grid_points: int) -> float:
    km, n = final_period(series, grid_points).as_nkm(k)
    return dc_current(n, km)


def sweep_point(
    Omega: float,
    Gamma: float = 0.1,
    beta: float = 5.0,
    k: float = 0.0,
    steps: int = 50,
    grid_points: int = 200,
    noise: NoiseParams | None = None,
    reps=(2, 3, 4),
    shots: int = 0,
    rng: np.random.Generator | None = None,
) -> SweepPoint:
    """DC current at one field strength from ``steps`` Trotter steps.

    The step is ``dt = tau (0.022 + 0.031 Omega)`` and the mode starts in
    its instantaneous thermal occupation ``n_F(eps_k(0))``.  The last
    Floquet period of the run is read as ``n(k_m)``.  ``trotter_bound`` is
    ``(4/pi) max_t |n_Trotter - n_exact|`` over the run (the current
    integral of a pointwise bound); ``halving_estimate`` is
    ``2 |J(dt) - J(dt/2)|``.  ``converged`` records whether the exact
    solution's current after the same time is within 5% of the steady value.
    """
    dt = sweep_timestep(Omega)
    lp = LatticeParams(Omega=Omega, Gamma=Gamma, beta=beta, k=k, dt=dt, n_steps=steps)
    n0 = float(fermi(dispersion(lp, 0), beta))
    J_l = steady_current(lp, grid_points)
    ideal = trotter_recurrence(lp, n0)
    J_t = _series_current(ideal, k, grid_points)
    exact_values = scalar_nk_solution(lp, n0, ideal.times)
    exact = DensitySeries(ideal.times, exact_values, lp)
    bound = 4 / np.pi * float(np.max(np.abs(ideal.values - exact_values)))
    J_exact = _series_current(exact, k, grid_points)
    half = trotter_recurrence(lp.with_(dt=dt / 2, n_steps=2 * steps), n0)
    halving = 2 * abs(J_t - _series_current(half, k, grid_points))
    J_noisy = float("nan")
    if noise is not None:
        curves = {}
        for r in reps:
            series = run_recurrence(lp, noise.with_(r=r), n0=n0, a0=1.0)
            if shots:
                series = sample_series(series, shots, rng)
            curves[r] = final_period(series, grid_points)
        curve = stretch(center(extrapolate_r(curves, reps=reps)), Gamma, Omega)
        km, n = curve.as_nkm(k)
        J_noisy = dc_current(n, km)
    converged = abs(J_exact - J_l) <= 0.05 * abs(J_l)
    return SweepPoint(Omega, dt, J_l, J_t, J_noisy, bound, halving, bool(converged))


def omega_grid(cfg: ExperimentConfig) -> np.ndarray:
    lo, hi, n = cfg.num("sweep", "omega_min"), cfg.num("sweep", "omega_max"), cfg.int("sweep", "points")
    if lo <= 0 or hi < lo or n < 1:
        raise ValidationError("sweep needs 0 < omega_min <= omega_max and points >= 1")
    return np.linspace(lo, hi, n)


def current_sweep(cfg: ExperimentConfig) -> list[SweepPoint]:
    grid = omega_grid(cfg)
    noise = noise_params(cfg)
    reps = cfg.ints("sweep", "reps")
    kwargs = dict(
        Gamma=cfg.num("sweep", "Gamma"), beta=cfg.num("sweep", "beta"), k=cfg.num("sweep", "k"),
        steps=cfg.int("sweep", "steps"), grid_points=cfg.int("sweep", "grid_points"),
        noise=noise, reps=reps, shots=cfg.shots,
    )

    def task(i):
        # one generator per grid point keeps results independent of scheduling
        return sweep_point(float(grid[i]), rng=np.random.default_rng([cfg.seed, i]), **kwargs)

    with ThreadPoolExecutor(max_workers=threads()) as pool:
        return list(pool.map(task, range(len(grid))))


def run_current_sweep(cfg: ExperimentConfig) -> list[Path]:
    points = current_sweep(cfg)
    header = [
        "Omega", "dt", "J_lindblad", "J_ideal_trotter", "J_noisy_postprocessed",
        "trotter_bound", "halving_estimate", "converged",
    ]
    rows = [
        [p.Omega, p.dt, p.J_lindblad, p.J_ideal_trotter, p.J_noisy_postprocessed,
         p.trotter_bound, p.halving_estimate, int(p.converged)]
        for p in points
    ]
    return [_write(cfg.out / "current_sweep.csv", _table(header, rows))]


def run_hubbard_thermal(cfg: ExperimentConfig) -> list[Path]:
    params = hubbard_params(cfg)
    order = cfg.ints("hubbard", "order")
    steps = cfg.int("hubbard", "steps")
    snapshots = cfg.ints("hubbard", "snapshots")
    states = hb.prepare_thermal(params, order, steps)
    target = hb.thermal_state(params)
    gibbs = np.real(np.diag(target))
    labels = hb.STATE_LABELS
    header = ["step"] + [f"p_{s}" for s in labels] + [f"gibbs_{s}" for s in labels] + ["trace_distance"]
    rows = []
    for s, rho in enumerate(states):
        rows.append([s, *np.real(np.diag(rho)).astype(float), *gibbs.astype(float), trace_distance(rho, target)])
    written = [_write(cfg.out / "hubbard_populations.csv", _table(header, rows))]
    for s in snapshots:
        if not 0 <= s <= steps:
            raise ValidationError(f"snapshot step {s} outside 0..{steps}")
        rho = states[s]
        cells = [[i, j, float(rho[i, j].real), float(rho[i, j].imag)] for i in range(4) for j in range(4)]
        written.append(_write(cfg.out / f"hubbard_rho_step{s}.csv", _table(["row", "col", "re", "im"], cells)))
    return written


def run_noise_fit(cfg: ExperimentConfig) -> list[Path]:
    """Fit (T, p0, p1) to synthetic noise-model data, optionally with shot noise."""
    lp = lattice_params(cfg)
    truth = noise_params(cfg)
    reps = cfg.ints("noise", "reps")
    steps = cfg.int("fit", "steps")
    trials = cfg.int("fit", "trials")
    shots = cfg.shots
    n0 = cfg.num("lattice", "n0")
    rows = [["truth", truth.T, truth.p0, truth.p1, 0.0]]
    for trial in range(trials):
        rng = np.random.default_rng([cfg.seed, trial])
        data = synthetic_data(lp, truth, reps=reps, n_steps=steps, shots=shots, rng=rng, n0=n0)
        fit = fit_noise(data, lp, n0=n0, workers=threads())
        rows.append([str(trial), fit.noise.T, fit.noise.p0, fit.noise.p1, fit.residual])
    return [_write(cfg.out / "noise_fit.csv", _table(["trial", "T", "p0", "p1", "residual"], rows))]


def run_verify(cfg: ExperimentConfig) -> tuple[list[Path], bool]:
    from .verify import report_text, run_all

    results = run_all(seed=cfg.seed, tolerance_scale=cfg.num("verify", "tolerance_scale"))
    path = _write(cfg.out / "verify_report.csv", report_text(results))
    return [path], all(r.passed for r in results)


_BLOCKS = {
    "lattice-evolve": ("lattice", "noise"),
    "current-sweep": ("sweep", "noise"),
    "hubbard-thermal": ("hubbard",),
    "noise-fit": ("lattice", "noise", "fit"),
    "verify": ("verify",),
}


def check_config(cfg: ExperimentConfig) -> None:
    """Build every parameter block the experiment uses, so bad values fail before any work."""
    for block in _BLOCKS[cfg.experiment]:
        if block == "lattice":
            lattice_params(cfg)
            if not 0 <= cfg.num("lattice", "n0") <= 1:
                raise ValidationError("[lattice] n0 must lie in [0, 1]")
            cfg.int("lattice", "grid_points"), cfg.int("lattice", "n_cut")
        elif block == "noise":
            noise_params(cfg)
            if not cfg.ints("noise", "reps") or min(cfg.ints("noise", "reps")) < 1:
                raise ValidationError("[noise] reps must list reset counts >= 1")
        elif block == "sweep":
            omega_grid(cfg)
            if cfg.int("sweep", "steps") < 1:
                raise ValidationError("[sweep] steps must be >= 1")
        elif block == "hubbard":
            hubbard_params(cfg)
            hb.build_cycle(hubbard_params(cfg), cfg.ints("hubbard", "order"))
        elif block == "fit":
            if cfg.int("fit", "steps") < 1 or cfg.int("fit", "trials") < 1:
                raise ValidationError("[fit] steps and trials must be >= 1")
        elif block == "verify":
            if cfg.num("verify", "tolerance_scale") <= 0:
                raise ValidationError("[verify] tolerance_scale must be > 0")


def run(cfg: ExperimentConfig) -> tuple[list[Path], bool]:
    """Validate, then dispatch to the configured experiment; returns ``(paths, ok)``."""
    check_config(cfg)
    if cfg.experiment == "verify":
        return run_verify(cfg)
    runner = {
        "lattice-evolve": run_lattice_evolve,
        "current-sweep": run_current_sweep,
        "hubbard-thermal": run_hubbard_thermal,
        "noise-fit": run_noise_fit,
    }[cfg.experiment]
    return runner(cfg), True
