"""Acceptance checks, one function per criterion.

Each check returns a :class:`CriterionResult` whose ``measured`` and
``tolerance`` fields are the numbers written to the verify report
(``criterion,measured,tolerance,pass``).  ``tolerance_scale`` multiplies every
tolerance, so ``0.01`` tightens the whole suite a hundredfold.
"""

from __future__ import annotations

import filecmp
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import circuits as qc
from . import hubbard as hb
from .channels import (
    KrausChannel,
    apply_channel,
    map_distance,
    random_density,
    trace_distance,
    validate_channel,
)
from .lattice import (
    LatticeParams,
    evolve_density,
    n_max,
    nkm_grid,
    steady_state_nkm,
    trotter_channel,
    trotter_recurrence,
)
from .lindblad import scalar_nk_solution
from .noise import (
    IDEAL,
    NoiseParams,
    closed_form_ns,
    damping_channel,
    fit_noise,
    kernel_base,
    noisy_reset_channel,
    run_recurrence,
    simulate_channels,
    synthetic_data,
)
from .postprocess import discard_transient, floquet_average, max_distance, pipeline

DEVICE_NOISE = NoiseParams(p0=0.97, p1=0.91, T=0.06, r=1)


@dataclass
class CriterionResult:
    number: int
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{self.number}:{self.name},{self.measured!r},{self.tolerance!r},{'pass' if self.passed else 'FAIL'}"


def _result(number, name, measured, tolerance, passed=None, **detail) -> CriterionResult:
    measured, tolerance = float(measured), float(tolerance)
    if passed is None:
        passed = measured <= tolerance
    return CriterionResult(number, name, measured, tolerance, bool(passed), detail)


# --------------------------------------------------------------------------
# random draws
# --------------------------------------------------------------------------


def random_lattice(rng: np.random.Generator, max_weight: float = 1.0) -> LatticeParams:
    """Admissible random mode parameters (``2 Gamma dt <= max_weight``)."""
    Gamma = rng.uniform(0.01, 0.5)
    dt = rng.uniform(0.01, max_weight / (2 * Gamma))
    return LatticeParams(
        Omega=rng.uniform(0.0, 2.0), Gamma=Gamma, beta=rng.uniform(0.0, 20.0),
        k=rng.uniform(-np.pi, np.pi), dt=dt, n_steps=1,
    )


def random_hubbard(rng: np.random.Generator) -> hb.HubbardParams:
    return hb.HubbardParams(mu=rng.uniform(-1.0, 2.0), B=rng.uniform(-1.0, 1.0), beta=rng.uniform(0.0, 10.0))


GRAY_CYCLES = [c for c in hb.all_cycles() if all((c[i] ^ c[(i + 1) % 4]) in (1, 2) for i in range(4))]


# --------------------------------------------------------------------------
# criteria
# --------------------------------------------------------------------------


def criterion_1(seed: int = 0, scale: float = 1.0, draws: int = 1000) -> CriterionResult:
    """Completeness of lattice and Hubbard channels over random draws."""
    rng = np.random.default_rng([seed, 1])
    worst = 0.0
    cycles = hb.all_cycles()
    for _ in range(draws):
        lp = random_lattice(rng)
        worst = max(worst, validate_channel(trotter_channel(lp, int(rng.integers(0, 1000)))))
        cyc = hb.build_cycle(random_hubbard(rng), cycles[int(rng.integers(0, 6))])
        worst = max(worst, validate_channel(hb.cycle_channel(cyc)))
    return _result(1, "channel_completeness", worst, 1e-12 * scale, draws=draws)


TROTTER_PARAMS = dict(Omega=0.5, Gamma=0.1, beta=5.0, k=0.0)
TROTTER_T_MAX = 20.0
TROTTER_DT0 = 0.2


def trotter_errors(dts=(0.2, 0.1, 0.05, 0.025), n0: float = 0.0) -> list[float]:
    """``max_t |n_Trotter - n_exact|`` up to ``t = 20`` for each step size."""
    errs = []
    for dt in dts:
        lp = LatticeParams(dt=dt, n_steps=int(round(TROTTER_T_MAX / dt)), **TROTTER_PARAMS)
        tr = trotter_recurrence(lp, n0)
        exact = scalar_nk_solution(lp, n0, tr.times)
        errs.append(float(np.max(np.abs(tr.values - exact))))
    return errs


def criterion_2(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    """First-order Trotter convergence: error ratio under halving in [1.6, 2.4]."""
    errs = trotter_errors()
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    worst = max(abs(r - 2.0) for r in ratios)
    return _result(2, "trotter_halving_ratio", worst, 0.4 * scale, ratios=ratios, errors=errs)


def criterion_3(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    """Floquet-averaged Trotter curve against the analytic steady state.

    1000 steps at ``dt = 0.2`` from the maximally mixed mode (``n0 = 1/2``);
    the tolerance is the criterion-2 error at the same ``dt``.  The period
    mean must be 0.5 within 1e-3; the reported ``measured`` is the curve
    deviation divided by its bound, so it must not exceed 1.
    """
    bound = trotter_errors(dts=(TROTTER_DT0,), n0=0.0)[0]
    lp = LatticeParams(dt=TROTTER_DT0, n_steps=1000, **TROTTER_PARAMS)
    curve = floquet_average(discard_transient(evolve_density(lp, 0.5), 30), 200)
    ref = steady_state_nkm(lp, curve.k_m(lp.k))
    dev = float(np.max(np.abs(curve.values - ref)))
    mean_err = abs(curve.mean - 0.5)
    ok = dev <= bound * scale and mean_err <= 1e-3 * scale
    return _result(3, "floquet_vs_steady_state", dev / bound, 1.0 * scale, ok,
                   deviation=dev, bound=bound, mean_error=mean_err)


def steady_maximum(lp: LatticeParams, points: int = 400, grid: int = 2000) -> float:
    """Maximum over ``k_m`` of the steady occupation, grid scan plus bounded refinement."""
    ks = nkm_grid(grid)
    vals = steady_state_nkm(lp, ks, points=points)
    j = int(np.argmax(vals))
    h = ks[1] - ks[0]
    res = minimize_scalar(lambda x: -steady_state_nkm(lp, x, points=points),
                          bounds=(ks[j] - h, ks[j] + h), method="bounded", options={"xatol": 1e-12})
    return max(float(vals[j]), -float(res.fun))


def criterion_4(seed: int = 0, scale: float = 1.0, pairs: int = 10) -> CriterionResult:
    """Zero-temperature (beta = 200) maximum against ``n_max``."""
    rng = np.random.default_rng([seed, 4])
    worst = 0.0
    for _ in range(pairs):
        lp = LatticeParams(Omega=rng.uniform(0.1, 2.0), Gamma=rng.uniform(0.05, 0.5), beta=200.0, dt=0.01)
        worst = max(worst, abs(steady_maximum(lp) - n_max(lp.Gamma, lp.Omega)))
    return _result(4, "zero_temperature_amplitude", worst, 1e-3 * scale, pairs=pairs)


def criterion_5(seed: int = 0, scale: float = 1.0, points: int = 10) -> CriterionResult:
    """Trotter DC current against the Lindblad steady current for Omega in [0.1, 1]."""
    from .experiments import sweep_point

    omegas = np.linspace(0.1, 1.0, points)
    worst = -np.inf
    rows = []
    for om in omegas:
        p = sweep_point(float(om))
        tol = max(0.05 * abs(p.J_lindblad), p.trotter_bound) * scale
        err = abs(p.J_ideal_trotter - p.J_lindblad)
        worst = max(worst, err / tol)
        rows.append((p.Omega, p.J_lindblad, p.J_ideal_trotter, p.trotter_bound, p.converged))
    unconverged = [r[0] for r in rows if not r[4]]
    return _result(5, "dc_current_vs_lindblad", worst, 1.0, rows=rows, unconverged=unconverged)


def hubbard_protocol_distances(steps: int = 19) -> list[float]:
    params = hb.protocol_params()
    target = hb.thermal_state(params)
    return [trace_distance(rho, target) for rho in hb.prepare_thermal(params, hb.DEFAULT_ORDER, steps)]


def criterion_6(seed: int = 0, scale: float = 1.0, draws: int = 50) -> CriterionResult:
    """Gibbs fixed point for every cycle; protocol convergence by step 19."""
    rng = np.random.default_rng([seed, 6])
    worst_fp = 0.0
    for _ in range(draws):
        params = random_hubbard(rng)
        target = hb.thermal_state(params)
        for order in hb.all_cycles():
            out = apply_channel(hb.cycle_channel(hb.build_cycle(params, order)), target)
            worst_fp = max(worst_fp, trace_distance(out, target))
    dist = hubbard_protocol_distances(19)
    ratios = np.array(dist[11:]) / np.array(dist[10:-1])
    geometric = bool(np.all(ratios < 1.0))
    ok = worst_fp < 1e-12 * scale and dist[19] < 1e-3 * scale and geometric
    return _result(6, "hubbard_fixed_point", dist[19], 1e-3 * scale, ok,
                   fixed_point=worst_fp, step_ratios=ratios.tolist())


def _random_ancilla_unitary(c: qc.Circuit, rng: np.random.Generator) -> qc.Circuit:
    """Insert random single-qubit rotations on every ancilla just before its reset."""
    out = qc.Circuit(c.width, system=c.system, ancillas=c.ancillas)
    first_reset = min(i for i, g in enumerate(c.gates) if g.kind == "RESET")
    out.gates.extend(c.gates[:first_reset])
    for a in c.ancillas:
        out.add("RZ", a, angle=rng.uniform(0, 2 * np.pi))
        out.add("RY", a, angle=rng.uniform(0, 2 * np.pi))
        out.add("RZ", a, angle=rng.uniform(0, 2 * np.pi))
    if len(c.ancillas) == 2:
        out.add("CNOT", c.ancillas[0], c.ancillas[1])
    out.gates.extend(c.gates[first_reset:])
    return out


def criterion_7(seed: int = 0, scale: float = 1.0, draws: int = 100) -> CriterionResult:
    """Circuit/channel equivalence and ancilla-unitary invariance."""
    rng = np.random.default_rng([seed, 7])
    worst = 0.0
    for _ in range(draws):
        lp = random_lattice(rng)
        step = int(rng.integers(0, 1000))
        block = qc.build_lattice_step(lp, step)
        target = qc.lattice_frame(trotter_channel(lp, step))
        worst = max(worst, map_distance(qc.circuit_to_channel(block), target))
        worst = max(worst, map_distance(qc.circuit_to_channel(_random_ancilla_unitary(block, rng)), target))

        params = random_hubbard(rng)
        cyc = hb.build_cycle(params, hb.all_cycles()[int(rng.integers(0, 6))])
        block = qc.build_hubbard_step(cyc)
        target = hb.cycle_channel(cyc)
        worst = max(worst, map_distance(qc.circuit_to_channel(block), target))
        worst = max(worst, map_distance(qc.circuit_to_channel(_random_ancilla_unitary(block, rng)), target))

        gray = hb.build_cycle(params, GRAY_CYCLES[int(rng.integers(0, len(GRAY_CYCLES)))])
        tblock = qc.build_hubbard_step_transpiled(gray)
        got = qc.transpiled_frame(qc.circuit_to_channel(tblock))
        worst = max(worst, map_distance(got, hb.cycle_channel(gray)))
    return _result(7, "circuit_channel_equivalence", worst, 1e-10 * scale, draws=draws)


NOISE_LATTICE = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0, k=0.0, dt=0.7, n_steps=400)


def criterion_8(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    """Recurrence vs channel simulation, closed form, and perturbation decay."""
    lp = NOISE_LATTICE
    rec_err = 0.0
    for r in (1, 2, 3, 4):
        noise = DEVICE_NOISE.with_(r=r)
        a = run_recurrence(lp, noise).values
        b = simulate_channels(lp, noise).values
        rec_err = max(rec_err, float(np.max(np.abs(a - b))))
    closed_err = 0.0
    decay_err = 0.0
    a0 = 0.9
    delta = 1e-3
    for r in (1, 2, 3, 4):
        noise = DEVICE_NOISE.with_(r=r)
        frozen = run_recurrence(lp, noise, n0=0.3, a0=a0, freeze_a=True).values
        closed = np.array([closed_form_ns(s, a0, lp, noise, n0=0.3) for s in range(lp.n_steps + 1)])
        closed_err = max(closed_err, float(np.max(np.abs(frozen - closed))))
        bumped = run_recurrence(lp, noise, n0=0.3 + delta, a0=a0, freeze_a=True).values
        q = kernel_base(a0, lp, noise)
        predicted = delta * q ** np.arange(lp.n_steps + 1)
        decay_err = max(decay_err, float(np.max(np.abs((bumped - frozen) - predicted))))
    ok = rec_err <= 1e-10 * scale and closed_err <= 1e-9 * scale and decay_err <= 1e-10 * scale
    return _result(8, "noise_model_consistency", rec_err, 1e-10 * scale, ok,
                   closed_form=closed_err, perturbation=decay_err)


def criterion_9(seed: int = 0, scale: float = 1.0, trials: int = 20, shots: int = 8192, workers: int = 1) -> CriterionResult:
    """Recovery of (T, p0, p1) from noiseless and shot-noise synthetic data."""
    lp = NOISE_LATTICE
    truth = np.array([DEVICE_NOISE.T, DEVICE_NOISE.p0, DEVICE_NOISE.p1])
    fit = fit_noise(synthetic_data(lp, DEVICE_NOISE), lp, workers=workers).noise
    exact_err = float(np.max(np.abs(np.array([fit.T, fit.p0, fit.p1]) - truth)))
    worst_rel = 0.0
    for trial in range(trials):
        rng = np.random.default_rng([seed, 9, trial])
        data = synthetic_data(lp, DEVICE_NOISE, shots=shots, rng=rng)
        est = fit_noise(data, lp, workers=workers).noise
        rel = np.abs(np.array([est.T, est.p0, est.p1]) - truth) / truth
        worst_rel = max(worst_rel, float(np.max(rel)))
    ok = exact_err <= 1e-6 * scale and worst_rel <= 0.05 * scale
    return _result(9, "noise_fit_recovery", worst_rel, 0.05 * scale, ok, noiseless=exact_err, trials=trials)


def pipeline_gain(lp: LatticeParams, noise: NoiseParams) -> tuple[float, float]:
    """(best raw distance, processed distance) to the ideal period curve."""
    data = {r: run_recurrence(lp, noise.with_(r=r)) for r in (2, 3, 4)}
    ideal = floquet_average(discard_transient(run_recurrence(lp, IDEAL)), 200)
    raw = min(max_distance(floquet_average(discard_transient(s), 200), ideal) for s in data.values())
    return raw, max_distance(pipeline(data, lp.Gamma, lp.Omega), ideal)


def random_pipeline_case(rng: np.random.Generator, coupling=(0.05, 0.3)) -> tuple[LatticeParams, NoiseParams]:
    """Draw from the regime ``Gamma dt = 0.07``, ``Gamma / Omega`` in ``coupling``, 400 steps."""
    Omega = rng.uniform(0.3, 1.0)
    Gamma = Omega * rng.uniform(*coupling)
    lp = LatticeParams(Omega=Omega, Gamma=Gamma, beta=5.0, k=rng.uniform(-np.pi, np.pi), dt=0.07 / Gamma, n_steps=400)
    noise = NoiseParams(p0=rng.uniform(0.95, 0.99), p1=rng.uniform(0.88, 0.94), T=rng.uniform(0.03, 0.09))
    return lp, noise


def criterion_10(seed: int = 0, scale: float = 1.0, draws: int = 10) -> CriterionResult:
    """Post-processing improves the max-norm distance to the ideal curve at least 3x."""
    rng = np.random.default_rng([seed, 10])
    gains = []
    for _ in range(draws):
        raw, processed = pipeline_gain(*random_pipeline_case(rng))
        gains.append(raw / processed)
    worst = min(gains)
    return _result(10, "pipeline_efficacy", worst, 3.0 / scale, worst >= 3.0 / scale, gains=gains)


def suite_channels(rng: np.random.Generator) -> list[KrausChannel]:
    """One instance of every channel family in the package."""
    lp = random_lattice(rng)
    cyc = hb.build_cycle(random_hubbard(rng), hb.DEFAULT_ORDER)
    noise = NoiseParams(p0=rng.uniform(0.5, 1), p1=rng.uniform(0.5, 1), T=rng.uniform(0, 1), r=int(rng.integers(1, 5)))
    return [
        trotter_channel(lp, 0),
        hb.cycle_channel(cyc),
        hb.edge_channel(cyc),
        noisy_reset_channel(noise),
        damping_channel(noise),
        qc.circuit_to_channel(qc.build_lattice_step(lp, 0)),
        qc.circuit_to_channel(qc.build_lattice_step_hardware(lp, 0)),
        qc.circuit_to_channel(qc.build_hubbard_step(cyc)),
    ]


def determinism_check(seed: int) -> bool:
    """Run two small experiments twice and compare the files byte for byte."""
    from .experiments import load_config, run

    text = (
        "[lattice]\nn_steps = 200\n[noise]\nreps = 2,3,4\n"
        "[sweep]\npoints = 3\nomega_max = 1.0\n"
    )
    with tempfile.TemporaryDirectory() as tmp:
        dirs = []
        for name in ("a", "b"):
            out = Path(tmp) / name
            for exp in ("lattice-evolve", "current-sweep", "hubbard-thermal"):
                run(load_config(exp, text=text, out=out, seed=seed, shots=1000))
            dirs.append(out)
        files = sorted(p.name for p in dirs[0].iterdir())
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
        return not mismatch and not errors and len(match) == len(files) > 0


def criterion_11(seed: int = 0, scale: float = 1.0, draws: int = 50) -> CriterionResult:
    """Trace-distance contraction for every channel, and byte-identical reruns."""
    rng = np.random.default_rng([seed, 11])
    worst = -np.inf
    for _ in range(draws):
        for ch in suite_channels(rng):
            a, b = random_density(ch.dim_in, rng), random_density(ch.dim_in, rng)
            excess = trace_distance(apply_channel(ch, a), apply_channel(ch, b)) - trace_distance(a, b)
            worst = max(worst, excess)
    identical = determinism_check(seed)
    ok = worst <= 1e-12 * scale and identical
    return _result(11, "contraction_and_determinism", max(worst, 0.0), 1e-12 * scale, ok, deterministic=identical)


CRITERIA = [
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
    criterion_7, criterion_8, criterion_9, criterion_10, criterion_11,
]


def run_all(seed: int = 0, tolerance_scale: float = 1.0) -> list[CriterionResult]:
    return [check(seed=seed, scale=tolerance_scale) for check in CRITERIA]


def report_text(results: list[CriterionResult]) -> str:
    lines = ["criterion,measured,tolerance,pass"] + [r.line() for r in results]
    return "\n".join(lines) + "\n"
