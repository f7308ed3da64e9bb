"""Hardware error model for the lattice circuit: imperfect reset and T1 decay.

Populations follow the qubit convention of :mod:`dissim.circuits`:
``n_s = <0|rho_S|0>`` is the mode occupation and ``a_s = <0|rho_a|0>`` the
probability that the ancilla was reset correctly.  A reset is "measure, then
flip on outcome 1"; with readout fidelities ``p0 = p(0|0)`` and
``p1 = p(1|1)`` one reset acts on the ancilla populations with the
column-stochastic matrix ``[[p0, p1], [1 - p0, 1 - p1]]``.  During the ``r``
resets of a step the system qubit amplitude-damps toward ``|0>`` with
survival ``exp(-r T)``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .channels import KrausChannel, ValidationError, apply_channel, partial_trace
from .circuits import build_lattice_step_hardware, circuit_unitary
from .lattice import DensitySeries, LatticeParams, dispersion, fermi

FIT_BOUNDS = ((0.0, 1.0), (0.5, 1.0), (0.5, 1.0))  # T, p0, p1


@dataclass(frozen=True)
class NoiseParams:
    """Reset readout fidelities, reset duration (units of T1) and repetitions."""

    p0: float = 0.97
    p1: float = 0.91
    T: float = 0.06
    r: int = 1

    def __post_init__(self):
        for name in ("p0", "p1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.T < 0:
            raise ValidationError(f"T must be >= 0, got {self.T}")
        if int(self.r) != self.r or self.r < 0:
            raise ValidationError(f"r must be a non-negative integer, got {self.r}")
        object.__setattr__(self, "r", int(self.r))

    def with_(self, **changes) -> "NoiseParams":
        return replace(self, **changes)

    @property
    def survival(self) -> float:
        """Amplitude-damping survival ``exp(-r T)``."""
        return float(np.exp(-self.r * self.T))


IDEAL = NoiseParams(p0=1.0, p1=1.0, T=0.0, r=1)


def _require_reset(noise: NoiseParams) -> None:
    if noise.r < 1:
        raise ValidationError("at least one reset gate (r >= 1) is required")


def reset_fixed_point(p0: float, p1: float) -> float:
    """Large-``r`` reset success ``p1 / (1 - p0 + p1)``."""
    return p1 / (1 - p0 + p1)


def reset_success(a0: float, noise: NoiseParams) -> float:
    """Probability that ``r`` resets leave the qubit in ``|0>``, starting from ``<0|rho|0> = a0``."""
    _require_reset(noise)
    lam = (noise.p0 - noise.p1) ** noise.r
    return a0 * lam + reset_fixed_point(noise.p0, noise.p1) * (1 - lam)


def reset_matrix(noise: NoiseParams) -> np.ndarray:
    """Population transfer matrix of ``r`` successive resets."""
    _require_reset(noise)
    s = np.array([[noise.p0, noise.p1], [1 - noise.p0, 1 - noise.p1]])
    return np.linalg.matrix_power(s, noise.r)


def noisy_reset_channel(noise: NoiseParams) -> KrausChannel:
    """Kraus form ``sqrt(M_ij) |i><j|`` of the population map; coherences are destroyed."""
    m = reset_matrix(noise)
    ops = []
    for i, j in product(range(2), range(2)):
        k = np.zeros((2, 2), dtype=complex)
        k[i, j] = np.sqrt(max(m[i, j], 0.0))
        ops.append(k)
    return KrausChannel(tuple(ops))


def damping_channel(noise: NoiseParams) -> KrausChannel:
    """Amplitude damping toward ``|0>`` with survival ``exp(-r T)``."""
    x = noise.survival
    k0 = np.array([[1, 0], [0, np.sqrt(x)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(1 - x)], [0, 0]], dtype=complex)
    return KrausChannel((k1, k0))


# --------------------------------------------------------------------------
# recurrences
# --------------------------------------------------------------------------


def recurrence_step(n: float, a: float, step: int, lp: LatticeParams, noise: NoiseParams) -> tuple[float, float]:
    """One step of the coupled ``(n_s, a_s)`` recurrences.

    ``n' = 1 - x ((2a - 1)(2 G dt (n - n_F(e)) - n) + a)`` and
    ``a' = [a + 2 G dt (2a - 1)((n - 1) n_F(e) - n n_F(-e))] / (p0 - p1)^(-r) + p1 (1 - (p0 - p1)^r) / (1 - p0 + p1)``
    with ``x = exp(-r T)``.  The division by ``(p0 - p1)^(-r)`` is kept as
    written; when ``p0 == p1`` it evaluates to a product with zero.
    """
    _require_reset(noise)
    eps = dispersion(lp, step)
    w = 2 * lp.Gamma * lp.dt
    nf_p, nf_m = float(fermi(eps, lp.beta)), float(fermi(-eps, lp.beta))
    x = noise.survival
    n_next = 1 - x * ((2 * a - 1) * (w * (n - nf_p) - n) + a)
    with np.errstate(divide="ignore"):
        denom = np.float64(noise.p0 - noise.p1) ** (-noise.r)
    anc = a + w * (2 * a - 1) * ((n - 1) * nf_p - n * nf_m)
    a_next = anc / denom + reset_fixed_point(noise.p0, noise.p1) * (1 - (noise.p0 - noise.p1) ** noise.r)
    return float(n_next), float(a_next)


@njit(cache=True, nogil=True)
def _recurrence_kernel(n0, a0, nf_p, nf_m, w, x, lam, fixed, freeze_a):
    n_steps = nf_p.shape[0]
    out = np.empty(n_steps + 1)
    out[0] = n0
    n, a = n0, a0
    for s in range(n_steps):
        n_next = 1.0 - x * ((2 * a - 1) * (w * (n - nf_p[s]) - n) + a)
        if not freeze_a:
            anc = a + w * (2 * a - 1) * ((n - 1) * nf_p[s] - n * nf_m[s])
            a = anc * lam + fixed * (1 - lam)
        n = n_next
        out[s + 1] = n
    return out


def _fermi_tables(lp: LatticeParams, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    eps = dispersion(lp, np.arange(n_steps))
    return np.ascontiguousarray(fermi(eps, lp.beta)), np.ascontiguousarray(fermi(-eps, lp.beta))


def run_recurrence(
    lp: LatticeParams,
    noise: NoiseParams,
    n0: float = 1.0,
    a0: float = 1.0,
    n_steps: int | None = None,
    freeze_a: bool = False,
) -> DensitySeries:
    """Iterate the recurrences for ``n_steps`` steps (default ``lp.n_steps``).

    ``values[s]`` is ``n_s``.  With ``freeze_a`` the ancilla population is held
    at ``a0``, the approximation behind :func:`closed_form_ns`.  The default
    ``n0 = 1`` is a freshly initialised system qubit (``|0>``, occupied).
    """
    _require_reset(noise)
    n_steps = lp.n_steps if n_steps is None else n_steps
    nf_p, nf_m = _fermi_tables(lp, n_steps)
    lam = (noise.p0 - noise.p1) ** noise.r
    values = _recurrence_kernel(
        float(n0), float(a0), nf_p, nf_m, 2 * lp.Gamma * lp.dt, noise.survival,
        float(lam), reset_fixed_point(noise.p0, noise.p1), bool(freeze_a),
    )
    return DensitySeries(lp.dt * np.arange(n_steps + 1), values, lp.with_(n_steps=n_steps), {"noise": noise})


def simulate_channels(
    lp: LatticeParams,
    noise: NoiseParams,
    n0: float = 1.0,
    a0: float = 1.0,
    n_steps: int | None = None,
) -> DensitySeries:
    """Density-matrix simulation of the noisy two-qubit lattice circuit.

    Each step applies the reset-free hardware block to ``rho_S (x) rho_a``,
    damps the reduced system state, passes the reduced ancilla state
    through :func:`noisy_reset_channel` and re-forms the product state.
    """
    n_steps = lp.n_steps if n_steps is None else n_steps
    reset = noisy_reset_channel(noise)
    damp = damping_channel(noise)
    rho_s = np.diag([n0, 1 - n0]).astype(complex)
    rho_a = np.diag([a0, 1 - a0]).astype(complex)
    values = np.empty(n_steps + 1)
    values[0] = n0
    for s in range(n_steps):
        u = circuit_unitary(build_lattice_step_hardware(lp, s, reset=False))
        joint = u @ np.kron(rho_s, rho_a) @ u.conj().T
        # re-forming the product squares the trace, so round-off would double every step
        joint /= np.trace(joint).real
        rho_s = apply_channel(damp, partial_trace(joint, [0], [2, 2]))
        rho_a = apply_channel(reset, partial_trace(joint, [1], [2, 2]))
        rho_s /= np.trace(rho_s).real
        rho_a /= np.trace(rho_a).real
        values[s + 1] = rho_s[0, 0].real
    return DensitySeries(lp.dt * np.arange(n_steps + 1), values, lp.with_(n_steps=n_steps), {"noise": noise})


# --------------------------------------------------------------------------
# frozen-a closed form
# --------------------------------------------------------------------------


def kernel_base(a0: float, lp: LatticeParams, noise: NoiseParams) -> float:
    """Per-step contraction ``q = exp(-r T) (2 a0 - 1)(1 - 2 Gamma dt)`` of the frozen-a recurrence."""
    return noise.survival * (2 * a0 - 1) * (1 - 2 * lp.Gamma * lp.dt)


def closed_form_offset(a0: float, lp: LatticeParams, noise: NoiseParams) -> float:
    """Constant part ``1/2 + (1 - x) / (2 (1 - q))`` of the closed form."""
    x = noise.survival
    return 0.5 + (1 - x) / (2 * (1 - kernel_base(a0, lp, noise)))


def closed_form_ns(s: int, a0: float, lp: LatticeParams, noise: NoiseParams, n0: float | None = None) -> float:
    """Solution of the frozen-a recurrence after ``s`` steps.

    ``n_s = C + q^s (n0 - C) - x (2 a0 - 1) G dt sum_{t<s} tanh(beta e_t / 2) q^(s-t-1)``
    with ``C`` from :func:`closed_form_offset` and ``q`` from :func:`kernel_base`.
    The default ``n0 = C`` drops the transient and gives the long-time form.
    """
    x = noise.survival
    q = kernel_base(a0, lp, noise)
    c = closed_form_offset(a0, lp, noise)
    n0 = c if n0 is None else n0
    if s == 0:
        return float(n0)
    t = np.arange(s)
    tanh = np.tanh(lp.beta * dispersion(lp, t) / 2)
    total = np.dot(tanh, q ** (s - t - 1.0))
    return float(c + q**s * (n0 - c) - x * (2 * a0 - 1) * lp.Gamma * lp.dt * total)


def closed_form_literal(s: int, a0: float, lp: LatticeParams, noise: NoiseParams) -> float:
    """The long-time form with ``a0`` in place of ``2 a0 - 1`` throughout.

    Agrees with :func:`closed_form_ns` only at ``a0 = 1``; kept so tests can
    show where the two readings part ways.
    """
    x = noise.survival
    q = x * a0 * (1 - 2 * lp.Gamma * lp.dt)
    t = np.arange(s)
    tanh = np.tanh(lp.beta * dispersion(lp, t) / 2)
    return float(0.5 + (1 - x) / (2 * (1 - q)) - x * a0 * lp.Gamma * lp.dt * np.dot(tanh, q ** (s - t - 1.0)))


def effective_gamma(a0: float, lp: LatticeParams, noise: NoiseParams) -> float:
    """``Gamma'`` with ``1 - 2 Gamma' dt = q``: the dissipation rate the noisy curve mimics."""
    return (1 - kernel_base(a0, lp, noise)) / (2 * lp.dt)


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


@dataclass
class FitResult:
    noise: NoiseParams
    residual: float
    starts: int
    success: bool


def synthetic_data(
    lp: LatticeParams,
    noise: NoiseParams,
    reps=(1, 2, 3, 4),
    n_steps: int = 400,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
    n0: float = 1.0,
    a0: float = 1.0,
) -> dict[int, DensitySeries]:
    """Recurrence curves for each reset count, optionally with binomial shot noise."""
    out = {}
    for r in reps:
        series = run_recurrence(lp, noise.with_(r=r), n0=n0, a0=a0, n_steps=n_steps)
        if shots:
            if rng is None:
                raise ValidationError("shot noise needs an rng")
            p = np.clip(series.values, 0.0, 1.0)
            series = DensitySeries(series.times, rng.binomial(shots, p) / shots, series.params, {"shots": shots})
        out[r] = series
    return out


def _objective_factory(observed: dict, lp: LatticeParams, n0: float, a0: float):
    items = []
    for r, series in sorted(observed.items()):
        n_steps = len(series) - 1
        nf_p, nf_m = _fermi_tables(lp, n_steps)
        items.append((int(r), nf_p, nf_m, np.asarray(series.values, dtype=float)))
    w = 2 * lp.Gamma * lp.dt

    def objective(v):
        T, p0, p1 = v
        if not (0 <= T <= 1 and 0.5 <= p0 <= 1 and 0.5 <= p1 <= 1):
            return 1e6
        fixed = reset_fixed_point(p0, p1)
        total = 0.0
        for r, nf_p, nf_m, y in items:
            pred = _recurrence_kernel(n0, a0, nf_p, nf_m, w, np.exp(-r * T), (p0 - p1) ** r, fixed, False)
            total += float(np.sum((pred - y) ** 2))
        return total

    return objective


def fit_noise(
    observed: dict[int, DensitySeries],
    lp: LatticeParams,
    n0: float = 1.0,
    a0: float = 1.0,
    restarts: int = 10,
    grid: int = 3,
    workers: int = 1,
) -> FitResult:
    """Least-squares estimate of ``(T, p0, p1)`` from occupation series keyed by ``r``.

    A ``grid^3`` coarse scan seeds ``restarts`` Nelder-Mead runs inside the
    bounds ``T in [0, 1]``, ``p0, p1 in [0.5, 1]``; the best result is
    polished by one more run started from it.
    """
    if not observed:
        raise ValidationError("no data to fit")
    stacked = np.concatenate([np.asarray(s.values) for s in observed.values()])
    if np.ptp(stacked) < 1e-12:
        warnings.warn("observed series are constant; noise fit is ill-posed", RuntimeWarning, stacklevel=2)
    objective = _objective_factory(observed, lp, float(n0), float(a0))
    axes = [np.linspace(lo, hi, grid + 2)[1:-1] for lo, hi in FIT_BOUNDS]
    candidates = sorted((objective(np.array(p)), p) for p in product(*axes))[:restarts]

    def run(x0, xatol, fatol, maxfev):
        return minimize(
            objective, np.asarray(x0), method="Nelder-Mead", bounds=FIT_BOUNDS,
            options={"xatol": xatol, "fatol": fatol, "maxiter": maxfev, "maxfev": maxfev},
        )

    # the simplex test on f is absolute, so scale it by the residual level
    level = max(candidates[0][0], 1e-300)
    starts = [c[1] for c in candidates]
    coarse = dict(xatol=1e-9, fatol=max(1e-13 * level, 1e-24), maxfev=4000)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda x0: run(x0, **coarse), starts))
    else:
        results = [run(x0, **coarse) for x0 in starts]
    best = min(results, key=lambda res: res.fun)
    polished = run(best.x, xatol=1e-13, fatol=max(1e-15 * best.fun, 1e-28), maxfev=4000)
    if polished.fun <= best.fun:
        best = polished
    T, p0, p1 = (float(v) for v in best.x)
    return FitResult(NoiseParams(p0=p0, p1=p1, T=T, r=1), float(best.fun), len(candidates), bool(best.success))
