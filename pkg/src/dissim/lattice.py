"""Trotterised Kraus-map evolution of one momentum mode of the driven lattice.

A single crystal-momentum mode ``k`` of the DC-field-driven tight-binding chain
is a two-level system (empty / occupied).  Each Trotter step of duration
``dt`` applies a three-operator Kraus map built from the instantaneous
dispersion ``eps_s = -2 gamma_h cos(k + Omega s dt)`` and the reservoir Fermi
function.  The mode basis is ordered ``(|empty>, |occupied>)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .channels import KrausChannel, ValidationError, apply_channel

EMPTY, OCCUPIED = 0, 1


def fermi(x, beta: float):
    """Fermi-Dirac occupation ``1 / (1 + exp(beta x))``, overflow-safe."""
    return expit(-beta * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class LatticeParams:
    """Parameters of one driven, reservoir-coupled lattice mode.

    Energies are in units of the hopping ``gamma_h`` (fixed to 1 by default).
    ``Omega`` is the field strength ``eEa``, ``Gamma = g^2 N(0)`` the
    reservoir coupling, ``beta`` the reservoir inverse temperature, ``k`` the
    crystal momentum and ``dt`` the Trotter step.
    """

    Omega: float = 0.5
    Gamma: float = 0.1
    beta: float = 5.0
    k: float = 0.0
    dt: float = 0.1
    n_steps: int = 100
    gamma_h: float = 1.0

    def __post_init__(self):
        if self.Omega < 0:
            raise ValidationError(f"Omega must be >= 0, got {self.Omega}")
        if self.Gamma < 0:
            raise ValidationError(f"Gamma must be >= 0, got {self.Gamma}")
        if self.beta < 0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if self.dt <= 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 0:
            raise ValidationError(f"n_steps must be >= 0, got {self.n_steps}")
        # worst case over the band edge, n_F(-2 gamma_h) (or the fixed level when Omega = 0)
        eps = (
            np.array([dispersion(self, 0)])
            if self.Omega == 0
            else np.array([-2 * self.gamma_h, 2 * self.gamma_h])
        )
        worst = 2 * self.Gamma * self.dt * max(fermi(eps, self.beta).max(), fermi(-eps, self.beta).max())
        if worst > 1 + 1e-15:
            raise ValidationError(
                f"2 Gamma dt n_F = {worst:.4f} exceeds 1: dt={self.dt} too large for Gamma={self.Gamma}"
            )

    @property
    def tau(self) -> float:
        """Floquet (Bloch-oscillation) period ``2 pi / Omega``."""
        if self.Omega == 0:
            return np.inf
        return 2 * np.pi / self.Omega

    def with_(self, **changes) -> "LatticeParams":
        return replace(self, **changes)


@dataclass
class DensitySeries:
    """Occupation ``n_k(t)`` sampled at ``t = s dt``."""

    times: np.ndarray
    values: np.ndarray
    params: LatticeParams | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValidationError("times and values must have the same length")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def k_m(self) -> np.ndarray:
        """Gauge-invariant momentum ``k + Omega t`` of every sample."""
        return self.params.k + self.params.Omega * self.times


def dispersion(params: LatticeParams, step) -> np.ndarray | float:
    """``eps_s = -2 gamma_h cos(k + Omega s dt)``."""
    phase = params.k + params.Omega * np.asarray(step, dtype=float) * params.dt
    out = -2.0 * params.gamma_h * np.cos(phase)
    return float(out) if np.ndim(out) == 0 else out


def _jump_probabilities(params: LatticeParams, eps):
    """(fill, drain) probabilities ``2 Gamma dt n_F(+-eps)`` for one step."""
    w = 2.0 * params.Gamma * params.dt
    fill = w * fermi(eps, params.beta)
    drain = w * fermi(-eps, params.beta)
    return fill, drain


def step_angles(params: LatticeParams, step: int) -> tuple[float, float]:
    """Rotation angles ``(theta_s, phi_s)`` of the step-``s`` circuit.

    ``theta`` sets the filling probability ``sin^2(theta/2) = 2 Gamma dt n_F(eps)``
    and ``phi`` the draining probability with ``n_F(-eps)``.
    """
    fill, drain = _jump_probabilities(params, dispersion(params, step))
    for name, p in (("theta", fill), ("phi", drain)):
        if not 0.0 <= p <= 1.0 + 1e-15:
            raise ValidationError(f"{name} argument {p:.6f} outside [0, 1]; reduce dt")
    fill, drain = min(float(fill), 1.0), min(float(drain), 1.0)
    return 2 * np.arcsin(np.sqrt(fill)), 2 * np.arcsin(np.sqrt(drain))


def trotter_channel(params: LatticeParams, step: int) -> KrausChannel:
    """The three Kraus operators of Trotter step ``step`` in the (empty, occupied) basis.

    ``K0`` keeps the mode, with the coherent phase ``exp(-i eps dt)`` on the
    occupied branch; ``K1`` fills it and ``K2`` drains it.
    """
    eps = dispersion(params, step)
    step_angles(params, step)  # admissibility
    fill, drain = _jump_probabilities(params, eps)
    fill, drain = min(float(fill), 1.0), min(float(drain), 1.0)
    k0 = np.diag([np.sqrt(1 - fill), np.sqrt(1 - drain) * np.exp(-1j * eps * params.dt)])
    k1 = np.zeros((2, 2), dtype=complex)
    k1[OCCUPIED, EMPTY] = np.sqrt(fill)
    k2 = np.zeros((2, 2), dtype=complex)
    k2[EMPTY, OCCUPIED] = np.sqrt(drain)
    return KrausChannel((k0, k1, k2))


def mode_state(n0: float) -> np.ndarray:
    """Diagonal mode state with occupation ``n0``."""
    if not 0.0 <= n0 <= 1.0:
        raise ValidationError(f"occupation must lie in [0, 1], got {n0}")
    return np.diag([1.0 - n0, n0]).astype(complex)


def evolve_density(params: LatticeParams, n0: float = 0.0, rho0: np.ndarray | None = None) -> DensitySeries:
    """Apply ``params.n_steps`` Trotter channels and record the occupation.

    The returned series has ``n_steps + 1`` samples; sample ``s`` is the
    occupation at ``t = s dt`` (sample 0 is the initial state).
    """
    rho = mode_state(n0) if rho0 is None else np.asarray(rho0, dtype=complex)
    values = np.empty(params.n_steps + 1)
    values[0] = rho[OCCUPIED, OCCUPIED].real
    for s in range(params.n_steps):
        rho = apply_channel(trotter_channel(params, s), rho)
        values[s + 1] = rho[OCCUPIED, OCCUPIED].real
    times = params.dt * np.arange(params.n_steps + 1)
    return DensitySeries(times, values, params)


def trotter_recurrence(params: LatticeParams, n0: float = 0.0, n_steps: int | None = None) -> DensitySeries:
    """Scalar form of :func:`evolve_density`: ``n' = n (1 - 2 Gamma dt) + 2 Gamma dt n_F(eps_s)``.

    The occupation of the Kraus map obeys this affine recurrence exactly, so
    long sweeps use it instead of 2x2 matrix products.
    """
    n_steps = params.n_steps if n_steps is None else n_steps
    w = 2 * params.Gamma * params.dt
    target = fermi(dispersion(params, np.arange(n_steps)), params.beta)
    values = np.empty(n_steps + 1)
    values[0] = n0
    n = n0
    for s in range(n_steps):
        n = n * (1 - w) + w * target[s]
        values[s + 1] = n
    return DensitySeries(params.dt * np.arange(n_steps + 1), values, params.with_(n_steps=n_steps))


# --------------------------------------------------------------------------
# analytic steady state
# --------------------------------------------------------------------------


def _segments(lo: float, hi: float) -> list[tuple[float, float]]:
    """Split ``[lo, hi]`` at the Fermi points ``y = pi/2 + m pi`` of ``-2 cos y``."""
    first = np.ceil((lo - np.pi / 2) / np.pi)
    cuts = np.pi / 2 + np.pi * np.arange(first, first + 4)
    cuts = cuts[(cuts > lo) & (cuts < hi)]
    edges = np.concatenate([[lo], cuts, [hi]])
    return list(zip(edges[:-1], edges[1:]))


def steady_state_nkm(params: LatticeParams, k_m, points: int = 200):
    """Long-time occupation ``n(k_m)`` as a function of gauge-invariant momentum.

    Evaluates ``(2G/W) int_{-inf}^{k_m} dy exp((2G/W)(y - k_m)) n_F(eps(y))``
    with ``G = Gamma``, ``W = Omega``.  The integrand's Fermi factor is
    ``2 pi``-periodic, so the semi-infinite tail is a geometric series over
    periods with ratio ``exp(-4 pi Gamma / Omega)``; one period is integrated by
    Gauss-Legendre quadrature (``points`` nodes per segment), with segments
    split where the dispersion crosses zero.
    """
    if params.Omega <= 0:
        raise ValidationError("steady_state_nkm needs Omega > 0")
    if params.Gamma <= 0:
        raise ValidationError("steady_state_nkm needs Gamma > 0")
    a = 2 * params.Gamma / params.Omega
    x, w = np.polynomial.legendre.leggauss(points)
    k_arr = np.atleast_1d(np.asarray(k_m, dtype=float))
    out = np.empty_like(k_arr)
    for idx, km in enumerate(k_arr):
        total = 0.0
        for lo, hi in _segments(km - 2 * np.pi, km):
            y = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            f = np.exp(a * (y - km)) * fermi(-2 * params.gamma_h * np.cos(y), params.beta)
            total += 0.5 * (hi - lo) * np.dot(w, f)
        out[idx] = a * total / -np.expm1(-2 * np.pi * a)
    return float(out[0]) if np.ndim(k_m) == 0 else out


def n_max(Gamma: float, Omega: float) -> float:
    """Zero-temperature maximum of the steady occupation, ``(1 + tanh(pi Gamma / Omega)) / 2``."""
    if Omega <= 0 or Gamma < 0:
        raise ValidationError("n_max needs Gamma >= 0 and Omega > 0")
    return 0.5 * (1.0 + np.tanh(np.pi * Gamma / Omega))


def nkm_grid(points: int = 200) -> np.ndarray:
    """Uniform periodic grid over ``[-pi, pi)``."""
    return np.linspace(-np.pi, np.pi, points, endpoint=False)


def dc_current(n_values, k_grid=None, gamma_h: float = 1.0) -> float:
    """Steady DC current ``(gamma_h / pi) * oint dk_m sin(k_m) n(k_m)``.

    ``n_values`` are samples on a uniform periodic grid covering one full
    period (default ``nkm_grid(len(n_values))``); the periodic trapezoid rule
    is used.
    """
    n_values = np.asarray(n_values, dtype=float)
    if k_grid is None:
        k_grid = nkm_grid(len(n_values))
    k_grid = np.asarray(k_grid, dtype=float)
    if k_grid.shape != n_values.shape or len(k_grid) < 2:
        raise ValidationError("k grid and occupation samples must match")
    dk = np.diff(k_grid)
    h = 2 * np.pi / len(k_grid)
    if np.max(np.abs(dk - h)) > 1e-9 * max(1.0, h):
        raise ValidationError("dc_current needs a uniform grid spanning exactly one period")
    return float(gamma_h / np.pi * h * np.dot(np.sin(k_grid), n_values))


def steady_current(params: LatticeParams, points: int = 200) -> float:
    """DC current of the analytic steady state."""
    grid = nkm_grid(points)
    return dc_current(steady_state_nkm(params, grid, points=points), grid, params.gamma_h)


def sweep_timestep(Omega: float) -> float:
    """Empirical step size ``dt = tau (0.022 + 0.031 Omega)`` used for the current sweep."""
    return 2 * np.pi / Omega * (0.022 + 0.031 * Omega)
