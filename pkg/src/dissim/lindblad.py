"""Continuous-time references for the driven lattice mode.

Two oracles, in decreasing generality:

* :func:`lindblad_rhs` / :func:`solve_master` integrate the full 2x2 master
  equation with a fixed-step RK4 scheme;
* :func:`scalar_nk_solution` evaluates the convolution solution of the
  occupation ODE ``dn/dt = -2 Gamma (n - n_F(eps(k + Omega t)))`` by
  adaptive quadrature.

The Trotter map of :mod:`dissim.lattice` is judged against these.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .channels import ValidationError
from .lattice import LatticeParams, fermi, mode_state

_D = np.array([[0, 1], [0, 0]], dtype=complex)  # annihilator in (empty, occupied)
_NUM = np.diag([0.0, 1.0]).astype(complex)


@dataclass
class OdeSolution:
    """Occupation ``n_k(t)`` from an ODE oracle, plus the final density matrix."""

    times: np.ndarray
    values: np.ndarray
    rho_final: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _energy(params: LatticeParams, t: float) -> float:
    return -2.0 * params.gamma_h * np.cos(params.k + params.Omega * t)


def lindblad_operators(params: LatticeParams, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Jump operators ``(L_out, L_in)`` at time ``t``.

    ``L_out = sqrt(2 Gamma n_F(-eps)) d`` empties the mode and
    ``L_in = sqrt(2 Gamma n_F(eps)) d^dagger`` fills it, so the occupation
    relaxes at rate ``2 Gamma`` toward ``n_F(eps)``.
    """
    eps = _energy(params, t)
    out = np.sqrt(2 * params.Gamma * fermi(-eps, params.beta)) * _D
    into = np.sqrt(2 * params.Gamma * fermi(eps, params.beta)) * _D.conj().T
    return out, into


def lindblad_rhs(params: LatticeParams, t: float, rho: np.ndarray) -> np.ndarray:
    """``d rho / dt`` of the mode master equation in GKSL form."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValidationError(f"lindblad_rhs expects a 2x2 state, got {rho.shape}")
    h = _energy(params, t) * _NUM
    drho = -1j * (h @ rho - rho @ h)
    for op in lindblad_operators(params, t):
        od = op.conj().T
        ldl = od @ op
        drho += op @ rho @ od - 0.5 * (ldl @ rho + rho @ ldl)
    return drho


def solve_master(
    params: LatticeParams,
    rho0: np.ndarray | float = 0.0,
    t_max: float | None = None,
    dt_ode: float | None = None,
) -> OdeSolution:
    """Integrate the master equation with classical RK4.

    Parameters
    ----------
    params
        Mode parameters; ``params.dt`` defines the sampling grid.
    rho0
        Initial 2x2 state, or an occupation in [0, 1] for a diagonal state.
    t_max
        Final time, default ``params.n_steps * params.dt``.  It is rounded to
        a whole number of Trotter steps.
    dt_ode
        Integration step, default ``min(params.dt / 20, 0.005)`` so that the
        oracle error stays near 1e-11 even for coarse sampling.  Must not exceed
        ``params.dt / 10`` and is shrunk so that it divides ``params.dt``.

    Returns
    -------
    OdeSolution
        Occupation sampled at every Trotter time ``s dt``.
    """
    rho = mode_state(float(rho0)) if np.ndim(rho0) == 0 else np.array(rho0, dtype=complex)
    n_steps = params.n_steps if t_max is None else int(round(t_max / params.dt))
    if dt_ode is None:
        dt_ode = min(params.dt / 20, 0.005)
    if dt_ode <= 0 or dt_ode > params.dt / 10 * (1 + 1e-12):
        raise ValidationError(f"dt_ode={dt_ode} must lie in (0, dt/10]")
    sub = int(np.ceil(params.dt / dt_ode - 1e-9))
    h = params.dt / sub
    values = np.empty(n_steps + 1)
    values[0] = rho[1, 1].real
    t = 0.0
    for s in range(n_steps):
        for j in range(sub):
            t = (s * sub + j) * h
            k1 = lindblad_rhs(params, t, rho)
            k2 = lindblad_rhs(params, t + h / 2, rho + h / 2 * k1)
            k3 = lindblad_rhs(params, t + h / 2, rho + h / 2 * k2)
            k4 = lindblad_rhs(params, t + h, rho + h * k3)
            rho = rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        values[s + 1] = rho[1, 1].real
    times = params.dt * np.arange(n_steps + 1)
    return OdeSolution(times, values, rho, {"method": "rk4", "dt_ode": h, "order": 4})


def scalar_nk_solution(params: LatticeParams, n0: float, t):
    """Occupation from the convolution formula.

    ``n(t) = n0 exp(-2 Gamma t) + 2 Gamma int_0^t exp(-2 Gamma (t - s)) n_F(eps(k + Omega s)) ds``.
    For an array of times the solution is marched from one requested time to
    the next, ``n(b) = n(a) exp(-2 Gamma (b - a)) + 2 Gamma int_a^b ...``, with
    each interval split into pieces of length at most 1 and integrated by
    ``scipy.integrate.quad`` to absolute tolerance 1e-12.
    """
    g2 = 2 * params.Gamma
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValidationError("t must be >= 0")

    def f(s, t_end):
        return np.exp(-g2 * (t_end - s)) * fermi(_energy(params, s), params.beta)

    order = np.argsort(times, kind="stable")
    out = np.empty_like(times)
    n, t_prev = float(n0), 0.0
    for idx in order:
        te = times[idx]
        if te > t_prev:
            edges = np.append(np.arange(t_prev, te, 1.0), te)
            acc = 0.0
            for lo, hi in zip(edges[:-1], edges[1:]):
                val, _ = quad(f, lo, hi, args=(te,), epsabs=1e-12, epsrel=1e-12, limit=200)
                acc += val
            n = n * np.exp(-g2 * (te - t_prev)) + g2 * acc
            t_prev = te
        out[idx] = n
    return float(out[0]) if np.ndim(t) == 0 else out
