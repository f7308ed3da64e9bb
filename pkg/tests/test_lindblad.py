import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissim.channels import ValidationError, random_density
from dissim.lattice import LatticeParams, dispersion, fermi, mode_state, steady_state_nkm
from dissim.lindblad import lindblad_operators, lindblad_rhs, scalar_nk_solution, solve_master

# frozen: n_k(t = 10) from an empty mode at beta 5, Gamma 0.1, Omega 0.5, k 0
SCALAR_N_T10 = 0.22786992384430604


@st.composite
def ode_params(draw):
    return LatticeParams(
        Omega=draw(st.floats(0.1, 2.0)),
        Gamma=draw(st.floats(0.02, 0.5)),
        beta=draw(st.floats(0.0, 10.0)),
        k=draw(st.floats(-np.pi, np.pi)),
        dt=0.5,
        n_steps=20,
    )


def test_thermal_state_is_stationary_without_drive():
    lp = LatticeParams(Omega=0.0, Gamma=0.3, k=0.7)
    rho = mode_state(float(fermi(dispersion(lp, 0), lp.beta)))
    assert np.max(np.abs(np.diag(lindblad_rhs(lp, 1.3, rho)))) < 1e-12


def test_no_dissipation_leaves_only_the_commutator(rng):
    lp = LatticeParams(Gamma=0.0, k=0.2)
    rho = random_density(2, rng)
    h = np.diag([0.0, dispersion(lp, 0)])
    assert np.allclose(lindblad_rhs(lp, 0.0, rho), -1j * (h @ rho - rho @ h), atol=1e-15)


@given(ode_params(), st.integers(0, 2**32 - 1), st.floats(0, 50))
def test_rhs_is_hermitian_and_traceless(lp, seed, t):
    rho = random_density(2, np.random.default_rng(seed))
    d = lindblad_rhs(lp, t, rho)
    assert abs(np.trace(d)) < 1e-14
    assert np.max(np.abs(d - d.conj().T)) < 1e-14


@given(ode_params(), st.floats(0, 1), st.floats(0, 20))
def test_occupation_relaxes_at_twice_gamma(lp, n, t):
    d = lindblad_rhs(lp, t, mode_state(n))
    nf = fermi(-2 * np.cos(lp.k + lp.Omega * t), lp.beta)
    assert d[1, 1].real == pytest.approx(-2 * lp.Gamma * (n - nf), abs=1e-14)


def test_jump_operators_fill_and_empty():
    out, into = lindblad_operators(LatticeParams(Gamma=0.5, beta=1.0), 0.0)
    assert out[0, 1] != 0 and into[1, 0] != 0
    assert out[0, 1] ** 2 + into[1, 0] ** 2 == pytest.approx(1.0)


def test_rhs_rejects_wrong_dimension():
    with pytest.raises(ValidationError):
        lindblad_rhs(LatticeParams(), 0.0, np.eye(4) / 4)


def test_step_size_admissibility():
    lp = LatticeParams(dt=0.1, n_steps=2)
    with pytest.raises(ValidationError):
        solve_master(lp, 0.0, dt_ode=0.05)
    with pytest.raises(ValidationError):
        solve_master(lp, 0.0, dt_ode=0.0)
    solve_master(lp, 0.0, dt_ode=0.01)


def test_undriven_thermal_solution_is_constant():
    lp = LatticeParams(Omega=0.0, Gamma=0.2, k=1.0, dt=0.2, n_steps=50)
    nf = float(fermi(dispersion(lp, 0), lp.beta))
    assert np.max(np.abs(solve_master(lp, nf).values - nf)) < 1e-13


def test_master_equation_agrees_with_convolution_and_halving():
    lp = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0, dt=0.5, n_steps=40)
    coarse = solve_master(lp, 0.0)
    fine = solve_master(lp, 0.0, dt_ode=coarse.meta["dt_ode"] / 2)
    assert np.max(np.abs(coarse.values - fine.values)) < 1e-9
    exact = scalar_nk_solution(lp, 0.0, coarse.times)
    assert np.max(np.abs(coarse.values - exact)) < 1e-9
    assert coarse.meta["order"] == 4


@settings(max_examples=20)
@given(ode_params(), st.floats(0, 1))
def test_master_diagonal_equals_scalar_solution(lp, n0):
    sol = solve_master(lp, n0)
    assert np.max(np.abs(sol.values - scalar_nk_solution(lp, n0, sol.times))) < 1e-8


def test_master_preserves_trace_and_positivity_to_t100(rng):
    lp = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0, dt=1.0, n_steps=100)
    sol = solve_master(lp, random_density(2, rng), dt_ode=0.05)
    assert abs(np.trace(sol.rho_final) - 1) < 1e-10
    assert np.linalg.eigvalsh(sol.rho_final).min() > -1e-9
    assert np.all((sol.values >= 0) & (sol.values <= 1))


def test_master_solution_becomes_floquet_periodic():
    # 2 Gamma t reaches 30 and tau / dt = 40
    lp = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0, dt=np.pi / 10, n_steps=480)
    sol = solve_master(lp, 0.0, dt_ode=np.pi / 100)
    per = 40
    assert np.max(np.abs(sol.values[-per - 1:] - sol.values[-2 * per - 1:-per])) < 1e-6


def test_scalar_solution_examples():
    lp = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0)
    assert scalar_nk_solution(lp, 0.3, 0.0) == 0.3
    assert scalar_nk_solution(lp, 0.0, 10.0) == pytest.approx(SCALAR_N_T10, abs=1e-12)
    still = LatticeParams(Omega=0.0, Gamma=0.1, k=0.5)
    nf = fermi(-2 * np.cos(0.5), 5.0)
    t = np.array([0.5, 3.0, 7.0])
    expected = 0.2 * np.exp(-0.2 * t) + nf * (1 - np.exp(-0.2 * t))
    assert np.allclose(scalar_nk_solution(still, 0.2, t), expected, atol=1e-12)


def test_scalar_solution_rejects_negative_time():
    with pytest.raises(ValidationError):
        scalar_nk_solution(LatticeParams(), 0.0, -1.0)


def test_scalar_solution_handles_unsorted_times():
    lp = LatticeParams()
    t = np.array([5.0, 1.0, 3.0])
    assert np.allclose(scalar_nk_solution(lp, 0.0, t), [scalar_nk_solution(lp, 0.0, x) for x in t], atol=1e-12)


@given(st.floats(0.05, 0.5), st.floats(0.2, 2.0), st.floats(-np.pi, np.pi))
def test_long_times_forget_the_initial_occupation(Gamma, Omega, k):
    lp = LatticeParams(Omega=Omega, Gamma=Gamma, k=k, dt=0.01)
    t = 26 / (2 * Gamma)
    a, b = scalar_nk_solution(lp, 0.0, t), scalar_nk_solution(lp, 1.0, t)
    assert abs(a - b) < 1e-8
    assert a == pytest.approx(steady_state_nkm(lp, k + Omega * t), abs=1e-8)
