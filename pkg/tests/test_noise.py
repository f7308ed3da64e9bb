import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissim.channels import (
    ValidationError,
    apply_channel,
    basis_state,
    compose,
    identity_channel,
    map_distance,
    random_density,
    reset_channel,
    validate_channel,
)
from dissim.lattice import LatticeParams, trotter_recurrence
from dissim.noise import (
    IDEAL,
    NoiseParams,
    closed_form_literal,
    closed_form_ns,
    damping_channel,
    effective_gamma,
    fit_noise,
    kernel_base,
    noisy_reset_channel,
    recurrence_step,
    reset_fixed_point,
    reset_matrix,
    reset_success,
    run_recurrence,
    simulate_channels,
    synthetic_data,
)

DEVICE = NoiseParams(p0=0.97, p1=0.91, T=0.06, r=1)
LP = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0, k=0.0, dt=0.7, n_steps=400)


@st.composite
def noise_params(draw, r=None):
    return NoiseParams(
        p0=draw(st.floats(0.5, 1.0)),
        p1=draw(st.floats(0.5, 1.0)),
        T=draw(st.floats(0.0, 1.0)),
        r=r if r is not None else draw(st.integers(1, 5)),
    )


@st.composite
def lattice_params(draw):
    Gamma = draw(st.floats(0.01, 0.5))
    return LatticeParams(
        Omega=draw(st.floats(0.1, 2.0)),
        Gamma=Gamma,
        beta=draw(st.floats(0.0, 20.0)),
        k=draw(st.floats(-np.pi, np.pi)),
        dt=draw(st.floats(0.01, 0.99)) / (2 * Gamma),
    )


# ---------------------------------------------------------------- parameters


@pytest.mark.parametrize("kw", [{"p0": 1.2}, {"p1": -0.1}, {"T": -1}, {"r": -1}, {"r": 1.5}])
def test_invalid_noise_params_rejected(kw):
    with pytest.raises(ValidationError):
        NoiseParams(**kw)


def test_zero_resets_are_undefined():
    with pytest.raises(ValidationError):
        reset_success(0.5, DEVICE.with_(r=0))
    with pytest.raises(ValidationError):
        noisy_reset_channel(DEVICE.with_(r=0))


# ---------------------------------------------------------------- reset


def test_reset_success_examples():
    assert reset_success(0.37, NoiseParams(p0=1, p1=1)) == 1.0
    assert reset_success(0.5, DEVICE) == pytest.approx(0.94, abs=1e-15)
    fixed = reset_fixed_point(0.97, 0.91)
    assert fixed == pytest.approx(0.91 / 0.94)
    for a0 in (0.0, 0.5, 1.0):
        assert reset_success(a0, DEVICE.with_(r=60)) == pytest.approx(fixed, abs=1e-14)


@given(st.floats(0.5, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(1, 8))
def test_reset_success_grows_with_repetitions(p0, frac, afrac, r):
    p1 = 0.5 + frac * (p0 - 0.5)  # p0 >= p1
    a0 = afrac * reset_fixed_point(p0, p1)
    noise = NoiseParams(p0=p0, p1=p1, r=r)
    assert reset_success(a0, noise.with_(r=r + 1)) >= reset_success(a0, noise) - 1e-15


def test_ideal_noisy_reset_is_ideal_reset():
    assert map_distance(noisy_reset_channel(NoiseParams(p0=1, p1=1)), reset_channel()) < 1e-15


@given(noise_params(), st.integers(0, 2**32 - 1))
def test_noisy_reset_kills_coherence_and_matches_success(noise, seed):
    ch = noisy_reset_channel(noise)
    assert validate_channel(ch) < 1e-12
    rho = random_density(2, np.random.default_rng(seed))
    out = apply_channel(ch, rho)
    assert out[0, 1] == 0
    assert out[0, 0].real == pytest.approx(reset_success(rho[0, 0].real, noise), abs=1e-12)


@given(noise_params(r=1), st.integers(2, 6))
def test_repeated_resets_compose(noise, r):
    single = noisy_reset_channel(noise)
    assert map_distance(compose(*[single] * r), noisy_reset_channel(noise.with_(r=r))) < 1e-12
    assert np.allclose(reset_matrix(noise.with_(r=r)).sum(axis=0), 1.0)


# ---------------------------------------------------------------- damping


def test_damping_examples():
    assert map_distance(damping_channel(NoiseParams(T=0.0)), identity_channel(2)) < 1e-15
    full = apply_channel(damping_channel(NoiseParams(T=50.0, r=2)), basis_state(1, 2))
    assert np.allclose(full, basis_state(0, 2), atol=1e-12)
    rho = random_density(2, np.random.default_rng(3))
    out = apply_channel(damping_channel(DEVICE), rho)
    assert out[1, 1].real == pytest.approx(np.exp(-0.06) * rho[1, 1].real, abs=1e-15)


# ---------------------------------------------------------------- recurrences


def test_ideal_recurrence_is_the_noiseless_map():
    n, a = 0.3, 1.0
    series = trotter_recurrence(LP, 0.3, 10).values
    for s in range(10):
        n, a = recurrence_step(n, a, s, LP, IDEAL)
        assert a == 1.0
        assert n == pytest.approx(series[s + 1], abs=1e-15)


def test_no_dissipation_no_noise_holds_occupation():
    lp = LP.with_(Gamma=0.0)
    assert recurrence_step(0.42, 1.0, 5, lp, NoiseParams(T=0.0))[0] == pytest.approx(0.42, abs=1e-15)


def test_recurrence_kernel_matches_python_step():
    n, a = 1.0, 1.0
    series = run_recurrence(LP, DEVICE.with_(r=2), n_steps=50).values
    for s in range(50):
        n, a = recurrence_step(n, a, s, LP, DEVICE.with_(r=2))
        assert n == pytest.approx(series[s + 1], abs=1e-14)


def test_printed_ancilla_update_handles_equal_fidelities():
    n, a = recurrence_step(0.5, 0.7, 0, LP, NoiseParams(p0=0.9, p1=0.9))
    assert a == pytest.approx(reset_fixed_point(0.9, 0.9))
    assert np.isfinite(n)


@settings(max_examples=15)
@given(lattice_params(), noise_params(), st.floats(0, 1), st.floats(0, 1))
def test_recurrence_equals_density_matrix_simulation(lp, noise, n0, a0):
    a = run_recurrence(lp, noise, n0, a0, n_steps=60).values
    b = simulate_channels(lp, noise, n0, a0, n_steps=60).values
    assert np.max(np.abs(a - b)) < 1e-10


def test_recurrence_equals_simulation_at_device_values():
    for r in (1, 2, 3, 4):
        a = run_recurrence(LP, DEVICE.with_(r=r)).values
        b = simulate_channels(LP, DEVICE.with_(r=r)).values
        assert np.max(np.abs(a - b)) < 1e-10


# ---------------------------------------------------------------- closed form


def test_closed_form_without_noise_is_error_free_solution():
    exact = trotter_recurrence(LP, 1.0, 60).values
    for s in (0, 1, 10, 60):
        assert closed_form_ns(s, 1.0, LP, IDEAL, n0=1.0) == pytest.approx(exact[s], abs=1e-13)


@given(lattice_params(), noise_params(), st.floats(0, 1), st.floats(0, 1))
def test_closed_form_matches_frozen_recurrence(lp, noise, a0, n0):
    frozen = run_recurrence(lp, noise, n0, a0, n_steps=300, freeze_a=True).values
    for s in (0, 1, 17, 150, 300):
        assert closed_form_ns(s, a0, lp, noise, n0=n0) == pytest.approx(frozen[s], abs=1e-9)


def test_closed_form_long_time_matches_recurrence_to_1000_steps():
    frozen = run_recurrence(LP, DEVICE, 1.0, 0.9, n_steps=1000, freeze_a=True).values
    got = np.array([closed_form_ns(s, 0.9, LP, DEVICE, n0=1.0) for s in range(0, 1001, 50)])
    assert np.max(np.abs(got - frozen[::50])) < 1e-9


def test_literal_closed_form_only_agrees_at_full_ancilla_success():
    s = 200
    assert closed_form_literal(s, 1.0, LP, DEVICE) == pytest.approx(closed_form_ns(s, 1.0, LP, DEVICE), abs=1e-14)
    assert abs(closed_form_literal(s, 0.9, LP, DEVICE) - closed_form_ns(s, 0.9, LP, DEVICE)) > 1e-3


def test_effective_gamma_reproduces_kernel():
    g = effective_gamma(0.95, LP, DEVICE)
    assert 1 - 2 * g * LP.dt == pytest.approx(kernel_base(0.95, LP, DEVICE))
    assert g > LP.Gamma


@given(lattice_params(), noise_params(), st.floats(0, 1), st.floats(1e-4, 0.1), st.integers(0, 30))
def test_perturbations_decay_with_the_kernel(lp, noise, a0, delta, s0):
    base = run_recurrence(lp, noise, 0.5, a0, n_steps=s0 + 40, freeze_a=True).values
    n = base[s0] + delta
    q = kernel_base(a0, lp, noise)
    for s in range(s0, s0 + 40):
        n = recurrence_step(n, a0, s, lp, noise)[0]
        assert abs(n - base[s + 1]) == pytest.approx(delta * abs(q) ** (s + 1 - s0), abs=1e-10)


# ---------------------------------------------------------------- fitting


def test_noiseless_fit_recovers_device_values():
    fit = fit_noise(synthetic_data(LP, DEVICE), LP)
    assert fit.noise.T == pytest.approx(0.06, abs=1e-6)
    assert fit.noise.p0 == pytest.approx(0.97, abs=1e-6)
    assert fit.noise.p1 == pytest.approx(0.91, abs=1e-6)
    assert fit.residual < 1e-12 and fit.starts == 10


def test_shot_noise_fit_within_five_percent():
    data = synthetic_data(LP, DEVICE, shots=8192, rng=np.random.default_rng(5))
    est = fit_noise(data, LP, workers=2).noise
    rel = np.abs(np.array([est.T, est.p0, est.p1]) - [0.06, 0.97, 0.91]) / [0.06, 0.97, 0.91]
    assert np.all(rel < 0.05)


def test_ideal_data_fits_at_the_boundary():
    data = {r: run_recurrence(LP, IDEAL.with_(r=r)) for r in (1, 2, 3, 4)}
    est = fit_noise(data, LP).noise
    assert est.T < 1e-4 and est.p0 > 0.999


def test_constant_data_warns():
    flat = run_recurrence(LP.with_(Gamma=0.0), IDEAL, n_steps=50)
    with pytest.warns(RuntimeWarning, match="ill-posed"):
        fit_noise({1: flat}, LP.with_(Gamma=0.0))


def test_fit_requires_data():
    with pytest.raises(ValidationError):
        fit_noise({}, LP)


def test_shot_noise_needs_rng():
    with pytest.raises(ValidationError):
        synthetic_data(LP, DEVICE, shots=100)


def test_parallel_fit_matches_serial():
    data = synthetic_data(LP, DEVICE, n_steps=200, shots=4096, rng=np.random.default_rng(1))
    lp = LP.with_(n_steps=200)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a, b = fit_noise(data, lp), fit_noise(data, lp, workers=4)
    assert a.noise == b.noise and a.residual == b.residual
