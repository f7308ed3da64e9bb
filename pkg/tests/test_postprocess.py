import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dissim.channels import ValidationError
from dissim.lattice import DensitySeries, LatticeParams, n_max, steady_state_nkm, sweep_timestep, trotter_recurrence
from dissim.noise import IDEAL, NoiseParams, run_recurrence
from dissim.postprocess import (
    PeriodCurve,
    center,
    curve_from_csv,
    curve_to_csv,
    discard_transient,
    extrapolate_r,
    final_period,
    floquet_average,
    interpolate_quadratic,
    max_distance,
    pipeline,
    series_from_csv,
    series_to_csv,
    stretch,
)

TAU = 2 * np.pi / 0.5


def periodic_series(f, dt, n, tau=TAU):
    t = dt * np.arange(n)
    lp = LatticeParams(Omega=2 * np.pi / tau, dt=dt)
    return DensitySeries(t, f(2 * np.pi * t / tau), lp)


def curve(values, tau=TAU, n_periods=3):
    values = np.asarray(values, dtype=float)
    return PeriodCurve(tau * np.arange(len(values)) / len(values), values, n_periods, tau)


curves = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=40).map(curve)


# ---------------------------------------------------------------- discard


def test_discard_examples():
    s = periodic_series(np.sin, 0.1, 1000)
    assert len(discard_transient(s, 0)) == 1000
    cut = discard_transient(s, 30)
    assert len(cut) == 970 and cut.times[0] == pytest.approx(3.0)
    assert len(discard_transient(s)) == 970
    with pytest.raises(ValidationError):
        discard_transient(s, 1000)
    with pytest.raises(ValidationError):
        discard_transient(s, -1)


def test_discarded_steady_series_is_periodic():
    lp = LatticeParams(Omega=0.5, Gamma=0.5, beta=5.0, dt=TAU / 100, n_steps=500)
    s = discard_transient(trotter_recurrence(lp, 0.0), 300)
    assert np.max(np.abs(s.values[100:] - s.values[:-100])) < 1e-10


# ---------------------------------------------------------------- interpolation and averaging


def test_quadratic_interpolation_is_exact_on_parabolas():
    t = 0.3 * np.arange(20)
    y = 1.5 - 0.2 * t + 0.04 * t**2
    x = np.linspace(0, t[-1], 77)
    assert np.allclose(interpolate_quadratic(t, y, x), 1.5 - 0.2 * x + 0.04 * x**2, atol=1e-13)


def test_interpolation_error_is_third_order():
    errs = []
    for h in (0.1, 0.05):
        t = h * np.arange(int(6 / h) + 1)
        x = np.linspace(0.5, 5.5, 1001)
        errs.append(np.max(np.abs(interpolate_quadratic(t, np.sin(t), x) - np.sin(x))))
    assert errs[0] / errs[1] == pytest.approx(8, rel=0.2)


def test_interpolation_rejects_bad_input():
    with pytest.raises(ValidationError):
        interpolate_quadratic([0, 1], [0, 1], [0.5])
    with pytest.raises(ValidationError):
        interpolate_quadratic([0, 1, 3], [0, 1, 2], [0.5])
    with pytest.raises(ValidationError):
        interpolate_quadratic([0, 1, 2], [0, 1, 2], [2.5])


def test_periodic_input_averages_to_one_period():
    s = periodic_series(lambda p: 0.5 + 0.3 * np.sin(p), TAU / 64, 64 * 5 + 1)
    c = floquet_average(s, 64)
    assert c.n_periods == 5
    assert np.allclose(c.values, 0.5 + 0.3 * np.sin(2 * np.pi * np.arange(64) / 64), atol=1e-10)


def test_average_is_a_mean_not_a_sum():
    s = periodic_series(lambda p: 0.9 + 0 * p, TAU / 50, 50 * 6 + 1)
    assert np.allclose(floquet_average(s, 40).values, 0.9)


def test_averaging_shrinks_white_noise():
    rng = np.random.default_rng(7)
    per, periods = 50, 64
    n = per * periods + 1
    clean = periodic_series(lambda p: 0.5 + 0.2 * np.cos(p), TAU / per, n)
    noisy = DensitySeries(clean.times, clean.values + rng.normal(0, 0.01, n), clean.params)
    resid = floquet_average(noisy, per).values - floquet_average(clean, per).values
    assert np.std(resid) == pytest.approx(0.01 / np.sqrt(periods), rel=0.3)


def test_too_few_periods_rejected():
    s = periodic_series(np.sin, TAU / 50, 80)
    with pytest.raises(ValidationError, match="period"):
        floquet_average(s)


@pytest.mark.parametrize("Omega", [0.3, 0.5, 1.0])
def test_incommensurate_step_has_no_bias_beyond_interpolation(Omega):
    # sample the analytic steady state at the sweep step, average, compare on the grid
    lp = LatticeParams(Omega=Omega, Gamma=0.1, beta=5.0, dt=sweep_timestep(Omega))

    def oracle(t):
        return steady_state_nkm(lp, lp.k + Omega * t)

    errors = []
    for dt in (lp.dt, lp.dt / 2):
        t = dt * np.arange(int(12 * lp.tau / dt))
        c = floquet_average(DensitySeries(t, oracle(t), lp.with_(dt=dt)), 100)
        ref = oracle(c.grid)
        errors.append(np.max(np.abs(c.values - ref)))
        assert abs(c.mean - ref.mean()) < 1e-5
    assert errors[0] < 2e-3
    assert errors[0] / errors[1] > 5  # third order would give 8


def test_final_period_reconstructs_last_tau():
    s = periodic_series(lambda p: 0.5 + 0.25 * np.sin(p), TAU / 40, 61)
    c = final_period(s, 40)
    assert c.n_periods == 1
    assert np.allclose(c.values, 0.5 + 0.25 * np.sin(2 * np.pi * np.arange(40) / 40), atol=2e-3)
    with pytest.raises(ValidationError):
        final_period(periodic_series(np.sin, TAU / 40, 30))


def test_period_needs_a_field():
    s = DensitySeries(np.arange(10.0), np.zeros(10), LatticeParams(Omega=0.0))
    with pytest.raises(ValidationError):
        floquet_average(s)


def test_k_m_wraps_into_brillouin_zone():
    c = curve(np.linspace(0, 1, 8))
    km, _ = c.as_nkm(3.0)
    assert np.all((km >= -np.pi) & (km < np.pi)) and np.all(np.diff(km) > 0)


# ---------------------------------------------------------------- center and stretch


def test_center_examples():
    base = 0.5 + 0.2 * np.sin(np.linspace(0, 2 * np.pi, 50, endpoint=False))
    assert np.allclose(center(curve(base)).values, base, atol=1e-15)
    assert np.allclose(center(curve(base + 0.07)).values, base, atol=1e-15)


def test_stretch_examples():
    target = n_max(0.1, 0.5)
    wave = np.sin(np.linspace(0, 2 * np.pi, 40, endpoint=False))
    full = curve(0.5 + (target - 0.5) * wave)
    assert np.allclose(stretch(full, 0.1, 0.5).values, full.values, atol=1e-15)
    small = curve(0.5 + 0.8 * (target - 0.5) * wave)
    assert np.allclose(stretch(small, 0.1, 0.5).values - 0.5, 1.25 * (small.values - 0.5), atol=1e-14)


def test_flat_curve_is_left_alone_with_warning():
    flat = curve(np.full(10, 0.5))
    with pytest.warns(RuntimeWarning, match="amplitude"):
        out = stretch(flat, 0.1, 0.5)
    assert np.array_equal(out.values, flat.values)


@given(curves)
def test_center_is_idempotent(c):
    once = center(c)
    assert once.mean == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(center(once).values, once.values, atol=1e-12)


@given(curves, st.floats(0.05, 1.0), st.floats(0.1, 2.0))
def test_stretch_is_idempotent(c, Gamma, Omega):
    c = center(c)
    if c.values.max() - 0.5 < 1e-6:
        return
    once = stretch(c, Gamma, Omega)
    assert once.values.max() == pytest.approx(n_max(Gamma, Omega), abs=1e-12)
    assert np.allclose(stretch(once, Gamma, Omega).values, once.values, atol=1e-12)


def test_center_and_stretch_do_not_commute():
    c = curve(0.6 + 0.1 * np.sin(np.linspace(0, 2 * np.pi, 60, endpoint=False)))
    a = stretch(center(c), 0.1, 0.5)
    b = center(stretch(c, 0.1, 0.5))
    assert max_distance(a, b) > 1e-2


# ---------------------------------------------------------------- extrapolation


def test_identical_curves_extrapolate_to_themselves():
    base = np.linspace(0.2, 0.8, 30)
    out = extrapolate_r({r: curve(base) for r in (2, 3, 4)})
    assert np.allclose(out.values, base, atol=1e-13)


@given(st.floats(-1, 1), st.floats(-0.2, 0.2), st.floats(-0.05, 0.05))
def test_quadratic_in_r_is_recovered_exactly(c0, c1, c2):
    grid = np.linspace(0, 1, 12)
    curves_r = {r: curve(c0 * grid + c1 * r + c2 * r * r) for r in (1, 2, 3, 4)}
    assert np.allclose(extrapolate_r(curves_r).values, c0 * grid, atol=1e-12)
    assert np.allclose(extrapolate_r(curves_r, include_r1=True).values, c0 * grid, atol=1e-12)


def test_extrapolation_errors():
    with pytest.raises(ValidationError, match="missing"):
        extrapolate_r({2: curve(np.ones(4)), 3: curve(np.ones(4))})
    with pytest.raises(ValidationError, match="grid"):
        extrapolate_r({2: curve(np.ones(4)), 3: curve(np.ones(4)), 4: curve(np.ones(5))})


def test_extrapolation_beats_every_input_curve():
    lp = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0, dt=0.7, n_steps=400)
    noise = NoiseParams(p0=0.97, p1=0.91, T=0.06)
    ideal = floquet_average(discard_transient(run_recurrence(lp, IDEAL)), 200)
    inputs = {r: floquet_average(discard_transient(run_recurrence(lp, noise.with_(r=r))), 200) for r in (2, 3, 4)}
    extrap = extrapolate_r(inputs)
    assert max_distance(extrap, ideal) < min(max_distance(c, ideal) for c in inputs.values())


# ---------------------------------------------------------------- full pipeline


def test_pipeline_improves_on_raw_data_and_is_centered():
    lp = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0, dt=0.7, n_steps=400)
    noise = NoiseParams(p0=0.97, p1=0.91, T=0.06)
    data = {r: run_recurrence(lp, noise.with_(r=r)) for r in (2, 3, 4)}
    ideal = floquet_average(discard_transient(run_recurrence(lp, IDEAL)), 200)
    out = pipeline(data, lp.Gamma, lp.Omega)
    assert out.mean == pytest.approx(0.5, abs=1e-12)
    raw = min(max_distance(floquet_average(discard_transient(s), 200), ideal) for s in data.values())
    assert max_distance(out, ideal) < raw / 3


def test_zero_temperature_maximum_within_1e_4():
    # beta = 200 leaves a 6e-4 thermal rounding of the peak; beta = 2000 meets 1e-4
    for Gamma, Omega in ((0.1, 0.5), (0.05, 1.0), (0.3, 0.7)):
        lp = LatticeParams(Omega=Omega, Gamma=Gamma, beta=2000.0, dt=0.01)
        peak = max(steady_state_nkm(lp, np.linspace(-np.pi, np.pi, 4001), points=400))
        assert peak == pytest.approx(n_max(Gamma, Omega), abs=1e-4)


# ---------------------------------------------------------------- CSV


def test_series_csv_round_trip(tmp_path):
    s = trotter_recurrence(LatticeParams(n_steps=25), 0.3)
    text = series_to_csv(s, tmp_path / "s.csv")
    assert text.splitlines()[0] == "t,n"
    back = series_from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.times, s.times) and np.array_equal(back.values, s.values)
    assert np.array_equal(series_from_csv(text).values, s.values)


def test_curve_csv_round_trip():
    c = curve(np.random.default_rng(2).uniform(0, 1, 33), n_periods=7)
    text = curve_to_csv(c)
    assert text.splitlines()[0] == "t_mod_tau,n_ave,n_periods"
    back = curve_from_csv(text, TAU)
    assert np.array_equal(back.grid, c.grid) and np.array_equal(back.values, c.values)
    assert back.n_periods == 7


def test_csv_header_is_mandatory():
    with pytest.raises(ValidationError, match="header"):
        series_from_csv("0.0,0.5\n1.0,0.6\n")
    with pytest.raises(ValidationError):
        curve_from_csv("t,n\n0,1\n", TAU)
