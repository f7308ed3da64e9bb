"""Hardware noise on the lattice experiment and how post-processing undoes it.

Imperfect resets leave the ancilla partly excited and T1 decay pulls the
system towards |0>.  Repeating the reset ``r`` times improves the first but
costs more of the second.  We generate noisy curves for r = 1..4, fit the
three noise parameters back from them, then run the correction pipeline:
discard the transient, average over periods, extrapolate in r, re-centre and
re-scale the amplitude.

Run with ``python3 demos/noise_and_pipeline.py``.
"""

import numpy as np

from dissim.lattice import LatticeParams
from dissim.noise import (
    IDEAL,
    NoiseParams,
    effective_gamma,
    fit_noise,
    reset_fixed_point,
    run_recurrence,
    synthetic_data,
)
from dissim.postprocess import discard_transient, floquet_average, max_distance, pipeline

device = NoiseParams(p0=0.97, p1=0.91, T=0.06)
print(f"device: {device}")
print(f"ancilla after many resets sits at a = {reset_fixed_point(device.p0, device.p1):.4f}")

# Part 1: fitting noise parameters from shot-sampled data.
lp_fit = LatticeParams(Omega=0.5, Gamma=0.1, beta=5.0, dt=0.7, n_steps=400)
rng = np.random.default_rng(7)
data = synthetic_data(lp_fit, device, shots=8192, rng=rng)
fit = fit_noise(data, lp_fit)
print("\nfit from 8192-shot curves:")
for name in ("T", "p0", "p1"):
    true, got = getattr(device, name), getattr(fit.noise, name)
    print(f"  {name:2s} true {true:.4f}  fitted {got:.4f}  rel. error {abs(got - true) / true:.2%}")
print(f"effective coupling seen by the system at r = 1: {effective_gamma(1.0, lp_fit, device.with_(r=1)):.4f}"
      f" (bare {lp_fit.Gamma})")

# Part 2: the correction pipeline on exact (shot-free) noisy curves.  The
# reference is the noiseless circuit at the same Trotter step, so only the
# hardware errors are being judged.
lp = lp_fit
noisy = {r: run_recurrence(lp, device.with_(r=r)) for r in (2, 3, 4)}
ideal = floquet_average(discard_transient(run_recurrence(lp, IDEAL)), 200)
print("\ndistance to the noiseless period curve:")
for r, series in noisy.items():
    print(f"  raw r = {r} curve      {max_distance(floquet_average(discard_transient(series), 200), ideal):.4f}")
fixed = pipeline(noisy, lp.Gamma, lp.Omega)
print(f"  after the pipeline   {max_distance(fixed, ideal):.4f}")
print(f"  period-mean occupation: ideal {ideal.mean:.4f}, corrected {fixed.mean:.4f}")
