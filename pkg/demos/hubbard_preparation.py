"""Preparing a thermal state of a single Hubbard site with reset gates.

The four Fock states of one site are visited in a fixed cycle.  On every
edge the ancilla swaps in part of the population with a probability chosen so
that the Gibbs distribution is the unique fixed point of one full step.  Here
the temperature is half the interaction, the Zeeman field a quarter of it, and
the chemical potential is solved for a filling of 0.83.

Run with ``python3 demos/hubbard_preparation.py``.
"""

import numpy as np

from dissim.channels import map_distance, trace_distance
from dissim.circuits import build_hubbard_step_transpiled, circuit_to_channel, transpiled_frame
from dissim.hubbard import (
    STATE_LABELS,
    build_cycle,
    cycle_channel,
    filling,
    prepare_thermal,
    protocol_params,
    stochastic_matrix,
    thermal_populations,
    thermal_state,
)

params = protocol_params()
gibbs = thermal_populations(params)
cycle = build_cycle(params)
print(f"mu = {params.mu:.6f} gives filling {filling(params):.3f}")
print("Gibbs populations: " + ", ".join(f"{l}={p:.4f}" for l, p in zip(STATE_LABELS, gibbs)))
print("cycle order " + " -> ".join(STATE_LABELS[i] for i in cycle.order))
print("edge probabilities " + ", ".join(f"{g:.4f}" for g in cycle.gammas))

states = prepare_thermal(params, n_steps=19)
target = thermal_state(params)
print("\nstep  trace distance to Gibbs")
for s, rho in enumerate(states):
    if s in (0, 1, 2, 4, 8, 12, 16, 19):
        print(f"{s:4d}  {trace_distance(rho, target):.3e}")

eig = np.sort(np.abs(np.linalg.eigvals(stochastic_matrix(cycle))))[::-1]
print(f"\nconvergence factor per step |lambda_2| = {eig[1]:.4f}")

# The hardware version: Gray-code ordered controls on a line of three qubits.
circuit = build_hubbard_step_transpiled(cycle)
print("transpiled gate counts:", circuit.census())
gap = map_distance(transpiled_frame(circuit_to_channel(circuit)), cycle_channel(cycle))
print(f"transpiled circuit vs cycle channel (map distance): {gap:.1e}")
