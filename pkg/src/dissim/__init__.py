"""Kraus-channel simulation of driven-dissipative fermions on small quantum registers.

Submodules
----------
channels     density matrices, Kraus channels, confusion matrices
lattice      Trotterised evolution of one driven lattice mode
lindblad     continuous-time oracles for the lattice mode
hubbard      thermal-state preparation for the atomic-limit Hubbard site
circuits     gate-level blocks with reset and their induced channels
noise        reset and T1 error model, recurrences and fitting
postprocess  Floquet averaging, extrapolation, centering and stretching
experiments  configured runners used by the ``dissim`` command
"""

from .channels import KrausChannel, ValidationError, apply_channel, validate_channel
from .hubbard import HubbardParams, build_cycle, cycle_channel, thermal_state
from .lattice import DensitySeries, LatticeParams, evolve_density, trotter_channel

__version__ = "0.1.0"

__all__ = [
    "KrausChannel",
    "ValidationError",
    "apply_channel",
    "validate_channel",
    "HubbardParams",
    "build_cycle",
    "cycle_channel",
    "thermal_state",
    "DensitySeries",
    "LatticeParams",
    "evolve_density",
    "trotter_channel",
]
