"""Dissipative thermal-state preparation for the atomic-limit Hubbard model.

The four occupation states of one site are indexed by ``2 n_down + n_up``::

    0 -> |0>      1 -> |up>      2 -> |down>      3 -> |up down>

so on a two-qubit register qubit 0 (most significant) holds ``n_down`` and
qubit 1 holds ``n_up``.  A single 4-cycle through these states, with
transition probability ``gamma_i`` out of state ``i`` proportional to the
inverse Boltzmann factor, has the Gibbs state as its fixed point: the flux
``gamma_i p_i`` is the same along every edge.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import permutations

import numpy as np
from scipy.optimize import brentq

from .channels import KrausChannel, ValidationError, apply_channel, basis_state

STATE_LABELS = ("0", "up", "down", "updown")
EMPTY, UP, DOWN, DOUBLE = 0, 1, 2, 3
#: 0 -> down -> updown -> up -> 0
DEFAULT_ORDER = (EMPTY, DOWN, DOUBLE, UP)


@dataclass(frozen=True)
class HubbardParams:
    """Atomic-limit Hubbard site.  ``U`` is the energy unit."""

    mu: float = 0.0
    B: float = 0.0
    beta: float = 1.0
    U: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValidationError(f"beta must be finite and >= 0, got {self.beta}")

    def with_(self, **changes) -> "HubbardParams":
        return replace(self, **changes)


def energies(params: HubbardParams) -> np.ndarray:
    """Site energies ``(e_0, e_up, e_down, e_updown)``."""
    return np.array(
        [
            0.0,
            -params.mu / 2 - params.B / 2,
            -params.mu / 2 + params.B / 2,
            params.U - params.mu,
        ]
    )


def thermal_populations(params: HubbardParams) -> np.ndarray:
    e = energies(params)
    w = np.exp(-params.beta * (e - e.min()))
    return w / w.sum()


def thermal_state(params: HubbardParams) -> np.ndarray:
    """Diagonal Gibbs state ``exp(-beta H) / Z``."""
    return np.diag(thermal_populations(params)).astype(complex)


def filling(params: HubbardParams) -> float:
    """Thermal expectation of ``n_up + n_down``."""
    p = thermal_populations(params)
    return float(p[UP] + p[DOWN] + 2 * p[DOUBLE])


def mu_for_filling(target: float, B: float, beta: float, U: float = 1.0) -> float:
    """Chemical potential giving thermal filling ``target`` (root-solve in ``mu``)."""
    if not 0.0 < target < 2.0:
        raise ValidationError(f"filling must lie in (0, 2), got {target}")
    if beta == 0:
        raise ValidationError("filling is pinned to 1 at beta = 0")

    def f(mu):
        return filling(HubbardParams(mu=mu, B=B, beta=beta, U=U)) - target

    span = 10.0 * (abs(U) + abs(B) + 1.0) + 50.0 / beta
    return float(brentq(f, -span, span, xtol=1e-14, rtol=1e-14))


@dataclass(frozen=True)
class TransitionCycle:
    """A 4-cycle through the occupation states with its transition probabilities.

    ``gammas[i]`` is the probability of hopping from state ``i`` to
    ``next_state(i)``; it is indexed by state, not by position in ``order``.
    """

    order: tuple
    gammas: np.ndarray
    normalization: float

    def __post_init__(self):
        _check_order(self.order)
        g = np.asarray(self.gammas, dtype=float)
        if g.shape != (4,) or np.any(g < 0) or np.any(g > 1 + 1e-15):
            raise ValidationError("gammas must be four probabilities in [0, 1]")
        g = np.clip(g, 0.0, 1.0)
        g.setflags(write=False)
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))

    def next_state(self, i: int) -> int:
        pos = self.order.index(i)
        return self.order[(pos + 1) % 4]

    def edges(self) -> list[tuple[int, int]]:
        """``(i, next(i))`` pairs in cycle order."""
        return [(i, self.next_state(i)) for i in self.order]

    @property
    def angles(self) -> np.ndarray:
        """Rotation angles ``Theta_i = 2 asin sqrt(gamma_i)``, indexed by state."""
        return 2 * np.arcsin(np.sqrt(self.gammas))


def _check_order(order) -> None:
    if sorted(int(i) for i in order) != [0, 1, 2, 3]:
        raise ValidationError(f"order must be a single cycle through states 0..3, got {order}")


def all_cycles() -> list[tuple[int, ...]]:
    """The six distinct 4-cycles, each listed starting from the empty state."""
    return [(0,) + p for p in permutations((1, 2, 3))]


def build_cycle(params: HubbardParams, order=DEFAULT_ORDER) -> TransitionCycle:
    """Transition probabilities ``gamma_i = N exp(beta e_i)`` with ``max gamma = 1``."""
    _check_order(order)
    e = energies(params)
    gammas = np.exp(params.beta * (e - e.max()))
    return TransitionCycle(tuple(order), gammas, float(np.exp(-params.beta * e.max())))


def custom_cycle(gammas, order=DEFAULT_ORDER) -> TransitionCycle:
    """Cycle with explicitly chosen probabilities (not tied to a Hamiltonian)."""
    return TransitionCycle(tuple(order), np.asarray(gammas, dtype=float), float("nan"))


def cycle_channel(cycle: TransitionCycle) -> KrausChannel:
    """Kraus map of one step, grouped by which occupation bits flip.

    ``K_0 = sum_m sqrt(1 - gamma_m) |m><m|`` keeps every state.  For each
    nonzero flip mask ``c`` (XOR of a state index with its successor),
    ``K_c = -i sum_{m : m ^ next(m) = c} sqrt(gamma_m) |next(m)><m|``.
    This is the map realised by copying the register to ancillas and
    resetting them: outcomes with the same flip pattern are
    indistinguishable, and distinguishable outcomes never interfere, which
    makes the Gibbs state an exact fixed point.
    """
    g = cycle.gammas
    ops = {0: np.diag(np.sqrt(1 - g)).astype(complex)}
    for c in (1, 2, 3):
        ops[c] = np.zeros((4, 4), dtype=complex)
    for m, nxt in cycle.edges():
        ops[m ^ nxt][nxt, m] += -1j * np.sqrt(g[m])
    return KrausChannel(tuple(ops[c] for c in (0, 1, 2, 3)))


def edge_channel(cycle: TransitionCycle) -> KrausChannel:
    """One Kraus operator per edge, ``sqrt(1-g)|i><i| - i sqrt(g)|j><i|``.

    Complete and population-equivalent to :func:`cycle_channel`, but it keeps
    coherent superpositions of "stay" and "hop" branches from different
    states, so the Gibbs state is not its fixed point.  Kept for comparison.
    """
    ops = []
    for i, j in cycle.edges():
        k = np.zeros((4, 4), dtype=complex)
        k[i, i] = np.sqrt(1 - cycle.gammas[i])
        k[j, i] = -1j * np.sqrt(cycle.gammas[i])
        ops.append(k)
    return KrausChannel(tuple(ops))


def stochastic_matrix(cycle: TransitionCycle) -> np.ndarray:
    """Column-stochastic population map: ``M[next(i), i] = gamma_i``, ``M[i, i] = 1 - gamma_i``."""
    m = np.diag(1 - cycle.gammas)
    for i, j in cycle.edges():
        m[j, i] += cycle.gammas[i]
    return m


def prepare_thermal(
    params: HubbardParams,
    order=DEFAULT_ORDER,
    n_steps: int = 19,
    rho0: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Iterate the cycle map, returning ``[rho_0, rho_1, ..., rho_n]``.

    The default initial state is the vacuum ``|0><0|``.
    """
    if n_steps < 1:
        raise ValidationError("n_steps must be >= 1")
    channel = cycle_channel(build_cycle(params, order))
    rho = basis_state(EMPTY, 4) if rho0 is None else np.asarray(rho0, dtype=complex)
    out = [rho]
    for _ in range(n_steps):
        rho = apply_channel(channel, rho)
        out.append(rho)
    return out


def protocol_params(filling_target: float = 0.83, beta: float = 2.0, B: float = 0.25) -> HubbardParams:
    """Parameters of the demonstration run: ``T = U/2``, ``B = U/4``, filling 0.83."""
    return HubbardParams(mu=mu_for_filling(filling_target, B, beta), B=B, beta=beta)
