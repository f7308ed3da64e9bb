"""Gate-level circuits with mid-circuit reset, and their induced channels.

Qubit 0 is the most significant bit of every register.  On a lattice-mode
qubit the computational state ``|0>`` means *occupied* and ``|1>`` means
*empty*, the hardware convention in which a freshly reset qubit holds an
electron; :func:`lattice_frame` converts channels from the
``(empty, occupied)`` ordering of :mod:`dissim.lattice` to this one.

Gate kinds
----------
``X``       Pauli X on one qubit.
``CNOT``    control, target.
``RZ``      ``exp(-i angle Z / 2)``.
``RY``      ``exp(-i angle Y / 2)``.
``CRY``     control, target, angle.
``RESET``   non-unitary reset of one qubit to ``|0>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .channels import KrausChannel, ValidationError, kraus_from_choi
from .hubbard import TransitionCycle
from .lattice import LatticeParams, dispersion, step_angles

GATE_KINDS = {"X": (1, False), "CNOT": (2, False), "RZ": (1, True), "RY": (1, True), "CRY": (2, True), "RESET": (1, False)}
ENTANGLING = {"CNOT", "CRY"}

_X = np.array([[0, 1], [1, 0]], dtype=complex)


def rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _controlled(u: np.ndarray) -> np.ndarray:
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        arity, has_angle = GATE_KINDS[self.kind]
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) != arity or len(set(qubits)) != arity:
            raise ValidationError(f"{self.kind} needs {arity} distinct qubits, got {self.qubits}")
        if has_angle != (self.angle is not None):
            raise ValidationError(f"{self.kind} angle mismatch: {self.angle}")
        object.__setattr__(self, "qubits", qubits)
        if self.angle is not None:
            object.__setattr__(self, "angle", float(self.angle))

    def matrix(self) -> np.ndarray:
        """Unitary on the gate's own qubits (first listed is most significant)."""
        if self.kind == "X":
            return _X
        if self.kind == "CNOT":
            return _controlled(_X)
        if self.kind == "RZ":
            return rz(self.angle)
        if self.kind == "RY":
            return ry(self.angle)
        if self.kind == "CRY":
            return _controlled(ry(self.angle))
        raise ValidationError("RESET has no unitary matrix")

    def to_line(self) -> str:
        parts = [str(q) for q in self.qubits]
        if self.angle is not None:
            parts.append(repr(self.angle))
        return f"{self.kind} {','.join(parts)}"


@dataclass
class Circuit:
    """Ordered gate list on ``width`` qubits with a system/ancilla split.

    ``system`` defaults to every qubit not listed in ``ancillas``.
    """

    width: int
    gates: list = field(default_factory=list)
    system: tuple | None = None
    ancillas: tuple = ()

    def __post_init__(self):
        self.ancillas = tuple(self.ancillas)
        if self.system is None:
            self.system = tuple(q for q in range(self.width) if q not in self.ancillas)
        self.system = tuple(self.system)
        if sorted(self.system + self.ancillas) != list(range(self.width)):
            raise ValidationError("system and ancilla qubits must partition the register")
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate) -> None:
        if max(gate.qubits) >= self.width or min(gate.qubits) < 0:
            raise ValidationError(f"{gate} outside register of width {self.width}")

    def add(self, kind: str, *qubits: int, angle: float | None = None) -> "Circuit":
        gate = Gate(kind, qubits, angle)
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, other: "Circuit") -> "Circuit":
        if (other.width, other.system, other.ancillas) != (self.width, self.system, self.ancillas):
            raise ValidationError("cannot concatenate circuits with different registers")
        self.gates.extend(other.gates)
        return self

    def census(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def entangling_count(self) -> int:
        return sum(1 for g in self.gates if g.kind in ENTANGLING)

    def to_text(self) -> str:
        """Line-oriented serialisation, one gate per line, metadata in comments."""
        lines = [
            f"# width {self.width}",
            f"# system {','.join(map(str, self.system))}",
            f"# ancillas {','.join(map(str, self.ancillas))}",
        ]
        lines += [g.to_line() for g in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        meta: dict[str, str] = {}
        gates = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                meta[key] = value.strip()
                continue
            line = line.split("#", 1)[0].strip()
            kind, _, args = line.partition(" ")
            fields = [a for a in args.replace(" ", "").split(",") if a]
            arity, has_angle = GATE_KINDS.get(kind, (None, None))
            if arity is None:
                raise ValidationError(f"unknown gate kind {kind!r}")
            if len(fields) != arity + has_angle:
                raise ValidationError(f"malformed gate line {raw!r}")
            angle = float(fields[-1]) if has_angle else None
            gates.append(Gate(kind, tuple(int(f) for f in fields[:arity]), angle))

        def ints(key):
            v = meta.get(key, "")
            return tuple(int(x) for x in v.split(",") if x)

        if "width" not in meta:
            raise ValidationError("missing '# width' header")
        width = int(meta["width"])
        system = ints("system") or tuple(range(width))
        return cls(width, gates, system, ints("ancillas"))


# --------------------------------------------------------------------------
# circuit -> channel
# --------------------------------------------------------------------------


def _embed(op: np.ndarray, qubits: tuple, width: int) -> np.ndarray:
    """Lift an operator on ``qubits`` to the full ``width``-qubit register."""
    rest = [q for q in range(width) if q not in qubits]
    full = np.kron(op, np.eye(2 ** len(rest)))
    order = list(qubits) + rest  # axis i of ``full`` is qubit order[i]
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * width))
    t = t.transpose(list(perm) + [width + p for p in perm])
    return t.reshape(2**width, 2**width)


_RESET_OPS = (np.array([[1, 0], [0, 0]], dtype=complex), np.array([[0, 1], [0, 0]], dtype=complex))


def _apply_gates(circuit: Circuit, states: np.ndarray) -> np.ndarray:
    """Run the circuit on a stack of full-register operators, shape ``(n, d, d)``."""
    w = circuit.width
    for g in circuit.gates:
        if g.kind == "RESET":
            ops = [_embed(k, g.qubits, w) for k in _RESET_OPS]
            states = sum(k @ states @ k.conj().T for k in ops)
        else:
            u = _embed(g.matrix(), g.qubits, w)
            states = u @ states @ u.conj().T
    return states


def _check_terminal_resets(circuit: Circuit) -> None:
    for a in circuit.ancillas:
        last = [g for g in circuit.gates if a in g.qubits]
        if not last or last[-1].kind != "RESET":
            raise ValidationError(f"ancilla qubit {a} is not reset at the end of the block")


def circuit_to_channel(circuit: Circuit, require_reset: bool = True) -> KrausChannel:
    """Kraus channel induced on the system qubits.

    Ancillas start in ``|0>``; every ancilla must end with a ``RESET``
    (unless ``require_reset`` is False) and is traced out.  The map is
    tomographed on all system matrix units and returned in Kraus form
    via its Choi matrix.
    """
    if require_reset:
        _check_terminal_resets(circuit)
    ns, na = len(circuit.system), len(circuit.ancillas)
    ds, da = 2**ns, 2**na
    w = circuit.width
    order = list(circuit.system) + list(circuit.ancillas)
    perm = np.argsort(order)
    anc0 = np.zeros((da, da), dtype=complex)
    anc0[0, 0] = 1.0
    units = np.zeros((ds * ds, ds, ds), dtype=complex)
    units[np.arange(ds * ds), np.arange(ds * ds) // ds, np.arange(ds * ds) % ds] = 1.0
    full = np.einsum("nij,ab->niajb", units, anc0).reshape([ds * ds] + [2] * (2 * w))
    full = full.transpose([0] + [1 + p for p in perm] + [1 + w + p for p in perm])
    out = _apply_gates(circuit, full.reshape(ds * ds, 2**w, 2**w))
    # back to (system, ancilla) ordering, then trace the ancillas
    t = out.reshape([ds * ds] + [2] * (2 * w))
    t = t.transpose([0] + [1 + q for q in order] + [1 + w + q for q in order])
    reduced = np.einsum("niaja->nij", t.reshape(ds * ds, ds, da, ds, da))
    # Choi matrix sum_ij |i><j| (x) E(|i><j|)
    choi = reduced.reshape(ds, ds, ds, ds).transpose(0, 2, 1, 3).reshape(ds * ds, ds * ds)
    return kraus_from_choi(choi, ds, ds)


def lattice_frame(channel: KrausChannel) -> KrausChannel:
    """Re-express a mode channel in the qubit convention (``|0>`` = occupied)."""
    return KrausChannel(tuple(_X @ k @ _X for k in channel.operators))


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------


def build_lattice_step(params: LatticeParams, step: int) -> Circuit:
    """Exact Trotter block: qubit 0 is the mode, qubits 1 and 2 are ancillas.

    The fill branch (mode empty) rotates ancilla 1 by ``theta``; the drain
    branch (mode occupied) rotates ancilla 2 by ``phi``.  Each ancilla then
    flips the mode by CNOT, the mode acquires the dispersion phase and both
    ancillas are reset.  Separate ancillas keep the fill and drain outcomes
    distinguishable, which the three-operator map requires.
    """
    theta, phi = step_angles(params, step)
    eps = dispersion(params, step)
    c = Circuit(3, system=(0,), ancillas=(1, 2))
    c.add("CRY", 0, 1, angle=theta)
    c.add("X", 0).add("CRY", 0, 2, angle=phi).add("X", 0)
    c.add("CNOT", 1, 0).add("CNOT", 2, 0)
    c.add("RZ", 0, angle=eps * params.dt)
    c.add("RESET", 1).add("RESET", 2)
    return c


def build_lattice_step_hardware(params: LatticeParams, step: int, reset: bool = True) -> Circuit:
    """Two-qubit block with one ancilla, as run on hardware.

    Its Kraus set is ``{K0, K1 + K2}``: populations follow the Trotter map
    exactly, but the fill and drain branches share one ancilla outcome, so
    a coherence of the mode picks up an extra ``sin(theta/2) sin(phi/2)``
    swap term.  ``reset=False`` omits the terminal reset so the noise model
    can insert its own.
    """
    theta, phi = step_angles(params, step)
    eps = dispersion(params, step)
    c = Circuit(2, system=(0,), ancillas=(1,))
    c.add("CRY", 0, 1, angle=theta)
    c.add("X", 0).add("CRY", 0, 1, angle=phi).add("X", 0)
    c.add("CNOT", 1, 0)
    c.add("RZ", 0, angle=eps * params.dt)
    if reset:
        c.add("RESET", 1)
    return c


def _flip_target(mask: int) -> int:
    """System qubit flipped by a single-bit mask (bit 2 -> qubit 0, bit 1 -> qubit 1)."""
    return {2: 0, 1: 1}[mask]


def _ccry(c: Circuit, c1: int, c2: int, t: int, angle: float) -> None:
    """Doubly controlled RY from three CRY and two CNOT gates."""
    c.add("CRY", c2, t, angle=angle / 2)
    c.add("CNOT", c1, c2)
    c.add("CRY", c2, t, angle=-angle / 2)
    c.add("CNOT", c1, c2)
    c.add("CRY", c1, t, angle=angle / 2)


def _x_for_zero_controls(c: Circuit, m: int, ancillas: tuple) -> None:
    if not (m >> 1) & 1:
        c.add("X", ancillas[0])
    if not m & 1:
        c.add("X", ancillas[1])


def build_hubbard_step(cycle: TransitionCycle) -> Circuit:
    """One step of the Hubbard cycle on 2 system qubits (0, 1) and 2 ancillas (2, 3).

    The system register is CNOT-copied to the ancillas, each cycle edge
    ``m -> next(m)`` is an ``RX(Theta_m)`` on the flipped qubit controlled on
    the ancillas reading ``m``, and a second copy leaves the flip pattern on
    the ancillas before they are reset.
    """
    c = Circuit(4, system=(0, 1), ancillas=(2, 3))
    anc = (2, 3)
    c.add("CNOT", 0, 2).add("CNOT", 1, 3)
    for m, nxt in cycle.edges():
        theta = float(cycle.angles[m])
        mask = m ^ nxt
        t = 0 if mask & 2 else 1
        other = 1 - t
        if mask == 3:
            c.add("CNOT", t, other)
        _x_for_zero_controls(c, m, anc)
        # RX = RZ(-pi/2) RY RZ(pi/2) on the target; the wrappers cancel off-branch
        c.add("RZ", t, angle=np.pi / 2)
        _ccry(c, anc[0], anc[1], t, theta)
        c.add("RZ", t, angle=-np.pi / 2)
        _x_for_zero_controls(c, m, anc)
        if mask == 3:
            c.add("CNOT", t, other)
    c.add("CNOT", 0, 2).add("CNOT", 1, 3)
    c.add("RESET", 2).add("RESET", 3)
    return c


# nearest-neighbour line used by the transpiled block
LINE = (2, 0, 1, 3)


def _routed_cnot(c: Circuit, ctrl: int, tgt: int, line=LINE) -> None:
    """CNOT between any two qubits of ``line`` using nearest-neighbour CNOTs only."""
    i, j = line.index(ctrl), line.index(tgt)
    if abs(i - j) == 1:
        c.add("CNOT", ctrl, tgt)
        return
    mid = line[min(i, j) + 1]
    _routed_cnot(c, mid, tgt, line)
    _routed_cnot(c, ctrl, mid, line)
    _routed_cnot(c, mid, tgt, line)
    _routed_cnot(c, ctrl, mid, line)


def is_gray_cycle(cycle: TransitionCycle) -> bool:
    return all((m ^ n) in (1, 2) for m, n in cycle.edges())


def half_angles(cycle: TransitionCycle) -> dict[str, float]:
    """Shorthand ``a, b, c, d``: half rotation angles out of up-down, 0, down and up."""
    half = cycle.angles / 2
    return {"a": float(half[3]), "b": float(half[0]), "c": float(half[2]), "d": float(half[1])}


def build_hubbard_step_transpiled(cycle: TransitionCycle) -> Circuit:
    """Nearest-neighbour version using only CNOT, X and RY.

    The qubits sit on the line 2 - 0 - 1 - 3.  Each doubly controlled
    rotation is lowered to four ``RY(+-Theta/4)`` gates interleaved with
    CNOTs from the two ancillas; CNOTs between non-adjacent qubits are
    bridged through the middle qubit.  The ``RZ(+-pi/2)`` wrappers of
    :func:`build_hubbard_step` are dropped, so the induced map equals
    :func:`dissim.hubbard.cycle_channel` up to an ``RZ(-pi/2)`` frame change
    on both system qubits (see :func:`transpiled_frame`).  Only cycles whose
    edges each flip one bit are supported.
    """
    if not is_gray_cycle(cycle):
        raise ValidationError("transpiled block supports only cycles flipping one spin per edge")
    c = Circuit(4, system=(0, 1), ancillas=(2, 3))
    anc = (2, 3)
    _routed_cnot(c, 0, 2)
    _routed_cnot(c, 1, 3)
    for m, nxt in cycle.edges():
        quarter = float(cycle.angles[m]) / 4
        t = _flip_target(m ^ nxt)
        _x_for_zero_controls(c, m, anc)
        c.add("RY", t, angle=quarter)
        _routed_cnot(c, anc[1], t)
        c.add("RY", t, angle=-quarter)
        _routed_cnot(c, anc[0], t)
        c.add("RY", t, angle=quarter)
        _routed_cnot(c, anc[1], t)
        c.add("RY", t, angle=-quarter)
        _routed_cnot(c, anc[0], t)
        _x_for_zero_controls(c, m, anc)
    _routed_cnot(c, 0, 2)
    _routed_cnot(c, 1, 3)
    c.add("RESET", 2).add("RESET", 3)
    return c


def transpiled_frame(channel: KrausChannel) -> KrausChannel:
    """Conjugate a two-qubit channel by ``RZ(-pi/2)`` on both qubits.

    Maps the channel of :func:`build_hubbard_step_transpiled` onto
    :func:`dissim.hubbard.cycle_channel`.
    """
    f = np.kron(rz(-np.pi / 2), rz(-np.pi / 2))
    return KrausChannel(tuple(f @ k @ f.conj().T for k in channel.operators))


def lower_cry(circuit: Circuit) -> Circuit:
    """Rewrite every CRY as ``RY(a/2), CNOT, RY(-a/2), CNOT``."""
    out = Circuit(circuit.width, system=circuit.system, ancillas=circuit.ancillas)
    for g in circuit.gates:
        if g.kind == "CRY":
            ctrl, tgt = g.qubits
            out.add("RY", tgt, angle=g.angle / 2).add("CNOT", ctrl, tgt)
            out.add("RY", tgt, angle=-g.angle / 2).add("CNOT", ctrl, tgt)
        else:
            out.gates.append(g)
    return out


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full-register unitary of a reset-free circuit."""
    if any(g.kind == "RESET" for g in circuit.gates):
        raise ValidationError("circuit contains a reset")
    mats = [_embed(g.matrix(), g.qubits, circuit.width) for g in circuit.gates]
    return reduce(lambda acc, u: u @ acc, mats, np.eye(2**circuit.width, dtype=complex))


def repeat(circuit_factory, n: int) -> Circuit:
    """Concatenate ``circuit_factory(s)`` for ``s = 0..n-1``."""
    out = None
    for s in range(n):
        block = circuit_factory(s)
        out = Circuit(block.width, list(block.gates), block.system, block.ancillas) if out is None else out.extend(block)
    return out

