"""Dense density-matrix arithmetic and Kraus-channel algebra.

Density matrices are plain complex ``numpy`` arrays.  Channels are
:class:`KrausChannel` instances holding an ordered tuple of Kraus operators.
Everything here is small and dense: the largest register in this package is
four qubits (dimension 16).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

COMPLETENESS_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_FLOOR = -1e-10


class ValidationError(ValueError):
    """Raised when a state, channel or parameter set fails its invariants."""


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------


def basis_state(index: int, dim: int) -> np.ndarray:
    """Projector ``|index><index|`` of dimension ``dim``."""
    rho = np.zeros((dim, dim), dtype=complex)
    rho[index, index] = 1.0
    return rho


def pure_state(psi: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def check_density(rho: np.ndarray, *, trace_tol: float = TRACE_TOL) -> np.ndarray:
    """Return ``rho`` as a complex array after checking the density-matrix invariants.

    Raises
    ------
    ValidationError
        If ``rho`` is not square, not Hermitian within 1e-12, does not have
        unit trace, or has an eigenvalue below -1e-10.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise ValidationError(f"density matrix not Hermitian (max deviation {herm:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < PSD_FLOOR:
        raise ValidationError(f"density matrix has eigenvalue {lo:.3e} below {PSD_FLOOR}")
    return rho


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the induced (Ginibre) measure."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KrausChannel:
    """An ordered set of Kraus operators ``K_i`` of shape ``(dim_out, dim_in)``.

    Construction only checks shapes; call :func:`validate_channel` (or
    :meth:`checked`) to enforce the completeness relation.
    """

    operators: tuple

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.operators)
        if not ops:
            raise ValidationError("a Kraus channel needs at least one operator")
        shape = ops[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ops):
            raise ValidationError("Kraus operators must be matrices of a common shape")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def dim_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.operators[0].shape[0]

    def __len__(self) -> int:
        return len(self.operators)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_channel(self, rho)

    def checked(self, tol: float = COMPLETENESS_TOL) -> "KrausChannel":
        residual = validate_channel(self)
        if residual > tol:
            raise ValidationError(f"Kraus completeness residual {residual:.3e} exceeds {tol:.0e}")
        return self


def validate_channel(channel: KrausChannel) -> float:
    """Completeness residual ``max |sum_i K_i^dag K_i - I|``."""
    if not channel.operators:
        raise ValidationError("empty operator list")
    total = sum(k.conj().T @ k for k in channel.operators)
    return float(np.max(np.abs(total - np.eye(channel.dim_in))))


def apply_channel(channel: KrausChannel, state: np.ndarray, *, check: bool = True) -> np.ndarray:
    """Return ``sum_i K_i rho K_i^dag``.

    With ``check=True`` (the default) the channel's completeness residual must
    be below 1e-12 and the dimensions must agree.
    """
    state = np.asarray(state, dtype=complex)
    if state.shape != (channel.dim_in, channel.dim_in):
        raise ValidationError(
            f"channel expects dimension {channel.dim_in}, state has shape {state.shape}"
        )
    if check:
        residual = validate_channel(channel)
        if residual > COMPLETENESS_TOL:
            raise ValidationError(f"Kraus completeness residual {residual:.3e} exceeds 1e-12")
    ops = np.stack(channel.operators)
    return np.einsum("kij,jl,kml->im", ops, state, ops.conj())


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel((np.eye(dim),))


def unitary_channel(u: np.ndarray) -> KrausChannel:
    return KrausChannel((u,))


def reset_channel() -> KrausChannel:
    """Ideal single-qubit reset ``{|0><0|, |0><1|}``."""
    return KrausChannel((np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])))


def compose(*channels: KrausChannel) -> KrausChannel:
    """Sequential composition; the first argument acts first."""

    def _two(first: KrausChannel, second: KrausChannel) -> KrausChannel:
        if second.dim_in != first.dim_out:
            raise ValidationError("cannot compose channels with mismatched dimensions")
        return KrausChannel(tuple(b @ a for a in first.operators for b in second.operators))

    return reduce(_two, channels)


def power(channel: KrausChannel, n: int) -> KrausChannel:
    if n < 1:
        return identity_channel(channel.dim_in)
    return compose(*([channel] * n))


def matrix_units(dim: int) -> list[np.ndarray]:
    """The ``dim**2`` matrix units ``|i><j|``, a basis of operator space."""
    units = []
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1.0
            units.append(e)
    return units


def superoperator(channel: KrausChannel) -> np.ndarray:
    """Row-major Liouville matrix: ``vec(E(rho)) = S @ vec(rho)``."""
    return sum(np.kron(k, k.conj()) for k in channel.operators)


def map_distance(a: KrausChannel, b: KrausChannel) -> float:
    """Largest entry-wise difference of the two maps over all matrix-unit inputs.

    Two Kraus sets related by a unitary mixing give distance zero, so this is
    the right way to compare channels, not operator-by-operator.
    """
    if a.dim_in != b.dim_in or a.dim_out != b.dim_out:
        raise ValidationError("channels act on different spaces")
    return float(np.max(np.abs(superoperator(a) - superoperator(b))))


def kraus_from_choi(choi: np.ndarray, dim_in: int, dim_out: int, cutoff: float = 1e-14) -> KrausChannel:
    """Minimal Kraus set from a Choi matrix ``J = sum_ij |i><j| (x) E(|i><j|)``."""
    w, v = np.linalg.eigh(choi)
    ops = []
    for lam, vec in zip(w, v.T):
        if lam > cutoff:
            # vec is indexed (i, out); K[out, i] = sqrt(lam) * vec[i, out]
            ops.append(np.sqrt(lam) * vec.reshape(dim_in, dim_out).T)
    if not ops:
        ops.append(np.zeros((dim_out, dim_in)))
    return KrausChannel(tuple(ops))


# --------------------------------------------------------------------------
# composite systems
# --------------------------------------------------------------------------


def tensor(*states: np.ndarray) -> np.ndarray:
    """Kronecker product; the first factor is the most significant."""
    return reduce(np.kron, (np.asarray(s, dtype=complex) for s in states))


def partial_trace(state: np.ndarray, keep: Iterable[int], dims: Sequence[int]) -> np.ndarray:
    """Reduced state on the factors listed in ``keep`` (kept in ascending order)."""
    dims = list(dims)
    state = np.asarray(state, dtype=complex)
    total = int(np.prod(dims))
    if state.shape != (total, total):
        raise ValidationError(f"factor dimensions {dims} do not match state shape {state.shape}")
    keep = sorted(set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValidationError(f"subsystem index out of range in {keep}")
    n = len(dims)
    t = state.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # contract each traced factor's row axis with its column axis
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = [letters[i] for i in range(n)]
    cols = [letters[n + i] for i in range(n)]
    for i in traced:
        cols[i] = rows[i]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return reduced.reshape(d, d)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``1/2 * sum |eig(a - b)|``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch {a.shape} vs {b.shape}")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


# --------------------------------------------------------------------------
# readout mitigation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """``matrix[m, m']`` is the probability of reading ``m`` when ``m'`` was prepared."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("confusion matrix must be square")
        if np.any(m < 0) or np.any(m > 1):
            raise ValidationError("confusion-matrix entries must lie in [0, 1]")
        cols = m.sum(axis=0)
        if np.max(np.abs(cols - 1.0)) > 1e-12:
            raise ValidationError(f"confusion matrix is not column-stochastic (column sums {cols})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_readout(cls, p0: float, p1: float, n_qubits: int = 1) -> "ConfusionMatrix":
        """Independent per-qubit readout with ``p(0|0) = p0`` and ``p(1|1) = p1``."""
        single = np.array([[p0, 1.0 - p1], [1.0 - p0, p1]])
        return cls(reduce(np.kron, [single] * n_qubits))

    def apply(self, probs: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(probs, dtype=float)


def mitigate_counts(raw: np.ndarray, cm: ConfusionMatrix) -> np.ndarray:
    """Invert the readout confusion, clip negative entries and renormalise."""
    raw = np.asarray(raw, dtype=float)
    if abs(raw.sum() - 1.0) > 1e-9:
        raise ValidationError(f"raw probabilities sum to {raw.sum()!r}, expected 1")
    if raw.shape != (cm.dim,):
        raise ValidationError(f"expected {cm.dim} probabilities, got shape {raw.shape}")
    if np.linalg.cond(cm.matrix) > 1e12:
        raise ValidationError("confusion matrix is singular")
    corrected = np.linalg.solve(cm.matrix, raw)
    corrected = np.clip(corrected, 0.0, None)
    return corrected / corrected.sum()
