"""Dense statevector simulator.

Basis index ``i`` of an n-qubit register is read big-endian: qubit 0 is the
most significant bit. Every kernel below works on amplitude arrays of shape
``(2**n,)`` or ``(batch, 2**n)`` and never builds the full ``2**n x 2**n``
operator; a single-qubit gate costs O(2**n) per state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 14
AXES = ("X", "Y", "Z")

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
_IDENTITY = np.eye(2, dtype=np.complex128)


def check_axis(axis: str) -> str:
    if axis not in _PAULI:
        raise ConfigurationError(f"unknown Pauli axis {axis!r}, expected one of X, Y, Z")
    return axis


def check_n_qubits(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n!r}")
    return int(n)


@dataclass
class StateVector:
    """Pure n-qubit state. ``amplitudes[i]`` is the coefficient of ``|i>``."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.n_qubits = check_n_qubits(self.n_qubits)
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise ConfigurationError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got shape {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if not abs(norm - 1.0) < NORM_TOL:
            raise ConfigurationError(f"state is not normalized (norm {norm!r})")
        self.amplitudes = amps

    def copy(self) -> StateVector:
        return StateVector(self.n_qubits, self.amplitudes.copy())

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def zero_state(n: int) -> StateVector:
    n = check_n_qubits(n)
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


def pauli_matrix(axis: str) -> np.ndarray:
    return _PAULI[check_axis(axis)].copy()


def rotation_gate(axis: str, theta: float) -> np.ndarray:
    """``exp(-i theta P / 2) = cos(theta/2) I - i sin(theta/2) P``."""
    check_axis(axis)
    if not math.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta!r}")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return c * _IDENTITY - 1j * s * _PAULI[axis]


def is_unitary(gate: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    gate = np.asarray(gate)
    if gate.shape != (2, 2):
        return False
    return bool(np.all(np.abs(gate @ gate.conj().T - _IDENTITY) < tol))


# ---------------------------------------------------------------------------
# batched kernels

def _split(amps: np.ndarray, n: int, qubit: int) -> np.ndarray:
    """View amplitudes as (batch, high, 2, low) around ``qubit``."""
    return amps.reshape(-1, 2**qubit, 2, 2 ** (n - qubit - 1))


def apply_1q(amps: np.ndarray, n: int, qubit: int, gate: np.ndarray) -> np.ndarray:
    """Apply a 2x2 gate, or one gate per batch row with shape (batch, 2, 2).

    Returns a new array with the same shape as ``amps``.
    """
    view = _split(amps, n, qubit)
    x0 = view[:, :, 0, :]
    x1 = view[:, :, 1, :]
    gate = np.asarray(gate)
    if gate.ndim == 2:
        g00, g01, g10, g11 = gate[0, 0], gate[0, 1], gate[1, 0], gate[1, 1]
    else:
        g00, g01, g10, g11 = (gate[:, i, j, None, None] for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    out = np.empty_like(view)
    out[:, :, 0, :] = g00 * x0 + g01 * x1
    out[:, :, 1, :] = g10 * x0 + g11 * x1
    return out.reshape(amps.shape)


def apply_pauli(amps: np.ndarray, n: int, qubit: int, axis: str) -> np.ndarray:
    view = _split(amps, n, qubit)
    out = np.empty_like(view)
    if axis == "X":
        out[:, :, 0, :] = view[:, :, 1, :]
        out[:, :, 1, :] = view[:, :, 0, :]
    elif axis == "Y":
        out[:, :, 0, :] = -1j * view[:, :, 1, :]
        out[:, :, 1, :] = 1j * view[:, :, 0, :]
    elif axis == "Z":
        out[:, :, 0, :] = view[:, :, 0, :]
        out[:, :, 1, :] = -view[:, :, 1, :]
    else:
        check_axis(axis)
    return out.reshape(amps.shape)


def rotation_batch(axis: str, thetas: np.ndarray) -> np.ndarray:
    """Stack of rotation matrices, shape (len(thetas), 2, 2)."""
    thetas = np.asarray(thetas, dtype=np.float64)
    c = np.cos(thetas / 2)
    s = np.sin(thetas / 2)
    out = np.zeros(thetas.shape + (2, 2), dtype=np.complex128)
    if axis == "X":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif axis == "Y":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    elif axis == "Z":
        out[..., 0, 0] = c - 1j * s
        out[..., 1, 1] = c + 1j * s
    else:
        check_axis(axis)
    return out


def apply_cnot_amps(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    psi = amps.reshape((-1,) + (2,) * n).copy()
    sel = [slice(None)] * (n + 1)
    sel[1 + control] = 1
    sel = tuple(sel)
    # target axis index inside the control=1 slice
    tpos = 1 + target - (1 if target > control else 0)
    psi[sel] = np.flip(psi[sel], axis=tpos)
    return psi.reshape(amps.shape)


def expectations(amps: np.ndarray, n: int, axis: str) -> np.ndarray:
    """Per-qubit <P_i> for every row; shape (batch, n), clamped into [-1, 1]."""
    amps = amps.reshape(-1, 2**n)
    out = np.empty((amps.shape[0], n), dtype=np.float64)
    for q in range(n):
        view = _split(amps, n, q)
        a0 = view[:, :, 0, :]
        a1 = view[:, :, 1, :]
        if axis == "Z":
            p = a0.real**2 + a0.imag**2 - a1.real**2 - a1.imag**2
            val = p.sum(axis=(1, 2))
        else:
            z = (a0.conj() * a1).sum(axis=(1, 2))
            val = 2.0 * (z.real if axis == "X" else z.imag)
        out[:, q] = val
    return np.clip(out, -1.0, 1.0)


# ---------------------------------------------------------------------------
# single-state API

def _check_qubit(state: StateVector, qubit: int) -> int:
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits}-qubit state")
    return qubit


def apply_gate(state: StateVector, qubit: int, gate: np.ndarray) -> StateVector:
    _check_qubit(state, qubit)
    gate = np.asarray(gate, dtype=np.complex128)
    if not is_unitary(gate):
        raise ValueError("gate is not a 2x2 unitary")
    amps = apply_1q(state.amplitudes, state.n_qubits, qubit, gate)
    return StateVector(state.n_qubits, amps)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    if control == target:
        raise ValueError("CNOT control and target must differ")
    _check_qubit(state, control)
    _check_qubit(state, target)
    amps = apply_cnot_amps(state.amplitudes, state.n_qubits, control, target)
    return StateVector(state.n_qubits, amps)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugating the left argument."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"size mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def expectation(state: StateVector, qubit: int, axis: str) -> float:
    """<psi|O_i|psi> with O_i = P on ``qubit`` and identity elsewhere."""
    _check_qubit(state, qubit)
    check_axis(axis)
    return float(expectations(state.amplitudes, state.n_qubits, axis)[0, qubit])
