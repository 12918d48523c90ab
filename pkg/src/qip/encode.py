"""Classical vector -> quantum state encoders.

Three encoders are provided:

``amplitude``
    L2-normalize ``v``, zero-pad to ``2**n`` and use it as the amplitude vector.
``phase``
    Start from ``|0...0>``; layer ``l`` applies ``RY(v[l*n + j])`` on qubit ``j``
    (missing tail features count as angle 0) and a CNOT ring
    ``j -> (j+1) mod n`` separates consecutive layers.
``u3``
    The phase circuit with a trainable block ``RZ(tz) RY(ty) RX(tx)`` on every
    qubit after each data layer (after that layer's ring, when it has one).

The same gate list drives the forward simulation and the reverse
(adjoint) pass used for gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .errors import ConfigurationError, EncodingError

KINDS = ("amplitude", "phase", "u3")
PQC_INIT_SCALE = math.pi / 8


def amplitude_qubits(dim: int) -> int:
    return max(1, math.ceil(math.log2(dim)))


@dataclass
class EncodingSpec:
    kind: str
    n_qubits: int
    dim: int
    layers: int = 1
    pqc_params: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown encoder {self.kind!r}, expected one of {KINDS}")
        if self.dim < 1:
            raise ConfigurationError(f"feature dimension must be positive, got {self.dim}")
        qsim.check_n_qubits(self.n_qubits)
        if self.kind == "amplitude":
            if self.n_qubits != amplitude_qubits(self.dim):
                raise ConfigurationError(
                    f"amplitude encoding of d={self.dim} needs {amplitude_qubits(self.dim)} qubits, got {self.n_qubits}"
                )
            self.layers = 1
        else:
            expected = math.ceil(self.dim / self.n_qubits)
            if self.layers != expected:
                raise ConfigurationError(
                    f"{self.kind} encoding of d={self.dim} on {self.n_qubits} qubits needs {expected} layers, got {self.layers}"
                )
        if self.kind == "u3":
            shape = (self.layers, self.n_qubits, 3)
            if self.pqc_params is None:
                self.pqc_params = np.zeros(shape)
            self.pqc_params = np.asarray(self.pqc_params, dtype=np.float64)
            if self.pqc_params.shape != shape:
                raise ConfigurationError(f"pqc_params must have shape {shape}, got {self.pqc_params.shape}")
        elif self.pqc_params is not None:
            raise ConfigurationError(f"{self.kind} encoding has no trainable parameters")

    @classmethod
    def amplitude(cls, dim: int) -> EncodingSpec:
        return cls("amplitude", amplitude_qubits(dim), dim)

    @classmethod
    def phase(cls, dim: int, n_qubits: int) -> EncodingSpec:
        return cls("phase", n_qubits, dim, layers=math.ceil(dim / n_qubits))

    @classmethod
    def u3(cls, dim: int, n_qubits: int, pqc_params=None, rng: np.random.Generator | None = None) -> EncodingSpec:
        layers = math.ceil(dim / n_qubits)
        if pqc_params is None and rng is not None:
            pqc_params = rng.uniform(-PQC_INIT_SCALE, PQC_INIT_SCALE, size=(layers, n_qubits, 3))
        return cls("u3", n_qubits, dim, layers=layers, pqc_params=pqc_params)

    @property
    def trainable(self) -> bool:
        return self.kind == "u3"

    def with_params(self, pqc_params: np.ndarray) -> EncodingSpec:
        return EncodingSpec(self.kind, self.n_qubits, self.dim, self.layers, pqc_params)


def gate_list(spec: EncodingSpec) -> list[tuple]:
    """Ops for the phase/u3 circuits.

    ``("data", qubit, feature_index)`` is an RY by a feature value,
    ``("param", axis, qubit, (layer, qubit, slot))`` a trainable rotation,
    ``("cnot", control, target)`` an entangler.
    """
    n = spec.n_qubits
    ops: list[tuple] = []
    for layer in range(spec.layers):
        for j in range(n):
            idx = layer * n + j
            if idx < spec.dim:
                ops.append(("data", j, idx))
            # padded features are RY(0) = I and are left out
        if layer < spec.layers - 1 and n > 1:
            for j in range(n):
                ops.append(("cnot", j, (j + 1) % n))
        if spec.kind == "u3":
            for j in range(n):
                for slot, axis in enumerate("XYZ"):
                    ops.append(("param", axis, j, (layer, j, slot)))
    return ops


def _check_rows(V: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != spec.dim:
        raise ConfigurationError(f"expected rows of dimension {spec.dim}, got array of shape {V.shape}")
    if not np.all(np.isfinite(V)):
        raise EncodingError("feature values must be finite")
    return V


def encode_states(V: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    """Encode every row of ``V``; returns amplitudes of shape (N, 2**n)."""
    V = _check_rows(V, spec)
    n = spec.n_qubits
    if spec.kind == "amplitude":
        norms = np.linalg.norm(V, axis=1)
        if np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            raise EncodingError(f"amplitude encoding of a zero vector (row {bad})")
        amps = np.zeros((V.shape[0], 2**n), dtype=np.complex128)
        amps[:, : spec.dim] = V / norms[:, None]
        return amps

    amps = np.zeros((V.shape[0], 2**n), dtype=np.complex128)
    amps[:, 0] = 1.0
    for op in gate_list(spec):
        if op[0] == "data":
            _, q, idx = op
            amps = qsim.apply_1q(amps, n, q, qsim.rotation_batch("Y", V[:, idx]))
        elif op[0] == "cnot":
            amps = qsim.apply_cnot_amps(amps, n, op[1], op[2])
        else:
            _, axis, q, where = op
            amps = qsim.apply_1q(amps, n, q, qsim.rotation_gate(axis, spec.pqc_params[where]))
    return amps


def encode_backward(
    V: np.ndarray, spec: EncodingSpec, psi: np.ndarray, lam: np.ndarray
) -> tuple[np.ndarray, np.ndarray | None]:
    """Pull an adjoint state back through the encoder.

    ``psi`` is the encoded state and ``lam`` the adjoint, i.e. the loss
    differential is ``2 Re <lam|d psi>``. Returns the gradient with respect
    to the rows of ``V`` and, for u3, the summed gradient of ``pqc_params``.
    """
    V = np.asarray(V, dtype=np.float64)
    n = spec.n_qubits
    if spec.kind == "amplitude":
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        unit = V / norms
        g = 2.0 * lam.real[:, : spec.dim]
        radial = np.sum(unit * g, axis=1, keepdims=True)
        return (g - unit * radial) / norms, None

    grad_v = np.zeros_like(V)
    grad_p = np.zeros_like(spec.pqc_params) if spec.trainable else None
    psi = psi.copy()
    lam = lam.copy()
    for op in reversed(gate_list(spec)):
        if op[0] == "cnot":
            psi = qsim.apply_cnot_amps(psi, n, op[1], op[2])
            lam = qsim.apply_cnot_amps(lam, n, op[1], op[2])
            continue
        if op[0] == "data":
            _, q, idx = op
            axis, theta = "Y", V[:, idx]
            undo = qsim.rotation_batch("Y", -theta)
        else:
            _, axis, q, where = op
            theta = spec.pqc_params[where]
            undo = qsim.rotation_gate(axis, -theta)
        # d psi_after / d theta = (-i/2) P psi_after  =>  dL/dtheta = Im <lam|P psi_after>
        p_psi = qsim.apply_pauli(psi, n, q, axis)
        g = np.einsum("bi,bi->b", lam.conj(), p_psi).imag
        if op[0] == "data":
            grad_v[:, idx] += g
        else:
            grad_p[where] += g.sum()
        psi = qsim.apply_1q(psi, n, q, undo)
        lam = qsim.apply_1q(lam, n, q, undo)
    return grad_v, grad_p


def encode(v, spec: EncodingSpec) -> qsim.StateVector:
    """Encode one feature vector. The caller's array is not modified."""
    v = np.asarray(v, dtype=np.float64).reshape(1, -1)
    amps = encode_states(v, spec)[0]
    return qsim.StateVector(spec.n_qubits, amps)


def encode_batch(rows, spec: EncodingSpec) -> list[qsim.StateVector]:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.size == 0:
        return []
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(encode(row, spec))
        except (EncodingError, ConfigurationError) as exc:
            raise type(exc)(f"row {i}: {exc}") from exc
    return out
