"""Per-qubit Pauli measurement and the full feature map v -> q."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim
from .encode import EncodingSpec, encode_backward, encode_states
from .errors import ConfigurationError


@dataclass(frozen=True)
class ObservableSpec:
    """Measurement passes; pass ``p`` measures ``passes[p]`` on every qubit.

    Output layout is pass-major: all qubits of pass 0, then pass 1, ...
    """

    passes: tuple[str, ...]

    def __post_init__(self):
        if not self.passes:
            raise ConfigurationError("observable needs at least one pass")
        for axis in self.passes:
            qsim.check_axis(axis)

    @classmethod
    def parse(cls, text: str) -> ObservableSpec:
        """``"Z"``, ``"X"``, ``"Y"``, ``"XZ"`` (one pass per character)."""
        text = text.strip().upper()
        if not text:
            raise ConfigurationError("empty observable string")
        return cls(tuple(text))

    def __str__(self) -> str:
        return "".join(self.passes)

    def size(self, n_qubits: int) -> int:
        return len(self.passes) * n_qubits


def measure_amps(amps: np.ndarray, n: int, obs: ObservableSpec) -> np.ndarray:
    """Batched measurement; returns (batch, len(passes) * n)."""
    return np.concatenate([qsim.expectations(amps, n, axis) for axis in obs.passes], axis=1)


def measure(state: qsim.StateVector, obs: ObservableSpec) -> np.ndarray:
    return measure_amps(state.amplitudes, state.n_qubits, obs)[0]


def quantum_map_batch(V: np.ndarray, enc: EncodingSpec, obs: ObservableSpec) -> np.ndarray:
    return measure_amps(encode_states(V, enc), enc.n_qubits, obs)


def quantum_map(v, enc: EncodingSpec, obs: ObservableSpec) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(1, -1)
    return quantum_map_batch(v, enc, obs)[0]


def _weighted_observable(psi: np.ndarray, n: int, obs: ObservableSpec, weights: np.ndarray) -> np.ndarray:
    """(sum_k weights[:, k] O_k) |psi> for every row."""
    out = np.zeros_like(psi)
    for p, axis in enumerate(obs.passes):
        for q in range(n):
            w = weights[:, p * n + q]
            if not np.any(w):
                continue
            out += w[:, None] * qsim.apply_pauli(psi, n, q, axis)
    return out


def quantum_map_vjp(
    V: np.ndarray, enc: EncodingSpec, obs: ObservableSpec, grad_q: np.ndarray
) -> tuple[np.ndarray, np.ndarray | None]:
    """Vector-Jacobian product of the batched map by reverse accumulation.

    ``grad_q`` has shape (N, m). Returns ``(grad_V, grad_pqc)``; the pqc
    gradient is summed over rows and is ``None`` for untrainable encoders.
    """
    V = np.asarray(V, dtype=np.float64)
    grad_q = np.asarray(grad_q, dtype=np.float64)
    n = enc.n_qubits
    psi = encode_states(V, enc)
    # L = sum_k g_k <psi|O_k|psi>  =>  dL = 2 Re <H psi | d psi>,  H = sum_k g_k O_k
    lam = _weighted_observable(psi, n, obs, grad_q)
    return encode_backward(V, enc, psi, lam)


def quantum_map_jacobian(v, enc: EncodingSpec, obs: ObservableSpec) -> tuple[np.ndarray, np.ndarray | None]:
    """Dense Jacobian ``dq/dv`` (m x d) and ``dq/dpqc`` (m x layers x n x 3, u3 only)."""
    v = np.asarray(v, dtype=np.float64).reshape(1, -1)
    m = obs.size(enc.n_qubits)
    # one reverse pass per output, batched as m copies of the same row
    rows = np.repeat(v, m, axis=0)
    seeds = np.eye(m)
    n = enc.n_qubits
    psi = encode_states(rows, enc)
    lam = _weighted_observable(psi, n, obs, seeds)
    if enc.trainable:
        jac_p = np.empty((m,) + enc.pqc_params.shape)
        jac_v = np.empty((m, enc.dim))
        for k in range(m):
            gv, gp = encode_backward(rows[k : k + 1], enc, psi[k : k + 1], lam[k : k + 1])
            jac_v[k] = gv[0]
            jac_p[k] = gp
        return jac_v, jac_p
    jac_v, _ = encode_backward(rows, enc, psi, lam)
    return jac_v, None
