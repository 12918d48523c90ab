"""Witnesses for the gap between state overlaps and measured dot products,
and the KL divergence between classical and quantum class distributions."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import qsim
from .encode import EncodingSpec
from .errors import ConfigurationError
from .observe import ObservableSpec, measure, quantum_map_batch

KL_EPS = 1e-12
NORM_FLOOR = 1e-12
DENSE_WITNESS_MAX_QUBITS = 6


@dataclass
class GapReport:
    state_overlap: complex
    q_dot: float
    abs_gap: float
    witness_trace: complex
    predicted_trace: complex

    @property
    def witness_residual(self) -> float:
        return abs(self.witness_trace - self.predicted_trace)

    def to_json(self) -> dict:
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, complex):
                out[key] = {"re": value.real, "im": value.imag}
            else:
                out[key] = value
        out["witness_residual"] = self.witness_residual
        return out


def witness_matrix(psi1: qsim.StateVector, psi2: qsim.StateVector, axis: str) -> np.ndarray:
    """A = sum_i O_i |psi1><psi2| O_i, so that q1.q2 = <psi1|A|psi2>."""
    n = psi1.n_qubits
    dim = 2**n
    A = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(n):
        left = qsim.apply_pauli(psi1.amplitudes, n, i, axis)
        # <psi2| O_i = (O_i |psi2>)^dagger since O_i is Hermitian
        right = qsim.apply_pauli(psi2.amplitudes, n, i, axis)
        A += np.outer(left, right.conj())
    return A


def gap_pair(psi1: qsim.StateVector, psi2: qsim.StateVector, obs: ObservableSpec) -> GapReport:
    if psi1.n_qubits != psi2.n_qubits:
        raise ValueError(f"size mismatch: {psi1.n_qubits} vs {psi2.n_qubits} qubits")
    if len(obs.passes) != 1:
        raise ConfigurationError("gap_pair needs a single-pass observable (q in R^n)")
    axis = obs.passes[0]
    n = psi1.n_qubits

    overlap = qsim.inner_product(psi1, psi2)
    q_dot = float(np.dot(measure(psi1, obs), measure(psi2, obs)))
    if n <= DENSE_WITNESS_MAX_QUBITS:
        trace = complex(np.trace(witness_matrix(psi1, psi2, axis)))
    else:
        # tr(O_i |psi1><psi2| O_i) = <psi2| O_i O_i |psi1>
        trace = 0j
        for i in range(n):
            twice = qsim.apply_pauli(qsim.apply_pauli(psi1.amplitudes, n, i, axis), n, i, axis)
            trace += complex(np.vdot(psi2.amplitudes, twice))
    predicted = n * complex(np.vdot(psi2.amplitudes, psi1.amplitudes))
    return GapReport(
        state_overlap=overlap,
        q_dot=q_dot,
        abs_gap=abs(abs(overlap) - q_dot),
        witness_trace=trace,
        predicted_trace=predicted,
    )


def kl_divergence(p, q) -> float:
    """sum_j p_j log(p_j / q_j) with 0 log 0 = 0 and q floored at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    for name, dist in (("p", p), ("q", q)):
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-8:
            raise ValueError(f"{name} is not a probability vector")
    mask = p > 0
    qf = np.maximum(q[mask], KL_EPS)
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(qf))))


# ---------------------------------------------------------------------------
# row-wise helpers shared with training

def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def normalize_rows(x: np.ndarray, floor: float = NORM_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Return (x / max(|x|, floor), the clamped norms)."""
    norms = np.maximum(np.linalg.norm(x, axis=-1, keepdims=True), floor)
    return x / norms, norms


def normalize_rows_backward(unit: np.ndarray, norms: np.ndarray, grad: np.ndarray, floor: float = NORM_FLOOR):
    radial = np.sum(unit * grad, axis=-1, keepdims=True)
    projected = np.where(norms > floor, grad - unit * radial, grad)
    return projected / norms


def kl_rows(logw: np.ndarray, logu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row KL(w || u) from log-probabilities; also returns the floor mask on u."""
    floored = logu < np.log(KL_EPS)
    logu_f = np.where(floored, np.log(KL_EPS), logu)
    w = np.exp(logw)
    return np.sum(w * (logw - logu_f), axis=-1), floored


def information_gap(
    W: np.ndarray,
    V: np.ndarray,
    enc: EncodingSpec,
    obs: ObservableSpec,
    normalize_quantum: bool = True,
    scale: float = 16.0,
) -> float:
    """Mean KL between softmax(s W^T v_i) and softmax(s S^T q_i), S_j = Q(W_j)."""
    W = np.asarray(W, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if W.ndim != 2 or V.ndim != 2 or W.shape[0] != V.shape[1]:
        raise ConfigurationError(f"dimension mismatch: W {W.shape}, V {V.shape}")
    for name, norms in (("W columns", np.linalg.norm(W, axis=0)), ("v rows", np.linalg.norm(V, axis=1))):
        if not np.allclose(norms, 1.0, atol=1e-8):
            raise ConfigurationError(f"{name} must be unit-norm")
    Q = quantum_map_batch(V, enc, obs)
    S = quantum_map_batch(W.T, enc, obs)
    if normalize_quantum:
        Q, _ = normalize_rows(Q)
        S, _ = normalize_rows(S)
    logw = log_softmax(scale * V @ W)
    logu = log_softmax(scale * Q @ S.T)
    per_row, _ = kl_rows(logw, logu)
    return float(per_row.mean())
