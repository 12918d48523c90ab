"""One-block attention refiner whose query/key/value maps are PQCs.

For a proposal with center c and members j = 0..k-1 (member 0 is c):

    x_j = [f_j, f_j * f_c]              (features row-normalized first)
    t_j = x_j P + b_P                   token projection, width h
    Q_j, K_j, V_j = quantum_map(t_j)    one U3 circuit per role
    Z = softmax(Q K^T / sqrt(r)) V      r = measured width
    H_j = t_j + Z_j O + b_O
    p_j = sigmoid(H_j w + b)            keep probability

The elementwise product with the center is what lets a per-token head
judge membership; without it the block could only see the set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..encode import EncodingSpec
from ..errors import ConfigurationError, TrainingFault
from ..gap import normalize_rows
from ..observe import ObservableSpec, quantum_map_batch, quantum_map_vjp
from ..train.optim import AdamWConfig, lr_schedule, optimizer_update, zero_moments
from .knn import ClusterProposal

ROLES = ("query", "key", "value")


@dataclass
class RefinerModel:
    feature_dim: int
    hidden: int
    n_qubits: int
    obs: ObservableSpec
    params: dict[str, np.ndarray]
    moments: dict = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        for name, p in self.params.items():
            if not np.all(np.isfinite(p)):
                raise ConfigurationError(f"refiner parameter {name} is not finite")
        if not self.moments:
            self.moments = zero_moments(self.params)

    @classmethod
    def create(cls, feature_dim: int, hidden: int = 8, n_qubits: int = 3, obs: ObservableSpec | None = None, seed: int = 0):
        obs = obs or ObservableSpec.parse("Z")
        rng = np.random.default_rng(seed)
        r = obs.size(n_qubits)
        in_dim = 2 * feature_dim
        params = {
            "proj.w": rng.standard_normal((in_dim, hidden)) / math.sqrt(in_dim),
            "proj.b": np.zeros(hidden),
        }
        for role in ROLES:
            params[f"{role}.pqc"] = EncodingSpec.u3(hidden, n_qubits, rng=rng).pqc_params
        params["out.w"] = rng.standard_normal((r, hidden)) / math.sqrt(r)
        params["out.b"] = np.zeros(hidden)
        params["head.w"] = rng.standard_normal(hidden) / math.sqrt(hidden)
        params["head.b"] = np.zeros(1)
        return cls(feature_dim, hidden, n_qubits, obs, params)

    def encoder(self, role: str) -> EncodingSpec:
        return EncodingSpec.u3(self.hidden, self.n_qubits, pqc_params=self.params[f"{role}.pqc"])


def token_inputs(member_features: np.ndarray) -> np.ndarray:
    """(P, k, m) member features -> (P, k, 2m) center-relative token inputs."""
    f = np.asarray(member_features, dtype=np.float64)
    unit = normalize_rows(f.reshape(-1, f.shape[-1]))[0].reshape(f.shape)
    return np.concatenate([unit, unit * unit[:, :1, :]], axis=-1)


def _stack(proposals: list[ClusterProposal], feature_dim: int) -> np.ndarray:
    sizes = {len(p.member_indices) for p in proposals}
    if len(sizes) != 1:
        raise ConfigurationError("all proposals in a batch must have the same size")
    F = np.stack([np.asarray(p.member_features, dtype=np.float64) for p in proposals])
    if F.shape[-1] != feature_dim:
        raise ConfigurationError(f"refiner expects {feature_dim}-dim features, got {F.shape[-1]}")
    return F


def _forward(model: RefinerModel, X: np.ndarray):
    P, k, _ = X.shape
    p = model.params
    T = X @ p["proj.w"] + p["proj.b"]
    flat = T.reshape(P * k, model.hidden)
    qkv = [quantum_map_batch(flat, model.encoder(role), model.obs).reshape(P, k, -1) for role in ROLES]
    Qm, Km, Vm = qkv
    r = Qm.shape[-1]
    S = np.einsum("pir,pjr->pij", Qm, Km) / math.sqrt(r)
    S = S - S.max(axis=-1, keepdims=True)
    A = np.exp(S)
    A /= A.sum(axis=-1, keepdims=True)
    Z = np.einsum("pij,pjr->pir", A, Vm)
    H = T + Z @ p["out.w"] + p["out.b"]
    logits = H @ p["head.w"] + p["head.b"][0]
    probs = 1.0 / (1.0 + np.exp(-logits))
    cache = (X, T, flat, Qm, Km, Vm, A, Z, H)
    return logits, probs, cache


def refine_batch(model: RefinerModel, proposals: list[ClusterProposal]) -> np.ndarray:
    """Keep probabilities, shape (P, k), for equally sized proposals."""
    if not proposals:
        return np.zeros((0, 0))
    X = token_inputs(_stack(proposals, model.feature_dim))
    return _forward(model, X)[1]


def refine(proposal: ClusterProposal, model: RefinerModel) -> np.ndarray:
    return refine_batch(model, [proposal])[0]


def _bce(logits: np.ndarray, targets: np.ndarray) -> float:
    # log(1 + e^z) - t z, computed stably
    return float(np.mean(np.logaddexp(0.0, logits) - targets * logits))


def loss_and_grads(model: RefinerModel, X: np.ndarray, targets: np.ndarray):
    """Mean binary cross-entropy over all member tokens and its gradient."""
    logits, probs, cache = _forward(model, X)
    loss = _bce(logits, targets)
    X, T, flat, Qm, Km, Vm, A, Z, H = cache
    p = model.params
    P, k, _ = X.shape
    r = Qm.shape[-1]

    g_logit = (probs - targets) / targets.size
    grads = {
        "head.w": np.einsum("pk,pkh->h", g_logit, H),
        "head.b": np.array([g_logit.sum()]),
    }
    g_H = g_logit[..., None] * p["head.w"]
    grads["out.w"] = np.einsum("pkr,pkh->rh", Z, g_H)
    grads["out.b"] = g_H.sum(axis=(0, 1))
    g_T = g_H.copy()
    g_Z = g_H @ p["out.w"].T
    g_A = np.einsum("pir,pjr->pij", g_Z, Vm)
    g_V = np.einsum("pij,pir->pjr", A, g_Z)
    g_S = A * (g_A - np.sum(g_A * A, axis=-1, keepdims=True)) / math.sqrt(r)
    g_Q = np.einsum("pij,pjr->pir", g_S, Km)
    g_K = np.einsum("pij,pir->pjr", g_S, Qm)
    for role, g in zip(ROLES, (g_Q, g_K, g_V)):
        g_flat, g_pqc = quantum_map_vjp(flat, model.encoder(role), model.obs, g.reshape(P * k, r))
        g_T += g_flat.reshape(P, k, -1)
        grads[f"{role}.pqc"] = g_pqc
    grads["proj.w"] = np.einsum("pki,pkh->ih", X, g_T)
    grads["proj.b"] = g_T.sum(axis=(0, 1))
    return loss, grads


def membership_targets(proposals: list[ClusterProposal], labels) -> np.ndarray:
    labels = np.asarray(labels)
    return np.stack([(labels[p.member_indices] == labels[p.center_index]).astype(np.float64) for p in proposals])


def train_refiner(
    model: RefinerModel,
    proposals: list[ClusterProposal],
    labels,
    epochs: int,
    batch_size: int = 64,
    base_lr: float = 1e-2,
    seed: int = 0,
    adam: AdamWConfig = AdamWConfig(),
):
    """Mini-batch AdamW with a cosine schedule. Returns (model, per-step losses)."""
    if epochs == 0 or not proposals:
        return model, []
    X_all = token_inputs(_stack(proposals, model.feature_dim))
    Y_all = membership_targets(proposals, labels)
    per_epoch = math.ceil(len(proposals) / batch_size)
    total = epochs * per_epoch
    params, moments, step = model.params, model.moments, 0
    losses = []
    for epoch in range(epochs):
        order = np.random.default_rng([seed, epoch]).permutation(len(proposals))
        for b in range(per_epoch):
            idx = order[b * batch_size : (b + 1) * batch_size]
            current = replace(model, params=params, moments=moments)
            loss, grads = loss_and_grads(current, X_all[idx], Y_all[idx])
            if not math.isfinite(loss):
                raise TrainingFault("non-finite refiner loss", step=step)
            for name, g in grads.items():
                if not np.all(np.isfinite(g)):
                    raise TrainingFault("non-finite refiner gradient", step=step, parameter=name)
            lr = lr_schedule(step, total, base_lr)
            params, moments = optimizer_update(params, grads, moments, step, lr, adam)
            losses.append(loss)
            step += 1
    return replace(model, params=params, moments=moments, step=model.step + step), losses
