"""Training state, one optimization step and the epoch loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..encode import EncodingSpec
from ..errors import ConfigurationError, TrainingFault
from ..gap import normalize_rows
from ..observe import ObservableSpec
from .losses import LossReport, QipOptions, qip_objective
from .mlp import Mlp, mlp_backward, mlp_forward
from .optim import AdamWConfig, lr_schedule, optimizer_update, zero_moments


@dataclass
class TrainState:
    mlp: Mlp
    head: np.ndarray  # d x C, columns renormalized after every update
    enc: EncodingSpec
    obs: ObservableSpec
    lam: float = 0.5
    scale: float = 16.0
    normalize_quantum: bool = True
    detach_targets: bool = True
    base_lr: float = 1e-3
    total_steps: int = 0
    step: int = 0
    seed: int = 0
    adam: AdamWConfig = field(default_factory=AdamWConfig)
    moments: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.scale <= 0:
            raise ConfigurationError(f"logit scale must be > 0, got {self.scale}")
        if self.enc.dim != self.mlp.output_dim or self.head.shape[0] != self.mlp.output_dim:
            raise ConfigurationError(
                f"feature dim mismatch: mlp {self.mlp.output_dim}, encoder {self.enc.dim}, head {self.head.shape}"
            )
        if not self.moments:
            self.moments = zero_moments(self.params())

    @classmethod
    def create(
        cls,
        layer_dims,
        n_classes: int,
        enc: EncodingSpec,
        obs: ObservableSpec,
        seed: int,
        **kwargs,
    ) -> TrainState:
        rng = np.random.default_rng(seed)
        mlp = Mlp.init(layer_dims, rng)
        head = rng.standard_normal((layer_dims[-1], n_classes))
        head = head / np.linalg.norm(head, axis=0, keepdims=True)
        if enc.trainable:
            enc = EncodingSpec.u3(enc.dim, enc.n_qubits, rng=rng)
        return cls(mlp=mlp, head=head, enc=enc, obs=obs, seed=seed, **kwargs)

    @property
    def n_classes(self) -> int:
        return self.head.shape[1]

    @property
    def options(self) -> QipOptions:
        return QipOptions(self.lam, self.scale, self.normalize_quantum, self.detach_targets)

    def params(self) -> dict[str, np.ndarray]:
        out = dict(self.mlp.param_items())
        out["head.W"] = self.head
        if self.enc.trainable:
            out["enc.pqc"] = self.enc.pqc_params
        return out

    def with_params(self, params: dict[str, np.ndarray], **changes) -> TrainState:
        n_layers = len(self.mlp.weights)
        mlp = Mlp(
            list(self.mlp.layer_dims),
            [params[f"mlp.w{i}"] for i in range(n_layers)],
            [params[f"mlp.b{i}"] for i in range(n_layers)],
        )
        enc = self.enc.with_params(params["enc.pqc"]) if self.enc.trainable else self.enc
        return replace(self, mlp=mlp, head=params["head.W"], enc=enc, **changes)

    def features(self, X: np.ndarray) -> np.ndarray:
        return mlp_forward(self.mlp, X, self.step)[0]


def loss_and_grads(state: TrainState, X: np.ndarray, labels: np.ndarray, need_grad: bool = True):
    """Loss report and a gradient dict keyed like :meth:`TrainState.params`."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("empty batch")
    if np.any(labels < 0) or np.any(labels >= state.n_classes):
        raise ValueError(f"labels must lie in [0, {state.n_classes})")
    V, cache = mlp_forward(state.mlp, X, state.step)
    report, grads = qip_objective(V, state.head, labels, state.enc, state.obs, state.options, need_grad)
    if not need_grad:
        return report, None
    g_V, g_W, g_pqc = grads
    out = mlp_backward(state.mlp, cache, g_V)
    out["head.W"] = g_W
    if state.enc.trainable:
        out["enc.pqc"] = g_pqc
    return report, out


def qip_step(state: TrainState, X: np.ndarray, labels: np.ndarray) -> tuple[TrainState, LossReport]:
    report, grads = loss_and_grads(state, X, labels)
    for name, value in (("L", report.L), ("K", report.K), ("L_QIP", report.L_QIP)):
        if not math.isfinite(value):
            raise TrainingFault(f"non-finite loss {name}", step=state.step)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingFault("non-finite gradient", step=state.step, parameter=name)

    lr = lr_schedule(state.step, state.total_steps, state.base_lr)
    params, moments = optimizer_update(state.params(), grads, state.moments, state.step, lr, state.adam)
    params["head.W"] = normalize_rows(params["head.W"].T)[0].T
    new_state = state.with_params(params, moments=moments, step=state.step + 1)
    return new_state, report


def n_batches(n_samples: int, batch_size: int) -> int:
    return math.ceil(n_samples / batch_size)


def fit(state: TrainState, X: np.ndarray, y: np.ndarray, epochs: int, batch_size: int):
    """Run ``epochs`` passes of seeded-shuffled mini-batches.

    Returns the final state and a history list of dicts with keys
    step, lr, L, K, L_QIP (one per optimizer step).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(X) == 0:
        raise ValueError("dataset is empty")
    if batch_size < 1:
        raise ConfigurationError("batch size must be positive")
    per_epoch = n_batches(len(X), batch_size)
    if state.total_steps == 0:
        state = replace(state, total_steps=state.step + epochs * per_epoch)
    if state.step + epochs * per_epoch > state.total_steps:
        raise ConfigurationError("requested epochs exceed the schedule's total steps")

    history = []
    for _ in range(epochs):
        epoch = state.step // per_epoch
        order = np.random.default_rng([state.seed, epoch]).permutation(len(X))
        for b in range(per_epoch):
            idx = order[b * batch_size : (b + 1) * batch_size]
            lr = lr_schedule(state.step, state.total_steps, state.base_lr)
            step = state.step
            state, report = qip_step(state, X[idx], y[idx])
            history.append({"step": step, "lr": lr, "L": report.L, "K": report.K, "L_QIP": report.L_QIP})
    return state, history


def accuracy(state: TrainState, X: np.ndarray, y: np.ndarray) -> float:
    V = state.features(X)
    Wn = normalize_rows(state.head.T)[0].T
    return float(np.mean(np.argmax(V @ Wn, axis=1) == np.asarray(y)))
