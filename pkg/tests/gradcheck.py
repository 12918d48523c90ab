"""Finite-difference checks of the training gradients on tiny instances."""
from __future__ import annotations

import numpy as np

from qip.encode import EncodingSpec
from qip.observe import ObservableSpec
from qip.train import TrainState, loss_and_grads

import oracles

ENCODERS = ("amplitude", "phase", "u3")
OBSERVABLES = ("Z", "X", "Y", "XZ")


def tiny_state(kind: str, obs: str, seed: int, lam: float = 0.5, detach: bool = False,
               dims=(4, 4), n_classes: int = 2, normalize_quantum: bool = True) -> TrainState:
    d = dims[-1]
    if kind == "amplitude":
        enc = EncodingSpec.amplitude(d)
    elif kind == "phase":
        enc = EncodingSpec.phase(d, 2)
    else:
        enc = EncodingSpec.u3(d, 2)
    state = TrainState.create(list(dims), n_classes, enc, ObservableSpec.parse(obs), seed, lam=lam,
                              detach_targets=detach, normalize_quantum=normalize_quantum)
    if state.enc.trainable:
        # larger angles than the default init, so the check sees curvature
        rng = np.random.default_rng([seed, 99])
        state = state.with_params({**state.params(), "enc.pqc": rng.uniform(-1.5, 1.5, state.enc.pqc_params.shape)})
    return state


def tiny_batch(seed: int, d_in: int = 4, n: int = 2, n_classes: int = 2):
    rng = np.random.default_rng([seed, 7])
    X = rng.standard_normal((n, d_in))
    y = np.arange(n) % n_classes
    return X, y


def max_relative_error(state: TrainState, X, y, surrogate: bool = False) -> float:
    """Largest rel_err over every parameter between analytic and central-difference gradients.

    With ``surrogate`` the reference objective holds the classical class
    distribution fixed inside the KL term, which is what the detached
    gradient differentiates.
    """
    _, grads = loss_and_grads(state, X, y)
    params = state.params()
    frozen = None
    if surrogate:
        frozen = oracles.qip_loss(params, X, y, state.enc.kind, state.enc.n_qubits, str(state.obs), 0.0,
                                  state.scale, state.normalize_quantum)[2]

    def objective(name, value):
        trial = {**params, name: value}
        if surrogate:
            L, K, _ = oracles.qip_loss(trial, X, y, state.enc.kind, state.enc.n_qubits, str(state.obs),
                                       state.lam, state.scale, state.normalize_quantum, frozen)
            return L + state.lam * K
        report, _ = loss_and_grads(state.with_params(trial), X, y, need_grad=False)
        return report.L_QIP

    worst = 0.0
    for name, value in params.items():
        fd = oracles.central_diff(lambda v: objective(name, v), value)
        worst = max(worst, oracles.rel_err(grads[name], fd))
    return worst
