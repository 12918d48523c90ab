"""Cross-entropy and the information-preserving objective with exact gradients.

Forward graph for a batch (rows are samples, ``s`` is the logit scale)::

    V  = normalize(M(X))                  classical features
    Wn = column-normalize(W)              class centers
    w  = softmax(s V Wn)                  classical class distribution
    Q  = Q(V), S = Q(Wn^T)                quantum features / centers
    u  = softmax(s norm(Q) norm(S)^T)     quantum class distribution
    L  = mean_i -log w[i, y_i]
    K  = mean_i KL(w_i || u_i)
    L_QIP = L + lambda K

Gradients reach the MLP through V (directly and through Q), the head
through Wn (directly and through S) and the u3 angles through Q and S.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..encode import EncodingSpec
from ..gap import KL_EPS, kl_rows, log_softmax, normalize_rows, normalize_rows_backward
from ..observe import ObservableSpec, quantum_map_batch, quantum_map_vjp


def ce_loss(logits_scaled: np.ndarray, labels: np.ndarray) -> float:
    logits_scaled = np.asarray(logits_scaled, dtype=np.float64)
    labels = np.asarray(labels)
    n_classes = logits_scaled.shape[1]
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    logp = log_softmax(logits_scaled)
    return float(-np.mean(logp[np.arange(len(labels)), labels]))


@dataclass
class LossReport:
    L: float
    K: float
    L_QIP: float


@dataclass
class QipOptions:
    lam: float = 0.5
    scale: float = 16.0
    normalize_quantum: bool = True
    detach_targets: bool = True


def qip_objective(
    V: np.ndarray,
    W: np.ndarray,
    labels: np.ndarray,
    enc: EncodingSpec,
    obs: ObservableSpec,
    opts: QipOptions,
    need_grad: bool = True,
):
    """Loss report and gradients w.r.t. unit features V, raw head W and pqc angles.

    ``V`` must already be row-normalized (the MLP output); the column
    normalization of ``W`` happens here so that its Jacobian is included.
    """
    n = V.shape[0]
    s = opts.scale
    Wn_t, wnorm = normalize_rows(W.T)  # rows are class centers
    Wn = Wn_t.T
    logw = log_softmax(s * V @ Wn)
    rows = np.arange(n)
    L = float(-np.mean(logw[rows, labels]))

    if opts.lam == 0:
        report = LossReport(L=L, K=0.0, L_QIP=L)
        quantum = None
    else:
        Q = quantum_map_batch(V, enc, obs)
        S = quantum_map_batch(Wn_t, enc, obs)
        if opts.normalize_quantum:
            Qn, qnorm = normalize_rows(Q)
            Sn, snorm = normalize_rows(S)
        else:
            Qn, Sn = Q, S
        logu = log_softmax(s * Qn @ Sn.T)
        per_row, floored = kl_rows(logw, logu)
        K = float(per_row.mean())
        report = LossReport(L=L, K=K, L_QIP=L + opts.lam * K)
        quantum = (Q, S, Qn, Sn, logu, per_row, floored)
        if opts.normalize_quantum:
            quantum += (qnorm, snorm)

    if not need_grad:
        return report, None

    w = np.exp(logw)
    g_zw = w.copy()
    g_zw[rows, labels] -= 1.0
    g_zw /= n
    g_V = np.zeros_like(V)
    g_Wn_t = np.zeros_like(Wn_t)
    g_pqc = np.zeros_like(enc.pqc_params) if enc.trainable else None

    if quantum is not None:
        Q, S, Qn, Sn, logu, per_row, floored = quantum[:7]
        lam = opts.lam
        logu_f = np.where(floored, np.log(KL_EPS), logu)
        if not opts.detach_targets:
            g_zw += lam * w * (logw - logu_f - per_row[:, None]) / n
        kept = np.where(floored, 0.0, w)
        u = np.exp(logu)
        g_zu = lam * (u * kept.sum(axis=1, keepdims=True) - kept) / n
        g_Qn = s * g_zu @ Sn
        g_Sn = s * g_zu.T @ Qn
        if opts.normalize_quantum:
            qnorm, snorm = quantum[7:]
            g_Q = normalize_rows_backward(Qn, qnorm, g_Qn)
            g_S = normalize_rows_backward(Sn, snorm, g_Sn)
        else:
            g_Q, g_S = g_Qn, g_Sn
        gv, gp = quantum_map_vjp(V, enc, obs, g_Q)
        g_V += gv
        gw, gp2 = quantum_map_vjp(Wn_t, enc, obs, g_S)
        g_Wn_t += gw
        if g_pqc is not None:
            g_pqc += gp + gp2

    g_V += s * g_zw @ Wn.T
    g_Wn_t += s * (V.T @ g_zw).T
    g_W = normalize_rows_backward(Wn_t, wnorm, g_Wn_t).T
    return report, (g_V, g_W, g_pqc)
