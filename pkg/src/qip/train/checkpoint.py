"""Binary checkpoint files.

Layout (all little-endian)::

    b"QIP1"
    u32 n_dims, u32 dims[n_dims]          MLP layer widths, input first
    u32 n_classes
    u32 encoder (0 amplitude, 1 phase, 2 u3), u32 n_qubits, u32 layers
    u32 n_passes, u32 passes[n_passes]    (0 X, 1 Y, 2 Z)
    u32 normalize_quantum, u32 detach_targets
    f64 lambda, scale, base_lr, beta1, beta2, eps, weight_decay
    f64 blocks: w0, b0, w1, b1, ..., head W, [pqc angles]
    f64 blocks: first moments in the same order, then second moments
    u64 step, u64 total_steps, u64 seed

Arrays are stored row-major (C order).
"""
from __future__ import annotations

import struct

import numpy as np

from ..encode import KINDS, EncodingSpec
from ..errors import TruncatedFileError, VersionError
from ..io import atomic_write_bytes
from ..observe import ObservableSpec
from .mlp import Mlp
from .loop import TrainState
from .optim import AdamWConfig

MAGIC = b"QIP1"
_AXES = "XYZ"


def checkpoint_bytes(state: TrainState) -> bytes:
    out = [MAGIC]
    dims = state.mlp.layer_dims
    u32 = lambda *vals: struct.pack(f"<{len(vals)}I", *vals)  # noqa: E731
    out.append(u32(len(dims), *dims))
    out.append(u32(state.n_classes))
    out.append(u32(KINDS.index(state.enc.kind), state.enc.n_qubits, state.enc.layers))
    out.append(u32(len(state.obs.passes), *(_AXES.index(a) for a in state.obs.passes)))
    out.append(u32(int(state.normalize_quantum), int(state.detach_targets)))
    a = state.adam
    out.append(struct.pack("<7d", state.lam, state.scale, state.base_lr, a.beta1, a.beta2, a.eps, a.weight_decay))
    params = state.params()
    for p in params.values():
        out.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    for which in (0, 1):
        for name in params:
            out.append(np.ascontiguousarray(state.moments[name][which], dtype="<f8").tobytes())
    out.append(struct.pack("<3Q", state.step, state.total_steps, state.seed))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"checkpoint truncated at byte {self.pos} (needed {n} more)")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, count: int = 1) -> tuple[int, ...]:
        return struct.unpack(f"<{count}I", self.take(4 * count))

    def f64(self, shape) -> np.ndarray:
        size = int(np.prod(shape, dtype=np.int64))
        return np.frombuffer(self.take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)


def state_from_bytes(data: bytes) -> TrainState:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise VersionError("not a QIP1 checkpoint")
    (n_dims,) = r.u32()
    dims = list(r.u32(n_dims))
    (n_classes,) = r.u32()
    kind_code, n_qubits, layers = r.u32(3)
    (n_passes,) = r.u32()
    passes = r.u32(n_passes)
    normalize_quantum, detach_targets = r.u32(2)
    lam, scale, base_lr, b1, b2, eps, wd = struct.unpack("<7d", r.take(56))

    kind = KINDS[kind_code]
    feature_dim = dims[-1]
    shapes = {}
    for i in range(len(dims) - 1):
        shapes[f"mlp.w{i}"] = (dims[i], dims[i + 1])
        shapes[f"mlp.b{i}"] = (dims[i + 1],)
    shapes["head.W"] = (feature_dim, n_classes)
    if kind == "u3":
        shapes["enc.pqc"] = (layers, n_qubits, 3)
    params = {name: r.f64(shape) for name, shape in shapes.items()}
    firsts = {name: r.f64(shape) for name, shape in shapes.items()}
    seconds = {name: r.f64(shape) for name, shape in shapes.items()}
    step, total_steps, seed = struct.unpack("<3Q", r.take(24))
    if r.pos != len(data):
        raise VersionError("trailing bytes after checkpoint payload")

    n_layers = len(dims) - 1
    mlp = Mlp(dims, [params[f"mlp.w{i}"] for i in range(n_layers)], [params[f"mlp.b{i}"] for i in range(n_layers)])
    enc = EncodingSpec(kind, n_qubits, feature_dim, layers, params.get("enc.pqc"))
    obs = ObservableSpec(tuple(_AXES[p] for p in passes))
    return TrainState(
        mlp=mlp,
        head=params["head.W"],
        enc=enc,
        obs=obs,
        lam=lam,
        scale=scale,
        normalize_quantum=bool(normalize_quantum),
        detach_targets=bool(detach_targets),
        base_lr=base_lr,
        total_steps=total_steps,
        step=step,
        seed=seed,
        adam=AdamWConfig(b1, b2, eps, wd),
        moments={name: (firsts[name], seconds[name]) for name in shapes},
    )


def save_checkpoint(path, state: TrainState) -> None:
    atomic_write_bytes(path, checkpoint_bytes(state))


def load_checkpoint(path) -> TrainState:
    with open(path, "rb") as fh:
        return state_from_bytes(fh.read())
