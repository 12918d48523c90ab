"""Small ReLU MLP feature extractor with L2-normalized output, manual backprop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingFault
from ..gap import normalize_rows, normalize_rows_backward

OUTPUT_NORM_FLOOR = 1e-12


@dataclass
class Mlp:
    layer_dims: list[int]
    weights: list[np.ndarray]  # weights[l] has shape (dims[l], dims[l+1])
    biases: list[np.ndarray]

    @classmethod
    def init(cls, layer_dims, rng: np.random.Generator) -> Mlp:
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2 or min(layer_dims) < 1:
            raise ValueError(f"invalid layer dims {layer_dims}")
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
            biases.append(np.zeros(fan_out))
        return cls(layer_dims, weights, biases)

    @classmethod
    def identity(cls, dim: int) -> Mlp:
        return cls([dim, dim], [np.eye(dim)], [np.zeros(dim)])

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def param_items(self):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"mlp.w{i}", w
            yield f"mlp.b{i}", b


def mlp_forward(mlp: Mlp, X: np.ndarray, step: int | None = None):
    """Returns (unit features, cache for :func:`mlp_backward`)."""
    h = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(h)):
        raise TrainingFault("non-finite input features", step=step)
    inputs = []
    last = len(mlp.weights) - 1
    with np.errstate(over="ignore", invalid="ignore"):  # checked just below
        for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
            inputs.append(h)
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
    if not np.all(np.isfinite(h)):
        raise TrainingFault("non-finite activations", step=step)
    unit, norms = normalize_rows(h, OUTPUT_NORM_FLOOR)
    return unit, (inputs, h, unit, norms)


def mlp_backward(mlp: Mlp, cache, grad_unit: np.ndarray) -> dict[str, np.ndarray]:
    inputs, _, unit, norms = cache
    g = normalize_rows_backward(unit, norms, grad_unit, OUTPUT_NORM_FLOOR)
    grads: dict[str, np.ndarray] = {}
    for i in reversed(range(len(mlp.weights))):
        a = inputs[i]
        grads[f"mlp.w{i}"] = a.T @ g
        grads[f"mlp.b{i}"] = g.sum(axis=0)
        if i > 0:
            g = (g @ mlp.weights[i].T) * (a > 0)
    return grads


def forward_features(mlp: Mlp, X: np.ndarray, step: int | None = None) -> np.ndarray:
    return mlp_forward(mlp, X, step)[0]
