"""
Multi-layer perceptron victim with a hand-written reverse pass.

Layers are dense: z = h·W + b, followed by the activation on every layer
but the last. The reverse pass walks the cached (h, z) pairs backwards,
which is all the autodiff a dense feed-forward graph needs.
"""

from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, NumericError, ShapeError
from .base import BaseModel

ACTIVATIONS = ("relu", "tanh")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(float)
    return 1.0 - np.tanh(z) ** 2


class MlpModel(BaseModel):
    """
    Dense network with layer sizes [input, hidden..., output].

    Usage:
        model = MlpModel.init([7, 32, 1], rng)
        lg = model.loss_and_grads(X, y)   # losses, input_grad, param_grads
    """

    kind = "mlp"

    def __init__(
        self,
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        task: str = "regression",
        activation: str = "relu",
        input_mean: Optional[np.ndarray] = None,
        input_scale: Optional[np.ndarray] = None,
    ):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"Unknown activation '{activation}'. Available: {', '.join(ACTIVATIONS)}")
        if len(weights) != len(biases) or not weights:
            raise ShapeError("need one bias per weight matrix and at least one layer")
        weights = [np.asarray(w, dtype=float) for w in weights]
        biases = [np.asarray(b, dtype=float).ravel() for b in biases]
        for k, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.size != w.shape[1]:
                raise ShapeError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k and weights[k - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {k} expects {w.shape[0]} inputs, previous layer gives {weights[k - 1].shape[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError(f"layer {k} has non-finite parameters")
        if task == "regression" and weights[-1].shape[1] != 1:
            raise ShapeError("regression MLPs need a single output")
        p = weights[0].shape[0]
        super().__init__(
            task,
            np.zeros(p) if input_mean is None else input_mean,
            np.ones(p) if input_scale is None else input_scale,
        )
        self.weights = weights
        self.biases = biases
        self.activation = activation

    @classmethod
    def init(
        cls,
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        task: str = "regression",
        activation: str = "relu",
    ) -> "MlpModel":
        """Uniform fan-in initialization: U(−1/√fan_in, 1/√fan_in)."""
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ConfigError(f"invalid layer sizes {list(layer_sizes)}")
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases, task=task, activation=activation)

    def parameters(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def with_parameters(self, params: List[np.ndarray]) -> "MlpModel":
        return MlpModel(
            [p.copy() for p in params[0::2]],
            [p.copy() for p in params[1::2]],
            task=self.task,
            activation=self.activation,
            input_mean=self.input_mean,
            input_scale=self.input_scale,
        )

    def layer_sizes(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def _forward(self, h: np.ndarray) -> Tuple[np.ndarray, Any]:
        cache = []
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            cache.append((h, z))
            h = z if k == last else _act(self.activation, z)
        return h, cache

    def _backward(self, cache: Any, g_out: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        grads: List[np.ndarray] = [None] * (2 * len(self.weights))  # type: ignore[list-item]
        g = g_out
        for k in range(len(self.weights) - 1, -1, -1):
            h, _ = cache[k]
            grads[2 * k] = h.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.weights[k].T
            if k:
                g = g * _act_grad(self.activation, cache[k - 1][1])
        return grads, g
