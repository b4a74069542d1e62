"""
Base interface for victim models.

A victim is a dense feed-forward predictor. It exposes its parameters as
a flat list of arrays, a forward pass that keeps what the reverse pass
needs, and a reverse pass that returns gradients for both the parameters
and the inputs. Losses and their gradients are computed here, so every
model gets squared error (regression) and softmax cross-entropy
(classification) for free.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from ..errors import ConfigError, ShapeError
from ..serialize import write_json
from ..spec import CHECKPOINT_VERSION

logger = logging.getLogger(__name__)

TASKS = ("regression", "classification")


@dataclass
class LossGrad:
    """
    losses: per-example loss, shape (n,)
    input_grad: gradient of each example's own loss w.r.t. its input, shape (n, p)
    param_grads: gradients of the mean loss, aligned with model.parameters()
    """

    losses: np.ndarray
    input_grad: np.ndarray
    param_grads: List[np.ndarray]

    @property
    def loss(self) -> float:
        return float(np.mean(self.losses))


class BaseModel(ABC):
    """
    Abstract victim model.

    Implement _forward/_backward over standardized inputs; the base class
    handles standardization, losses, predictions and checkpoints.
    """

    kind: str = "base"

    def __init__(self, task: str, input_mean: np.ndarray, input_scale: np.ndarray):
        if task not in TASKS:
            raise ConfigError(f"Unknown task '{task}'. Available: {', '.join(TASKS)}")
        self.task = task
        self.input_mean = np.asarray(input_mean, dtype=float)
        self.input_scale = np.asarray(input_scale, dtype=float)
        if np.any(self.input_scale <= 0):
            raise ConfigError("input_scale must be positive")

    @property
    def n_inputs(self) -> int:
        return self.input_mean.size

    @abstractmethod
    def parameters(self) -> List[np.ndarray]:
        """Trainable arrays, in a fixed order."""
        ...

    @abstractmethod
    def with_parameters(self, params: List[np.ndarray]) -> "BaseModel":
        """New model of the same architecture holding params."""
        ...

    @abstractmethod
    def layer_sizes(self) -> List[int]:
        ...

    @abstractmethod
    def _forward(self, h: np.ndarray) -> Tuple[np.ndarray, Any]:
        """Outputs (n, k) for standardized inputs h, plus a cache."""
        ...

    @abstractmethod
    def _backward(self, cache: Any, g_out: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """Gradients of Σ g_out·out w.r.t. parameters and standardized inputs."""
        ...

    def with_standardization(self, mean, scale) -> "BaseModel":
        clone = self.with_parameters([p.copy() for p in self.parameters()])
        clone.input_mean = np.asarray(mean, dtype=float)
        clone.input_scale = np.asarray(scale, dtype=float)
        return clone

    def _inputs(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_inputs:
            raise ShapeError(f"model expects {self.n_inputs} inputs, got {X.shape[1]}")
        return X

    def outputs(self, X) -> np.ndarray:
        out, _ = self._forward((self._inputs(X) - self.input_mean) / self.input_scale)
        return out

    def predict(self, X) -> np.ndarray:
        """Real predictions (regression) or argmax classes (classification)."""
        out = self.outputs(X)
        if self.task == "regression":
            return out[:, 0]
        return np.argmax(out, axis=1)

    def loss_and_grads(self, X, y) -> LossGrad:
        X = self._inputs(X)
        y = np.atleast_1d(np.asarray(y))
        if y.shape[0] != X.shape[0]:
            raise ShapeError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
        out, cache = self._forward((X - self.input_mean) / self.input_scale)
        losses, g_out = per_example_loss(self.task, out, y)
        param_grads, g_h = self._backward(cache, g_out)
        n = X.shape[0]
        return LossGrad(
            losses=losses,
            input_grad=g_h / self.input_scale,
            param_grads=[g / n for g in param_grads],
        )

    def loss(self, X, y) -> float:
        out = self.outputs(X)
        losses, _ = per_example_loss(self.task, out, np.atleast_1d(np.asarray(y)))
        return float(np.mean(losses))

    # ─── checkpoints ────────────────────────────────────────────

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": CHECKPOINT_VERSION,
            "kind": self.kind,
            "task": self.task,
            "layer_sizes": self.layer_sizes(),
            "activation": getattr(self, "activation", "identity"),
            "input_mean": [float(v) for v in self.input_mean],
            "input_scale": [float(v) for v in self.input_scale],
            "params": [float(v) for p in self.parameters() for v in p.ravel()],
        }

    def save(self, filepath: str | Path):
        write_json(filepath, self.to_dict(), "checkpoint")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.layer_sizes()}, task='{self.task}')"


def per_example_loss(task: str, out: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-example losses and their gradients w.r.t. the outputs."""
    if task == "regression":
        resid = out[:, 0] - y.astype(float)
        return resid ** 2, (2.0 * resid)[:, None]
    shifted = out - out.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    labels = y.astype(int)
    rows = np.arange(out.shape[0])
    losses = log_norm - shifted[rows, labels]
    probs = np.exp(shifted - log_norm[:, None])
    probs[rows, labels] -= 1.0
    return losses, probs


def loss_and_input_grad(model: BaseModel, x, y) -> Tuple[float, np.ndarray]:
    """Loss of a single example and its exact gradient w.r.t. x."""
    lg = model.loss_and_grads(np.asarray(x, dtype=float)[None, :], np.atleast_1d(y))
    return float(lg.losses[0]), lg.input_grad[0]


def unflatten(flat, shapes: List[Tuple[int, ...]]) -> List[np.ndarray]:
    flat = np.asarray(flat, dtype=float)
    total = sum(int(np.prod(s)) for s in shapes)
    if flat.size != total:
        raise ShapeError(f"checkpoint holds {flat.size} parameters, architecture needs {total}")
    out, pos = [], 0
    for s in shapes:
        k = int(np.prod(s))
        out.append(flat[pos:pos + k].reshape(s).copy())
        pos += k
    return out
