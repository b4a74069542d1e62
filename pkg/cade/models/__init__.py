"""Victim models for cade."""

from pathlib import Path

from ..errors import ConfigError
from ..serialize import read_json
from ..spec import CHECKPOINT_VERSION
from .base import BaseModel, LossGrad, loss_and_input_grad, per_example_loss, unflatten
from .linear import LinearModel
from .mlp import MlpModel

MODEL_MAP = {
    "linear": LinearModel,
    "mlp": MlpModel,
}


def model_from_dict(data) -> BaseModel:
    """Rebuild a model from a checkpoint document."""
    version = data.get("version")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version '{version}'")
    kind = data.get("kind")
    if kind not in MODEL_MAP:
        raise ConfigError(f"Unknown model kind '{kind}'. Available: {', '.join(MODEL_MAP)}")
    sizes = data["layer_sizes"]
    shapes = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        shapes.extend([(fan_in, fan_out), (fan_out,)])
    params = unflatten(data["params"], shapes)
    if kind == "linear":
        w, b = params
        return LinearModel(w.ravel(), float(b[0]), data["task"], data["input_mean"], data["input_scale"])
    return MlpModel(
        params[0::2],
        params[1::2],
        task=data["task"],
        activation=data.get("activation", "relu"),
        input_mean=data["input_mean"],
        input_scale=data["input_scale"],
    )


def load_model(filepath: str | Path) -> BaseModel:
    return model_from_dict(read_json(filepath, "checkpoint"))


__all__ = [
    "BaseModel",
    "LinearModel",
    "MlpModel",
    "LossGrad",
    "MODEL_MAP",
    "load_model",
    "loss_and_input_grad",
    "model_from_dict",
    "per_example_loss",
]
