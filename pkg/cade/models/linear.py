"""
Linear victim: ŷ = wᵀx + b.

Training may standardize inputs; coef/intercept always report the
equivalent weights in raw feature space.
"""

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError, NumericError
from .base import BaseModel


class LinearModel(BaseModel):
    """Linear regressor with optional bias."""

    kind = "linear"

    def __init__(
        self,
        weights,
        bias: float = 0.0,
        task: str = "regression",
        input_mean: Optional[np.ndarray] = None,
        input_scale: Optional[np.ndarray] = None,
        info: Optional[Dict[str, Any]] = None,
    ):
        w = np.asarray(weights, dtype=float).ravel()
        if task != "regression":
            raise ConfigError("LinearModel supports regression only; use an MLP without hidden layers for classes")
        super().__init__(
            task,
            np.zeros(w.size) if input_mean is None else input_mean,
            np.ones(w.size) if input_scale is None else input_scale,
        )
        if not (np.all(np.isfinite(w)) and np.isfinite(bias)):
            raise NumericError("linear model parameters must be finite")
        self.weights = w
        self.bias = float(bias)
        self.info = dict(info or {})

    @property
    def coef(self) -> np.ndarray:
        """Raw-space weights."""
        return self.weights / self.input_scale

    @property
    def intercept(self) -> float:
        return float(self.bias - np.sum(self.weights * self.input_mean / self.input_scale))

    def parameters(self) -> List[np.ndarray]:
        return [self.weights, np.array([self.bias])]

    def with_parameters(self, params: List[np.ndarray]) -> "LinearModel":
        w, b = params
        return LinearModel(w.copy(), float(np.asarray(b).ravel()[0]), self.task, self.input_mean, self.input_scale)

    def layer_sizes(self) -> List[int]:
        return [self.weights.size, 1]

    def _forward(self, h: np.ndarray) -> Tuple[np.ndarray, Any]:
        return (h @ self.weights + self.bias)[:, None], h

    def _backward(self, cache: Any, g_out: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        h = cache
        g = g_out[:, 0]
        return [h.T @ g, np.array([g.sum()])], np.outer(g, self.weights)
