"""
cade Transform — monotone piecewise-linear element-wise functions.

The nonlinear SCM form f(x) = Aᵀf(x) + u needs an invertible f per
variable. A PiecewiseLinear with K breakpoints and K+1 strictly positive
slopes is strictly increasing, so its inverse is exact and cheap. Outside
the breakpoints it extrapolates with the boundary slope, so every finite
real is in the domain.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from .errors import ConfigError, RangeError


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """
    f(v) = offset + s_0·v + Σ_k (s_k − s_{k−1})·max(0, v − b_k)

    Slope s_0 applies left of the first breakpoint, s_k between b_k and
    b_{k+1}, s_K right of the last one.
    """

    breakpoints: Tuple[float, ...] = ()
    slopes: Tuple[float, ...] = (1.0,)
    offset: float = 0.0
    _knot_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        s = np.asarray(self.slopes, dtype=float)
        if s.shape != (b.size + 1,):
            raise ConfigError(f"{b.size} breakpoints need {b.size + 1} slopes, got {s.size}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(s)) and np.isfinite(self.offset)):
            raise ConfigError("transform parameters must be finite")
        if np.any(s <= 0):
            raise ConfigError("transform slopes must be strictly positive")
        if np.any(np.diff(b) <= 0):
            raise ConfigError("transform breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", tuple(float(v) for v in b))
        object.__setattr__(self, "slopes", tuple(float(v) for v in s))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "_knot_values", self._eval(b))

    @classmethod
    def identity(cls) -> "PiecewiseLinear":
        return cls()

    @classmethod
    def random(cls, rng: np.random.Generator, k: int = 3, span: float = 3.0) -> "PiecewiseLinear":
        """Random strictly increasing transform with k breakpoints in [-span, span]."""
        b = np.sort(rng.uniform(-span, span, size=k))
        s = rng.uniform(0.25, 4.0, size=k + 1)
        return cls(tuple(b), tuple(s), float(rng.normal()))

    @property
    def is_identity(self) -> bool:
        return not self.breakpoints and self.slopes == (1.0,) and self.offset == 0.0

    def _eval(self, v: np.ndarray) -> np.ndarray:
        out = self.offset + self.slopes[0] * v
        for k, bk in enumerate(self.breakpoints):
            out = out + (self.slopes[k + 1] - self.slopes[k]) * np.maximum(0.0, v - bk)
        return out

    def eval(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)):
            raise RangeError("transform input is not finite")
        if self.is_identity:
            return v.copy()
        return self._eval(v)

    def invert(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if not np.all(np.isfinite(w)):
            raise RangeError("transform inverse input is not finite")
        if self.is_identity:
            return w.copy()
        if not self.breakpoints:
            return (w - self.offset) / self.slopes[0]
        # segment 0 lies left of the first knot image
        seg = np.searchsorted(self._knot_values, w, side="right")
        slopes = np.asarray(self.slopes)[seg]
        knots = np.concatenate(([0.0], self.breakpoints))[seg]
        bases = np.concatenate(([self.offset], self._knot_values))[seg]
        return knots + (w - bases) / slopes

    def to_dict(self) -> Dict[str, Any]:
        return {"breakpoints": list(self.breakpoints), "slopes": list(self.slopes), "offset": self.offset}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PiecewiseLinear":
        return cls(
            breakpoints=tuple(data.get("breakpoints", ())),
            slopes=tuple(data.get("slopes", (1.0,))),
            offset=float(data.get("offset", 0.0)),
        )

    def __repr__(self) -> str:
        if self.is_identity:
            return "PiecewiseLinear(identity)"
        return f"PiecewiseLinear(K={len(self.breakpoints)})"


def identity_transforms(d: int) -> Tuple[PiecewiseLinear, ...]:
    return tuple(PiecewiseLinear.identity() for _ in range(d))


def apply_all(transforms: Sequence[PiecewiseLinear], x: np.ndarray) -> np.ndarray:
    """Apply f column-wise to x of shape (d,) or (n, d)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i, t in enumerate(transforms):
        out[..., i] = t.eval(x[..., i])
    return out


def invert_all(transforms: Sequence[PiecewiseLinear], w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    for i, t in enumerate(transforms):
        out[..., i] = t.invert(w[..., i])
    return out
