"""
cade SCM — structural causal models, abduction, and counterfactuals.

Two model families share one interface:

  - Scm: the additive form f(x) = Aᵀf(x) + u with an invertible
    element-wise f. Abduction is u = (I − Aᵀ)f(x); the counterfactual
    update is the masked action/prediction step.
  - SimulatorScm: explicit closed-form mechanisms x_i = g_i(parents) + u_i,
    for generating processes that are not linear in f (the Pendulum
    projection law).

All operations accept a single vector of shape (d,) or a batch (n, d).
Solves are topological substitutions; (I − A)⁻¹ is never formed.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .graph import CausalGraph, markov_blanket, validate_graph
from .serialize import read_json, write_json
from .spec import SCM_VERSION
from .transform import PiecewiseLinear, apply_all, identity_transforms, invert_all

logger = logging.getLogger(__name__)

FIXED_POINT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Noise:
    """Exogenous distribution of one variable: gaussian(mean, std) or uniform(lo, hi)."""

    kind: str = "gaussian"
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.b > 0:
                raise ConfigError(f"gaussian std must be positive, got {self.b}")
        elif self.kind == "uniform":
            if not self.b > self.a:
                raise ConfigError(f"uniform bounds must satisfy lo < hi, got ({self.a}, {self.b})")
        elif self.kind != "constant":
            raise ConfigError(f"unknown noise kind '{self.kind}'")

    @classmethod
    def gaussian(cls, mean: float = 0.0, std: float = 1.0) -> "Noise":
        return cls("gaussian", float(mean), float(std))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "Noise":
        return cls("uniform", float(lo), float(hi))

    @classmethod
    def constant(cls, value: float = 0.0) -> "Noise":
        """Degenerate exogenous term, for noiseless mechanisms."""
        return cls("constant", float(value), float(value))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(self.a, self.b, size=size)
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=size)
        return np.full(size, self.a)

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "mean": self.a, "std": self.b}
        if self.kind == "uniform":
            return {"kind": "uniform", "lo": self.a, "hi": self.b}
        return {"kind": "constant", "value": self.a}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Noise":
        kind = data.get("kind", "gaussian")
        if kind == "uniform":
            return cls.uniform(data["lo"], data["hi"])
        if kind == "constant":
            return cls.constant(data.get("value", 0.0))
        return cls.gaussian(data.get("mean", 0.0), data.get("std", 1.0))


@dataclass(frozen=True, eq=False)
class InterventionMask:
    """Binary mask over d variables; ones mark the intervened set S."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 1:
            raise ShapeError(f"mask must be a vector, got shape {m.shape}")
        if not np.all((m == 0) | (m == 1)):
            raise ConfigError("mask entries must be 0 or 1")
        m = m.astype(bool)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_indices(cls, d: int, indices: Iterable[int]) -> "InterventionMask":
        m = np.zeros(d, dtype=bool)
        for i in indices:
            m[int(i)] = True
        return cls(m)

    @classmethod
    def empty(cls, d: int) -> "InterventionMask":
        return cls(np.zeros(d, dtype=bool))

    @property
    def d(self) -> int:
        return self.mask.size

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.mask))

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def __repr__(self) -> str:
        return f"InterventionMask(S={list(self.indices)})"


class StructuralModel(ABC):
    """
    Shared counterfactual machinery. Subclasses define the structural
    assignment of each variable given the values of its parents and its
    exogenous term, and the matching abduction.
    """

    def __init__(self, graph: CausalGraph, noise: Sequence[Noise], y_index: int):
        if len(noise) != graph.d:
            raise ShapeError(f"{len(noise)} noise specs for {graph.d} variables")
        if not 0 <= y_index < graph.d:
            raise ConfigError(f"y_index {y_index} out of range for d={graph.d}")
        self.graph = graph
        self.noise = tuple(noise)
        self.y_index = int(y_index)

    @property
    def d(self) -> int:
        return self.graph.d

    @property
    def names(self) -> Tuple[str, ...]:
        return self.graph.names

    @property
    def feature_indices(self) -> Tuple[int, ...]:
        return tuple(i for i in range(self.d) if i != self.y_index)

    @abstractmethod
    def assign_one(self, i: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Value of variable i with parents read from x."""
        ...

    @abstractmethod
    def assign(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """All structural assignments at once, parents read from x."""
        ...

    @abstractmethod
    def abduct(self, x) -> np.ndarray:
        """Recover the exogenous vector u from an observation x."""
        ...

    def _check(self, x, what: str = "x") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d,):
            raise ShapeError(f"{what} must have trailing dimension {self.d}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericError(f"{what} contains non-finite values")
        return x

    def forward_sample(self, u) -> np.ndarray:
        """Solve the structural equations for x given u, in topological order."""
        u = self._check(u, "u")
        x = np.zeros_like(u)
        with np.errstate(over="ignore", invalid="ignore"):
            for i in self.graph.topo_order:
                x[..., i] = self.assign_one(i, x, u)
        if not np.all(np.isfinite(x)):
            raise NumericError("forward_sample overflowed")
        return x

    def sample(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Draw n exogenous vectors and their observations. Returns (x, u)."""
        u = np.column_stack([nz.sample(rng, n) for nz in self.noise])
        return self.forward_sample(u), u

    def counterfactual_step(self, x, x_prime, u, mask: InterventionMask) -> np.ndarray:
        """One action/prediction sweep: S keeps x_prime, the rest is re-assigned from x_prime."""
        x_prime = self._check(x_prime, "x_prime")
        u = self._check(u, "u")
        self._check_mask(mask)
        out = self.assign(x_prime, u)
        out[..., mask.mask] = x_prime[..., mask.mask]
        return out

    def counterfactual(self, x, values_on_S, mask: InterventionMask) -> np.ndarray:
        """
        Counterfactual of x under do(x_S := values_on_S).

        values_on_S is aligned with mask.indices (shape (|S|,) or (n, |S|)).
        Applies depth-many counterfactual steps; with DEBUG logging on, one
        extra sweep asserts the fixed point.
        """
        x = self._check(x)
        self._check_mask(mask)
        if mask.is_empty:
            return x.copy()
        u = self.abduct(x)
        x_prime = x.copy()
        x_prime[..., mask.mask] = values_on_S
        return self.propagate(x, x_prime, u, mask)

    def propagate(self, x, x_prime, u, mask: InterventionMask) -> np.ndarray:
        """
        Thread counterfactual_step depth-many times starting from x_prime.

        Variables outside S ∪ descendants(S) keep their values from x.
        """
        x = np.asarray(x, dtype=float)
        out = np.asarray(x_prime, dtype=float)
        for _ in range(self.graph.depth):
            out = self.counterfactual_step(x, out, u, mask)
        if logger.isEnabledFor(logging.DEBUG):
            extra = self.counterfactual_step(x, out, u, mask)
            change = float(np.max(np.abs(extra - out))) if out.size else 0.0
            if change >= FIXED_POINT_TOLERANCE * max(1.0, float(np.max(np.abs(out)))):
                raise NumericError(f"counterfactual did not reach a fixed point (change {change:.3e})")
        out = np.array(out, dtype=float)
        unaffected = np.ones(self.d, dtype=bool)
        unaffected[list(mask.indices)] = False
        unaffected[list(self.graph.descendants(mask.indices))] = False
        out[..., unaffected] = x[..., unaffected]
        return out

    def _check_mask(self, mask: InterventionMask):
        if mask.d != self.d:
            raise ShapeError(f"mask has length {mask.d}, model has {self.d} variables")

    def markov_blanket(self, target: Optional[int] = None):
        return markov_blanket(self.graph, self.y_index if target is None else target)


class Scm(StructuralModel):
    """
    Additive SCM f(x) = Aᵀf(x) + u.

    Usage:
        g = validate_graph(A, names=["x1", "y", "x3", "x2"])
        scm = Scm(g, noise=[Noise.gaussian()] * 4, y_index=1)
        x, u = scm.sample(rng, 100)
        assert np.allclose(scm.abduct(x), u)
    """

    def __init__(
        self,
        graph: CausalGraph,
        noise: Sequence[Noise],
        y_index: int,
        transforms: Optional[Sequence[PiecewiseLinear]] = None,
    ):
        super().__init__(graph, noise, y_index)
        self.transforms = tuple(transforms) if transforms is not None else identity_transforms(graph.d)
        if len(self.transforms) != graph.d:
            raise ShapeError(f"{len(self.transforms)} transforms for {graph.d} variables")

    @property
    def adjacency(self) -> np.ndarray:
        return self.graph.adjacency

    def f(self, x) -> np.ndarray:
        return apply_all(self.transforms, x)

    def f_inv(self, w) -> np.ndarray:
        return invert_all(self.transforms, w)

    def assign_one(self, i: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        parents = self.graph.parents(i)
        total = u[..., i].copy()
        for j in parents:
            total = total + self.adjacency[j, i] * self.transforms[j].eval(x[..., j])
        return self.transforms[i].invert(total)

    def assign(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.f_inv(self.f(x) @ self.adjacency + u)

    def abduct(self, x) -> np.ndarray:
        """u = (I − Aᵀ)f(x); row-vector form f(x) − f(x)A."""
        fx = self.f(self._check(x))
        return fx - fx @ self.adjacency

    def counterfactual_step(self, x, x_prime, u, mask: InterventionMask) -> np.ndarray:
        """
        f⁻¹( Aᵀf(x′)⊙(1−m) + (f(x) + f(x′) − f(x))⊙m + u⊙(1−m) )

        The intervened coordinates carry f(x) shifted by the intervention
        f(x′) − f(x), i.e. the intervened value itself.
        """
        x = self._check(x)
        x_prime = self._check(x_prime, "x_prime")
        u = self._check(u, "u")
        self._check_mask(mask)
        m = mask.mask.astype(float)
        fx = self.f(x)
        fxp = self.f(x_prime)
        w = (fxp @ self.adjacency) * (1 - m) + (fx + (fxp - fx)) * m + u * (1 - m)
        out = self.f_inv(w)
        # exact on S regardless of transform round-off
        out[..., mask.mask] = x_prime[..., mask.mask]
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": SCM_VERSION,
            "kind": "additive",
            "d": self.d,
            "names": list(self.names),
            "adjacency": [float(v) for v in self.adjacency.ravel()],
            "transforms": [t.to_dict() for t in self.transforms],
            "noise": [nz.to_dict() for nz in self.noise],
            "y_index": self.y_index,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scm":
        version = data.get("version")
        if version != SCM_VERSION:
            raise ConfigError(f"unsupported SCM document version '{version}'")
        d = int(data["d"])
        adjacency = np.asarray(data["adjacency"], dtype=float).reshape(d, d)
        graph = validate_graph(adjacency, names=data.get("names"))
        return cls(
            graph,
            noise=[Noise.from_dict(n) for n in data["noise"]],
            y_index=int(data["y_index"]),
            transforms=[PiecewiseLinear.from_dict(t) for t in data["transforms"]],
        )

    def save(self, filepath: str | Path):
        """Write the SCM as a JSON document (floats round-trip exactly)."""
        write_json(filepath, self.to_dict(), "SCM document")

    @classmethod
    def load(cls, filepath: str | Path) -> "Scm":
        return cls.from_dict(read_json(filepath, "SCM document"))

    def __repr__(self) -> str:
        return f"Scm(d={self.d}, depth={self.graph.depth}, y={self.names[self.y_index]})"


Mechanism = Callable[[np.ndarray], np.ndarray]


class SimulatorScm(StructuralModel):
    """
    SCM with explicit mechanisms x_i = g_i(x) + u_i, where g_i may only
    read the parents of i. Roots have g_i = 0, so x_i = u_i.
    """

    def __init__(
        self,
        graph: CausalGraph,
        mechanisms: Mapping[int, Mechanism],
        noise: Sequence[Noise],
        y_index: int,
    ):
        super().__init__(graph, noise, y_index)
        for i in range(graph.d):
            if graph.parents(i) and i not in mechanisms:
                raise ConfigError(f"variable '{graph.names[i]}' has parents but no mechanism")
        self.mechanisms = dict(mechanisms)

    def _g(self, i: int, x: np.ndarray) -> np.ndarray:
        g = self.mechanisms.get(i)
        if g is None:
            return np.zeros(x.shape[:-1])
        return np.asarray(g(x), dtype=float)

    def assign_one(self, i: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self._g(i, x) + u[..., i]

    def assign(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        for i in range(self.d):
            out[..., i] = self.assign_one(i, x, u)
        return out

    def abduct(self, x) -> np.ndarray:
        x = self._check(x)
        u = np.empty_like(x)
        for i in range(self.d):
            u[..., i] = x[..., i] - self._g(i, x)
        return u

    def __repr__(self) -> str:
        return f"SimulatorScm(d={self.d}, depth={self.graph.depth}, y={self.names[self.y_index]})"


# Functional API mirroring the model methods.

def forward_sample(scm: StructuralModel, u) -> np.ndarray:
    return scm.forward_sample(u)


def abduct(scm: StructuralModel, x) -> np.ndarray:
    return scm.abduct(x)


def counterfactual_step(scm: StructuralModel, x, x_prime, u, mask: InterventionMask) -> np.ndarray:
    return scm.counterfactual_step(x, x_prime, u, mask)


def counterfactual(scm: StructuralModel, x, values_on_S, mask: InterventionMask) -> np.ndarray:
    return scm.counterfactual(x, values_on_S, mask)
