"""
cade Datasets — the synthetic generating processes.

Three generators, each a pure function of (n, params, seed):

  - linear toy:      x1 → y → x2 ← x3, Gaussian noises
  - SynMeasurement:  8 variables, target y with parents, children and a co-parent
  - Pendulum latent: pendulum/light angles and the shadows they project

Every Dataset keeps a reference to the SCM that generated it, the
column-to-variable mapping, and the drawn exogenous terms.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import ConfigError, IoError, NumericError, RangeError
from .graph import validate_graph
from .serialize import read_json, write_json
from .scm import Noise, Scm, SimulatorScm, StructuralModel
from . import spec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ToyParams:
    """Edge weights and noise stds of the linear toy x1 → y → x2 ← x3."""

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    sigma_1: float = 1.0
    sigma_y: float = 1.0
    sigma_2: float = 1.0
    sigma_3: float = 1.0

    def __post_init__(self):
        for name in ("sigma_1", "sigma_y", "sigma_2", "sigma_3"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive (finite variance), got {getattr(self, name)}")


@dataclass(eq=False)
class Dataset:
    """
    Realized observations of a generating process.

    features[:, k] holds SCM variable feature_index[k]; target holds the
    variable at scm.y_index. labels is set for classification datasets.
    """

    features: np.ndarray
    target: np.ndarray
    scm: StructuralModel
    column_names: Tuple[str, ...]
    seed: int
    feature_index: Tuple[int, ...]
    generator: str
    params: Dict[str, Any] = field(default_factory=dict)
    exogenous: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    noisy_rows: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] == 0 or self.features.shape[1] == 0:
            raise ConfigError(f"dataset needs n>0 rows and p>0 columns, got {self.features.shape}")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.target))):
            raise NumericError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def target_name(self) -> str:
        return self.scm.names[self.scm.y_index]

    @property
    def task(self) -> str:
        return "classification" if self.labels is not None else "regression"

    def response(self) -> np.ndarray:
        """What a victim is trained to predict: labels if present, else target."""
        return self.labels if self.labels is not None else self.target

    def full(self) -> np.ndarray:
        """Rows as full SCM variable vectors (features plus target)."""
        out = np.empty((self.n, self.scm.d))
        out[:, list(self.feature_index)] = self.features
        out[:, self.scm.y_index] = self.target
        return out

    def to_features(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[..., list(self.feature_index)]

    def variable_ranges(self) -> np.ndarray:
        """Empirical (max − min) per SCM variable."""
        full = self.full()
        return full.max(axis=0) - full.min(axis=0)

    def variable_support(self) -> Tuple[np.ndarray, np.ndarray]:
        full = self.full()
        return full.min(axis=0), full.max(axis=0)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            features=self.features[rows],
            target=self.target[rows],
            scm=self.scm,
            column_names=self.column_names,
            seed=self.seed,
            feature_index=self.feature_index,
            generator=self.generator,
            params=dict(self.params),
            exogenous=None if self.exogenous is None else self.exogenous[rows],
            labels=None if self.labels is None else self.labels[rows],
            noisy_rows=None if self.noisy_rows is None else self.noisy_rows[rows],
        )

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.features, columns=list(self.column_names))
        df[self.target_name] = self.target
        if self.labels is not None:
            df["label"] = self.labels
        return df

    def metadata(self) -> Dict[str, Any]:
        return {
            "version": spec.DATASET_VERSION,
            "generator": self.generator,
            "seed": self.seed,
            "n": self.n,
            "params": self.params,
            "column_names": list(self.column_names),
            "target": self.target_name,
        }

    def save(self, filepath: str | Path):
        """Write <stem>.csv and the <stem>.meta.json sidecar."""
        target = Path(filepath).with_suffix(".csv")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            self.to_frame().to_csv(target, index=False)
            write_json(target.with_suffix(".meta.json"), self.metadata(), "dataset metadata")
        except OSError as e:
            raise IoError(f"cannot write dataset to {target}: {e}") from e

    @classmethod
    def load(cls, filepath: str | Path) -> "Dataset":
        """Read a CSV + sidecar pair; the SCM is rebuilt from the generator name and params."""
        csv_path = Path(filepath).with_suffix(".csv")
        meta_path = csv_path.with_suffix(".meta.json")
        if not csv_path.exists() or not meta_path.exists():
            raise FileNotFoundError(f"Dataset not found: {csv_path} (+ .meta.json)")
        meta = read_json(meta_path, "dataset metadata", version=spec.DATASET_VERSION)
        generator = meta["generator"]
        if generator not in SCM_BUILDERS:
            raise ConfigError(f"unknown generator '{generator}'")
        scm, feature_index = SCM_BUILDERS[generator](meta.get("params", {}))
        df = pd.read_csv(csv_path, float_precision="round_trip")
        columns = tuple(meta["column_names"])
        return cls(
            features=df[list(columns)].to_numpy(dtype=float),
            target=df[meta["target"]].to_numpy(dtype=float),
            scm=scm,
            column_names=columns,
            seed=int(meta["seed"]),
            feature_index=feature_index,
            generator=generator,
            params=meta.get("params", {}),
            labels=df["label"].to_numpy(dtype=int) if "label" in df.columns else None,
        )

    def __repr__(self) -> str:
        return f"Dataset({self.generator}, n={self.n}, p={self.p}, seed={self.seed})"


# ─── Linear toy ─────────────────────────────────────────────────

TOY_NAMES = ("x1", "y", "x3", "x2")
TOY_FEATURES = (0, 3, 2)


def toy_scm(params: ToyParams = ToyParams()) -> Scm:
    """Variable order (x1, y, x3, x2); y_index 1."""
    a = np.zeros((4, 4))
    a[0, 1] = params.a
    a[2, 3] = params.b
    a[1, 3] = params.c
    noise = [
        Noise.gaussian(0.0, params.sigma_1),
        Noise.gaussian(0.0, params.sigma_y),
        Noise.gaussian(0.0, params.sigma_3),
        Noise.gaussian(0.0, params.sigma_2),
    ]
    return Scm(validate_graph(a, names=TOY_NAMES), noise=noise, y_index=1)


def gen_linear_toy(n: int, params: ToyParams = ToyParams(), seed: int = 0) -> Dataset:
    """Sample the toy SCM; features (x1, x2, x3), target y."""
    _check_n(n)
    scm = toy_scm(params)
    x, u = scm.sample(np.random.default_rng(seed), n)
    return Dataset(
        features=x[:, list(TOY_FEATURES)],
        target=x[:, 1],
        scm=scm,
        column_names=("x1", "x2", "x3"),
        seed=seed,
        feature_index=TOY_FEATURES,
        generator="linear_toy",
        params=asdict(params),
        exogenous=u,
    )


# ─── SynMeasurement ─────────────────────────────────────────────

SYN_NAMES = ("A", "P1", "P2", "y", "CP", "C1", "C2", "D")
SYN_EDGES = {
    ("A", "P1"): 1.0,
    ("A", "P2"): 1.0,
    ("P1", "y"): 1.0,
    ("P2", "y"): 1.0,
    ("CP", "C1"): 1.0,
    ("y", "C1"): 4.0,
    ("C1", "C2"): 1.0,
    ("y", "C2"): 1.0,
    ("C1", "D"): 1.0,
    ("C2", "D"): 1.0,
}


def syn_measurement_scm() -> Scm:
    a = np.zeros((8, 8))
    for (src, dst), w in SYN_EDGES.items():
        a[SYN_NAMES.index(src), SYN_NAMES.index(dst)] = w
    return Scm(validate_graph(a, names=SYN_NAMES), noise=[Noise.gaussian()] * 8, y_index=3)


def gen_syn_measurement(n: int, seed: int = 0) -> Dataset:
    """Eight unit-Gaussian-noise variables; features (A, P1, P2, CP, C1, C2, D), target y."""
    _check_n(n)
    scm = syn_measurement_scm()
    x, u = scm.sample(np.random.default_rng(seed), n)
    idx = scm.feature_indices
    return Dataset(
        features=x[:, list(idx)],
        target=x[:, scm.y_index],
        scm=scm,
        column_names=tuple(SYN_NAMES[i] for i in idx),
        seed=seed,
        feature_index=idx,
        generator="syn_measurement",
        exogenous=u,
    )


# ─── Pendulum latent ────────────────────────────────────────────

PENDULUM_NAMES = ("pendulum_angle", "light_angle", "shadow_length", "shadow_position")


def shadow_endpoints(pendulum_angle, light_angle) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ground-line projections (left, right) of the pivot and of the ball.

    The pivot sits at (c_x, c_y); the ball at (c_x + l·sin θ, c_y − l·cos θ).
    Light rays at elevation φ hit the ground y = b at x − (height − b)/tan φ.
    """
    theta = np.asarray(pendulum_angle, dtype=float)
    tan_phi = np.tan(np.asarray(light_angle, dtype=float))
    cx, cy, lp, b = spec.PENDULUM_CENTER_X, spec.PENDULUM_CENTER_Y, spec.PENDULUM_LENGTH, spec.PENDULUM_GROUND
    right = cx + lp * np.sin(theta) - (cy - lp * np.cos(theta) - b) / tan_phi
    left = cx - (cy - b) / tan_phi
    return left, right


def shadow_length(pendulum_angle, light_angle) -> np.ndarray:
    left, right = shadow_endpoints(pendulum_angle, light_angle)
    return right - left


def shadow_position(pendulum_angle, light_angle) -> np.ndarray:
    left, right = shadow_endpoints(pendulum_angle, light_angle)
    return (right + left) / 2


def pendulum_scm() -> SimulatorScm:
    a = np.zeros((4, 4))
    a[0, 2] = a[0, 3] = a[1, 2] = a[1, 3] = 1.0
    graph = validate_graph(a, names=PENDULUM_NAMES)
    mechanisms = {
        2: lambda x: shadow_length(x[..., 0], x[..., 1]),
        3: lambda x: shadow_position(x[..., 0], x[..., 1]),
    }
    noise = [
        Noise.uniform(*spec.PENDULUM_ANGLE_RANGE),
        Noise.uniform(*spec.LIGHT_ANGLE_RANGE),
        Noise.constant(),
        Noise.constant(),
    ]
    return SimulatorScm(graph, mechanisms, noise, y_index=0)


def gen_pendulum_latent(
    n: int,
    noise_fraction: float = spec.PENDULUM_NOISE_FRACTION,
    seed: int = 0,
    noise_magnitude: float = spec.PENDULUM_NOISE_MAGNITUDE,
    n_bins: int = spec.PENDULUM_CLASSES,
) -> Dataset:
    """
    Pendulum latent factors with measurement noise.

    On round(noise_fraction·n) rows the angle used to project the shadows
    is shifted by U(−noise_magnitude, noise_magnitude); the label keeps the
    clean angle. Features (light_angle, shadow_length, shadow_position).
    """
    _check_n(n)
    if not 0.0 <= noise_fraction <= 1.0:
        raise ConfigError(f"noise_fraction must lie in [0, 1], got {noise_fraction}")
    if noise_magnitude < 0:
        raise ConfigError(f"noise_magnitude must be non-negative, got {noise_magnitude}")

    rng = np.random.default_rng(seed)
    scm = pendulum_scm()
    y = rng.uniform(*spec.PENDULUM_ANGLE_RANGE, size=n)
    z1 = rng.uniform(*spec.LIGHT_ANGLE_RANGE, size=n)

    noisy = np.zeros(n, dtype=bool)
    noisy[rng.choice(n, size=int(round(noise_fraction * n)), replace=False)] = True
    rendered = y.copy()
    rendered[noisy] += rng.uniform(-noise_magnitude, noise_magnitude, size=int(noisy.sum()))

    full = np.column_stack([y, z1, shadow_length(rendered, z1), shadow_position(rendered, z1)])
    features = full[:, 1:]
    return Dataset(
        features=features,
        target=y,
        scm=scm,
        column_names=PENDULUM_NAMES[1:],
        seed=seed,
        feature_index=(1, 2, 3),
        generator="pendulum_latent",
        params={"noise_fraction": noise_fraction, "noise_magnitude": noise_magnitude, "n_bins": n_bins},
        exogenous=scm.abduct(full),
        labels=discretize_angle(y, n_bins),
        noisy_rows=noisy,
    )


def discretize_angle(y, n_bins: int = spec.PENDULUM_CLASSES):
    """
    Uniform bins over [0, π/4]: half-open [k·w, (k+1)·w), last bin closed.
    Accepts a scalar or an array.
    """
    if n_bins < 1:
        raise ConfigError(f"n_bins must be positive, got {n_bins}")
    arr = np.asarray(y, dtype=float)
    lo, hi = spec.PENDULUM_ANGLE_RANGE
    if np.any(~np.isfinite(arr)) or np.any(arr < lo) or np.any(arr > hi):
        raise RangeError("pendulum angle outside [0, π/4]")
    idx = np.minimum(np.floor(arr / hi * n_bins), n_bins - 1).astype(int)
    return int(idx) if idx.ndim == 0 else idx


def _check_n(n: int):
    if n < 1:
        raise ConfigError(f"n must be at least 1, got {n}")


def _toy_builder(params):
    return toy_scm(ToyParams(**params)), TOY_FEATURES


def _syn_builder(params):
    scm = syn_measurement_scm()
    return scm, scm.feature_indices


def _pendulum_builder(params):
    return pendulum_scm(), (1, 2, 3)


SCM_BUILDERS: Dict[str, Callable[[Dict[str, Any]], Tuple[StructuralModel, Tuple[int, ...]]]] = {
    "linear_toy": _toy_builder,
    "syn_measurement": _syn_builder,
    "pendulum_latent": _pendulum_builder,
}


def generate(name: str, n: int, seed: int, **params) -> Dataset:
    """Dispatch to a generator by name (used by the harness)."""
    if name == "linear_toy":
        return gen_linear_toy(n, ToyParams(**params), seed)
    if name == "syn_measurement":
        return gen_syn_measurement(n, seed)
    if name == "pendulum_latent":
        return gen_pendulum_latent(n, seed=seed, **params)
    raise ConfigError(f"unknown dataset '{name}'. Available: {', '.join(SCM_BUILDERS)}")
