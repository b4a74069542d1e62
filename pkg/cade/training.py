"""
cade Training — fitting victims.

  - closed_form_toy_weights: population ERM weights of the linear toy
  - fit_linear_erm: least squares through an SVD solve
  - train: deterministic minibatch gradient descent
  - adversarial_train: the same loop on PGD-perturbed minibatches
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .datasets import Dataset, ToyParams
from .errors import ConfigError, DivergenceError, ShapeError, SingularError
from .models import BaseModel, LinearModel, MlpModel
from . import spec

logger = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adam")
SCHEDULES = ("constant", "cosine")


@dataclass(frozen=True)
class AdversarialConfig:
    """PGD settings for adversarial training (max-norm ball in feature space)."""

    epsilon: float = spec.DEFAULT_DEFENSE["epsilon"]
    steps: int = spec.DEFAULT_DEFENSE["steps"]
    step_size: float = spec.DEFAULT_DEFENSE["step_size"]

    def __post_init__(self):
        if self.epsilon < 0 or self.steps < 1 or self.step_size <= 0:
            raise ConfigError(f"invalid adversarial config {self}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = spec.DEFAULT_TRAIN["epochs"]
    batch_size: int = spec.DEFAULT_TRAIN["batch_size"]
    learning_rate: float = spec.DEFAULT_TRAIN["learning_rate"]
    seed: int = 0
    task: str = "regression"
    optimizer: str = spec.DEFAULT_TRAIN["optimizer"]
    validation_fraction: float = spec.DEFAULT_TRAIN["validation_fraction"]
    schedule: str = spec.DEFAULT_TRAIN["schedule"]
    standardize: bool = True
    adversarial: Optional[AdversarialConfig] = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ConfigError("epochs must be >= 0, batch_size >= 1 and learning_rate > 0")
        if self.task not in ("regression", "classification"):
            raise ConfigError(f"unknown task '{self.task}'")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"Unknown optimizer '{self.optimizer}'. Available: {', '.join(OPTIMIZERS)}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"Unknown schedule '{self.schedule}'. Available: {', '.join(SCHEDULES)}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError(f"validation_fraction must lie in [0, 1), got {self.validation_fraction}")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of a victim: kind 'linear' or 'mlp' with hidden sizes."""

    kind: str = "mlp"
    hidden: Tuple[int, ...] = spec.MLP_HIDDEN
    activation: str = "relu"
    n_outputs: int = 1

    def build(self, n_inputs: int, task: str, rng: np.random.Generator) -> BaseModel:
        if self.kind == "linear":
            bound = 1.0 / np.sqrt(n_inputs)
            return LinearModel(rng.uniform(-bound, bound, size=n_inputs), float(rng.uniform(-bound, bound)))
        if self.kind == "mlp":
            sizes = [n_inputs, *self.hidden, self.n_outputs]
            return MlpModel.init(sizes, rng, task=task, activation=self.activation)
        raise ConfigError(f"Unknown model kind '{self.kind}'")


@dataclass
class TrainResult:
    model: BaseModel
    train_loss: float
    val_loss: float
    history: List[float] = field(default_factory=list)


# ─── closed forms ───────────────────────────────────────────────

def closed_form_toy_weights(params: ToyParams) -> np.ndarray:
    """[σ₂²a, σ_y²c, −σ_y²bc] / (σ₂² + σ_y²c²), in feature order (x1, x2, x3)."""
    s2 = params.sigma_2 ** 2
    sy = params.sigma_y ** 2
    denom = s2 + sy * params.c ** 2
    return np.array([s2 * params.a, sy * params.c, -sy * params.b * params.c]) / denom


def fit_linear_erm(data: Union[Dataset, Tuple[np.ndarray, np.ndarray]], fit_intercept: bool = False) -> LinearModel:
    """
    Least-squares weights w minimizing ‖Xw − y‖², solved by SVD (no inverse).

    Raises SingularError when X (with the intercept column, if any) is
    rank deficient. The condition number is logged and kept in model.info.
    """
    if isinstance(data, Dataset):
        X, y = data.features, data.target
    else:
        X, y = (np.asarray(a, dtype=float) for a in data)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError(f"features {X.shape} and target {y.shape} disagree")
    design = np.column_stack([X, np.ones(X.shape[0])]) if fit_intercept else X
    n, p = design.shape
    rank = np.linalg.matrix_rank(design)
    if n < p or rank < p:
        raise SingularError(f"design matrix has rank {rank} < {p} columns (n={n})")
    cond = float(np.linalg.cond(design))
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    logger.info("fit_linear_erm n=%d p=%d cond=%.3e", n, p, cond)
    if fit_intercept:
        return LinearModel(coef[:-1], float(coef[-1]), info={"condition_number": cond})
    return LinearModel(coef, 0.0, info={"condition_number": cond})


# ─── gradient training ──────────────────────────────────────────

class _Adam:
    def __init__(self, params: Sequence[np.ndarray], lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]):
        self.t += 1
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            m_hat = self.m[k] / (1 - self.b1 ** self.t)
            v_hat = self.v[k] / (1 - self.b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def learning_rate_at(cfg: TrainConfig, epoch: int) -> float:
    """Per-epoch rate: constant, or cosine-annealed from cfg.learning_rate towards 0."""
    if cfg.schedule == "constant" or cfg.epochs == 0:
        return cfg.learning_rate
    return float(0.5 * cfg.learning_rate * (1.0 + np.cos(np.pi * epoch / cfg.epochs)))


def train(
    model_spec: Union[ModelSpec, BaseModel],
    data: Dataset,
    cfg: TrainConfig,
) -> TrainResult:
    """
    Minibatch gradient descent on squared error or softmax cross-entropy.

    The generator seeded with cfg.seed drives initialization, the
    validation split, and the per-epoch shuffles, so identical inputs give
    bit-identical parameters. With cfg.adversarial set, every minibatch is
    replaced by its PGD counterpart before the gradient step.
    """
    X = data.features
    y = data.response()
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {y.shape[0]} targets")

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(X.shape[0])
    n_val = int(round(cfg.validation_fraction * X.shape[0]))
    val_rows, train_rows = order[:n_val], order[n_val:]
    X_tr, y_tr = X[train_rows], y[train_rows]
    X_val, y_val = X[val_rows], y[val_rows]

    if isinstance(model_spec, BaseModel):
        model = model_spec
    else:
        model = model_spec.build(X.shape[1], cfg.task, rng)
        if cfg.standardize:
            scale = X_tr.std(axis=0)
            model = model.with_standardization(X_tr.mean(axis=0), np.where(scale > 0, scale, 1.0))
    if model.task != cfg.task:
        raise ConfigError(f"model task '{model.task}' does not match config task '{cfg.task}'")

    params = [p.copy() for p in model.parameters()]
    adam = _Adam(params, cfg.learning_rate) if cfg.optimizer == "adam" else None
    history: List[float] = []

    if cfg.adversarial is not None:
        from .attacks import pgd

    for epoch in range(cfg.epochs):
        lr = learning_rate_at(cfg, epoch)
        if adam is not None:
            adam.lr = lr
        perm = rng.permutation(X_tr.shape[0])
        total = 0.0
        for start in range(0, perm.size, cfg.batch_size):
            rows = perm[start:start + cfg.batch_size]
            xb, yb = X_tr[rows], y_tr[rows]
            current = model.with_parameters(params)
            if cfg.adversarial is not None and cfg.adversarial.epsilon > 0:
                adv = cfg.adversarial
                xb = pgd(current, xb, yb, adv.epsilon, adv.step_size, adv.steps)
            lg = current.loss_and_grads(xb, yb)
            if not np.isfinite(lg.loss):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}", epoch=epoch)
            if adam is not None:
                adam.step(params, lg.param_grads)
            else:
                for p, g in zip(params, lg.param_grads):
                    p -= lr * g
            if not all(np.all(np.isfinite(p)) for p in params):
                raise DivergenceError(f"parameters became non-finite at epoch {epoch}", epoch=epoch)
            total += lg.loss * rows.size
        history.append(total / max(1, perm.size))
        logger.debug("epoch %d loss %.6f", epoch, history[-1])

    trained = model.with_parameters(params) if cfg.epochs else model
    train_loss = trained.loss(X_tr, y_tr)
    val_loss = trained.loss(X_val, y_val) if n_val else float("nan")
    if not np.isfinite(train_loss):
        raise DivergenceError("final training loss is non-finite", epoch=cfg.epochs)
    logger.info("trained %r: train_loss=%.4f val_loss=%.4f", trained, train_loss, val_loss)
    return TrainResult(trained, train_loss, val_loss, history)


def adversarial_train(
    model_spec: Union[ModelSpec, BaseModel],
    data: Dataset,
    cfg: TrainConfig,
) -> TrainResult:
    """train() with PGD minibatches; defaults to the measurement defense (ε=0.03, 10 steps)."""
    if cfg.adversarial is None:
        cfg = replace(cfg, adversarial=AdversarialConfig())
    return train(model_spec, data, cfg)
