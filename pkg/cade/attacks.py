"""
cade Attacks — counterfactual interventions and feature-space baselines.

Intervention attacks work on full SCM variable vectors x (features plus
target). They change only the intervened set S, bounded per variable by
a max-norm budget, and then propagate the consequences to every
descendant of S through the SCM:

  - cade_whitebox: gradient ascent on the victim's loss, restricted to S
  - cade_random:   one uniform draw from the budget box, no model access
  - perturb_baseline: the same searches with propagation switched off

FGSM and PGD are the classic feature-space baselines over all features.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .models import BaseModel
from .scm import InterventionMask, StructuralModel
from . import spec

logger = logging.getLogger(__name__)

INTERVENTION_MODES = ("whitebox", "random", "perturbation")


@dataclass(frozen=True)
class AttackConfig:
    """
    One attack setting.

    S names the intervened variables (names or indices; ignored by fgsm/pgd).
    With range_scaled, the budget of variable i is epsilon·range_i;
    otherwise epsilon itself. clip_to_support keeps intervened values
    inside the observed [min, max] of each variable.
    """

    S: Tuple[Union[str, int], ...] = ()
    epsilon: float = spec.DEFAULT_CADE["epsilon"]
    step_size: float = spec.DEFAULT_CADE["step_size"]
    steps: int = spec.DEFAULT_CADE["steps"]
    mode: str = "whitebox"
    seed: int = 0
    range_scaled: bool = False
    clip_to_support: bool = False
    label: str = ""

    def __post_init__(self):
        if self.mode not in spec.ATTACK_MODES:
            raise ConfigError(f"Unknown attack mode '{self.mode}'. Available: {', '.join(spec.ATTACK_MODES)}")
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.mode in ("whitebox", "pgd", "perturbation") and self.steps < 1:
            raise ConfigError(f"iterative modes need steps >= 1, got {self.steps}")
        if self.step_size < 0:
            raise ConfigError(f"step_size must be non-negative, got {self.step_size}")
        object.__setattr__(self, "S", tuple(self.S))

    @property
    def name(self) -> str:
        return self.label or "+".join(str(v) for v in self.S) or self.mode


def intervention_mask(scm: StructuralModel, cfg: AttackConfig) -> InterventionMask:
    """
    Resolve S against the SCM. The target and its ancestors cannot be
    intervened on: changing them changes the ground truth, not the attack.
    """
    try:
        indices = scm.graph.resolve(cfg.S)
    except KeyError as e:
        raise ConfigError(str(e)) from None
    if not indices:
        raise ConfigError("intervention attacks need a non-empty S")
    forbidden = {scm.y_index} | set(scm.graph.ancestors(scm.y_index))
    bad = sorted(set(indices) & forbidden)
    if bad:
        names = ", ".join(scm.names[i] for i in bad)
        raise ConfigError(f"cannot intervene on the target or its ancestors: {names}")
    return InterventionMask.from_indices(scm.d, indices)


def _budget(cfg: AttackConfig, mask: InterventionMask, ranges: Optional[np.ndarray]) -> np.ndarray:
    idx = list(mask.indices)
    if not cfg.range_scaled:
        return np.full(len(idx), cfg.epsilon)
    if ranges is None:
        raise ConfigError("range_scaled budgets need per-variable ranges")
    return cfg.epsilon * np.asarray(ranges, dtype=float)[idx]


def _as_batch(x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :].copy(), True
    return x.copy(), False


def _apply(
    scm: StructuralModel,
    x: np.ndarray,
    x_prime: np.ndarray,
    u: np.ndarray,
    mask: InterventionMask,
    propagate: bool,
) -> np.ndarray:
    if propagate:
        return scm.propagate(x, x_prime, u, mask)
    return x_prime.copy()


def _clip_support(values: np.ndarray, idx: List[int], support) -> np.ndarray:
    if support is None:
        return values
    lo, hi = support
    return np.clip(values, np.asarray(lo)[idx], np.asarray(hi)[idx])


def _gradient_search(
    model: BaseModel,
    scm: StructuralModel,
    x,
    y,
    cfg: AttackConfig,
    propagate: bool,
    feature_index: Optional[Sequence[int]],
    ranges: Optional[np.ndarray],
    support,
    trace: Optional[List[float]],
) -> np.ndarray:
    mask = intervention_mask(scm, cfg)
    x, single = _as_batch(x)
    y = np.atleast_1d(np.asarray(y))
    fi = list(scm.feature_indices if feature_index is None else feature_index)
    idx = list(mask.indices)
    missing = [i for i in idx if i not in fi]
    if missing:
        raise ConfigError(f"intervened variables are not model inputs: {[scm.names[i] for i in missing]}")
    cols = [fi.index(i) for i in idx]
    eps = _budget(cfg, mask, ranges)
    clip_support = support if cfg.clip_to_support else None

    u = scm.abduct(x)
    x_prime = x.copy()
    x_adv = x.copy()
    for _ in range(cfg.steps):
        lg = model.loss_and_grads(x_adv[:, fi], y)
        if not np.all(np.isfinite(lg.losses)):
            raise NumericError("attack loss became non-finite")
        if trace is not None:
            trace.append(lg.loss)
        # gradient frozen everywhere but S
        x_prime[:, idx] = x_prime[:, idx] + cfg.step_size * lg.input_grad[:, cols]
        delta = np.clip(x_prime[:, idx] - x[:, idx], -eps, eps)
        x_prime[:, idx] = _clip_support(x[:, idx] + delta, idx, clip_support)
        x_adv = _apply(scm, x, x_prime, u, mask, propagate)
        x_prime = x_adv.copy()
    if trace is not None:
        trace.append(model.loss(x_adv[:, fi], y))
    return x_adv[0] if single else x_adv


def _random_search(
    scm: StructuralModel,
    x,
    cfg: AttackConfig,
    propagate: bool,
    ranges: Optional[np.ndarray],
    support,
    rng: Optional[np.random.Generator],
) -> np.ndarray:
    mask = intervention_mask(scm, cfg)
    x, single = _as_batch(x)
    idx = list(mask.indices)
    eps = _budget(cfg, mask, ranges)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    delta = rng.uniform(-1.0, 1.0, size=(x.shape[0], len(idx))) * eps
    x_prime = x.copy()
    x_prime[:, idx] = _clip_support(x[:, idx] + delta, idx, support if cfg.clip_to_support else None)
    x_adv = _apply(scm, x, x_prime, scm.abduct(x), mask, propagate)
    return x_adv[0] if single else x_adv


def cade_whitebox(
    model: BaseModel,
    scm: StructuralModel,
    x,
    y,
    cfg: AttackConfig,
    feature_index: Optional[Sequence[int]] = None,
    ranges: Optional[np.ndarray] = None,
    support=None,
    trace: Optional[List[float]] = None,
) -> np.ndarray:
    """
    Gradient-guided counterfactual attack on full variable vectors x.

    Each step ascends the victim loss along the gradient restricted to S,
    clamps x′_S − x_S to the budget, and propagates the consequences with
    depth-many counterfactual sweeps. feature_index maps model inputs to
    SCM variables (defaults to scm.feature_indices). If trace is a list,
    the mean loss before every step and after the last is appended.
    """
    if cfg.mode != "whitebox":
        raise ConfigError(f"cade_whitebox needs mode 'whitebox', got '{cfg.mode}'; use perturb_baseline for perturbations")
    return _gradient_search(model, scm, x, y, cfg, True, feature_index, ranges, support, trace)


def cade_random(
    scm: StructuralModel,
    x,
    cfg: AttackConfig,
    ranges: Optional[np.ndarray] = None,
    support=None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Query-free attack: δ_S ~ U(−ε_i, ε_i) per variable, then propagation."""
    if cfg.mode != "random":
        raise ConfigError(f"cade_random needs mode 'random', got '{cfg.mode}'; use perturb_baseline for perturbations")
    return _random_search(scm, x, cfg, True, ranges, support, rng)


def perturb_baseline(
    model: Optional[BaseModel],
    scm: StructuralModel,
    x,
    y,
    cfg: AttackConfig,
    feature_index: Optional[Sequence[int]] = None,
    ranges: Optional[np.ndarray] = None,
    support=None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    The intervention searches without consequence propagation: descendants
    of S keep their observed values. With a model the search is the
    white-box one, without a model it is the random one.
    """
    if model is None:
        return _random_search(scm, x, cfg, False, ranges, support, rng)
    return _gradient_search(model, scm, x, y, cfg, False, feature_index, ranges, support, None)


def fgsm(model: BaseModel, x, y, epsilon: float = spec.DEFAULT_PGD["epsilon"]) -> np.ndarray:
    """One signed-gradient step of size epsilon over all features."""
    if epsilon < 0:
        raise ConfigError(f"epsilon must be non-negative, got {epsilon}")
    x, single = _as_batch(x)
    if epsilon == 0:
        return x[0] if single else x
    lg = model.loss_and_grads(x, np.atleast_1d(y))
    if not np.all(np.isfinite(lg.losses)):
        raise NumericError("attack loss became non-finite")
    x_adv = x + epsilon * np.sign(lg.input_grad)
    return x_adv[0] if single else x_adv


def pgd(
    model: BaseModel,
    x,
    y,
    epsilon: float = spec.DEFAULT_PGD["epsilon"],
    step_size: float = spec.DEFAULT_PGD["step_size"],
    steps: int = spec.DEFAULT_PGD["steps"],
) -> np.ndarray:
    """Projected signed-gradient ascent inside the max-norm ball of radius epsilon."""
    if epsilon < 0 or steps < 1:
        raise ConfigError(f"pgd needs epsilon >= 0 and steps >= 1, got ({epsilon}, {steps})")
    x, single = _as_batch(x)
    if epsilon == 0:
        return x[0] if single else x
    y = np.atleast_1d(y)
    delta = np.zeros_like(x)
    for _ in range(steps):
        lg = model.loss_and_grads(x + delta, y)
        if not np.all(np.isfinite(lg.losses)):
            raise NumericError("attack loss became non-finite")
        delta = np.clip(delta + step_size * np.sign(lg.input_grad), -epsilon, epsilon)
    x_adv = x + delta
    return x_adv[0] if single else x_adv


def run_attack(
    cfg: AttackConfig,
    model: Optional[BaseModel],
    scm: StructuralModel,
    x_full,
    y,
    feature_index: Optional[Sequence[int]] = None,
    ranges: Optional[np.ndarray] = None,
    support=None,
) -> np.ndarray:
    """Dispatch on cfg.mode; always returns full variable vectors."""
    fi = list(scm.feature_indices if feature_index is None else feature_index)
    x_full = np.asarray(x_full, dtype=float)
    if x_full.shape[-1] != scm.d:
        raise ShapeError(f"expected full variable vectors of length {scm.d}, got {x_full.shape}")
    if cfg.mode == "random":
        return cade_random(scm, x_full, cfg, ranges, support)
    if cfg.mode == "perturbation":
        return perturb_baseline(model, scm, x_full, y, cfg, fi, ranges, support)
    if model is None:
        raise ConfigError(f"mode '{cfg.mode}' needs a substitute model")
    if cfg.mode == "whitebox":
        return cade_whitebox(model, scm, x_full, y, cfg, fi, ranges, support)
    out = np.array(x_full, dtype=float)
    if cfg.mode == "fgsm":
        out[..., fi] = fgsm(model, out[..., fi], y, cfg.epsilon)
    else:
        out[..., fi] = pgd(model, out[..., fi], y, cfg.epsilon, cfg.step_size, cfg.steps)
    return out
