"""
cade Evaluation — scoring adversarial examples against victims.

An AttackReport is a long per-example table: one row per (victim,
example). Aggregates are always recomputed from those rows, so a saved
report reloads to exactly the same numbers.

Classification: ASR = 100 · #(clean correct ∧ adversarial ≠ y) / #(clean correct)
Regression:     RMSE of adversarial predictions against y (clean RMSE alongside)
"""

import logging
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, IoError, ShapeError
from .models import BaseModel
from .serialize import fingerprint
from . import spec

logger = logging.getLogger(__name__)

META_COLUMNS = ("attack", "substitute", "fingerprint", "task")


class AttackReport:
    """
    Per-example attack outcomes for one attack cell, scored on one or more victims.

    Usage:
        report = evaluate({"mlp": model}, X, X_adv, y, "regression", cfg)
        report.aggregate("mlp")     # {"metric": "rmse", "value": ..., "clean": ..., "n": ...}
        report.save("out/C1-i.csv")
    """

    def __init__(self, frame: pd.DataFrame):
        missing = [c for c in (*META_COLUMNS, "victim", "example", "y", "clean_pred", "adv_pred") if c not in frame.columns]
        if missing:
            raise ShapeError(f"report frame lacks columns {missing}")
        self.frame = frame.reset_index(drop=True)

    @property
    def task(self) -> str:
        return str(self.frame["task"].iloc[0])

    @property
    def attack(self) -> str:
        return str(self.frame["attack"].iloc[0])

    @property
    def substitute(self) -> str:
        return str(self.frame["substitute"].iloc[0])

    @property
    def config_fingerprint(self) -> str:
        return str(self.frame["fingerprint"].iloc[0])

    @property
    def victims(self) -> list:
        return list(dict.fromkeys(self.frame["victim"]))

    def aggregate(self, victim: str) -> Dict[str, Any]:
        rows = self.frame[self.frame["victim"] == victim]
        if rows.empty:
            raise ConfigError(f"no rows for victim '{victim}'. Available: {', '.join(self.victims)}")
        if self.task == "classification":
            correct = rows["clean_correct"].to_numpy(dtype=bool)
            success = rows["success"].to_numpy(dtype=bool)
            n_correct = int(correct.sum())
            asr = 100.0 * int((correct & success).sum()) / n_correct if n_correct else 0.0
            return {"metric": "asr", "value": asr, "clean": 100.0 * n_correct / len(rows), "n": len(rows)}
        return {
            "metric": "rmse",
            "value": float(np.sqrt(rows["sq_err"].mean())),
            "clean": float(np.sqrt(rows["clean_sq_err"].mean())),
            "n": len(rows),
        }

    def summary(self) -> pd.DataFrame:
        """One row per victim; white-box marks substitute == victim."""
        records = []
        for victim in self.victims:
            agg = self.aggregate(victim)
            records.append({
                "attack": self.attack,
                "substitute": self.substitute,
                "victim": victim,
                "whitebox": victim == self.substitute,
                **agg,
            })
        return pd.DataFrame.from_records(records)

    def save(self, filepath: str | Path):
        target = Path(filepath)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            self.frame.to_csv(target, index=False)
        except OSError as e:
            raise IoError(f"cannot write report to {target}: {e}") from e

    @classmethod
    def load(cls, filepath: str | Path) -> "AttackReport":
        source = Path(filepath)
        if not source.exists():
            raise FileNotFoundError(f"Report not found: {source}")
        frame = pd.read_csv(
            source,
            float_precision="round_trip",
            dtype={"victim": str, "substitute": str, "fingerprint": str},
            keep_default_na=False,
            na_values=[""],
        )
        return cls(frame)

    def __repr__(self) -> str:
        return f"AttackReport({self.attack}, substitute={self.substitute}, victims={self.victims})"


def config_fingerprint(config: Any) -> str:
    if config is None:
        return fingerprint({})
    if is_dataclass(config):
        config = asdict(config)
    return fingerprint(config)


def evaluate(
    models: Mapping[str, BaseModel],
    x,
    x_adv,
    y,
    task: str,
    config: Any = None,
    substitute: Optional[str] = None,
    attack: str = "",
    feature_names: Optional[Sequence[str]] = None,
) -> AttackReport:
    """
    Score the same adversarial examples against every model in `models`.

    x and x_adv are model inputs (n, p); y holds labels (classification)
    or targets (regression). Transfer evaluation is simply passing more
    than one model; `substitute` names the model the examples were
    crafted on ("None" for model-free attacks).
    """
    if task not in ("regression", "classification"):
        raise ConfigError(f"unknown task '{task}'")
    if not models:
        raise ConfigError("evaluate needs at least one model")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    x_adv = np.atleast_2d(np.asarray(x_adv, dtype=float))
    y = np.atleast_1d(np.asarray(y))
    if x.shape != x_adv.shape or y.shape != (x.shape[0],):
        raise ShapeError(f"misaligned inputs: x {x.shape}, x_adv {x_adv.shape}, y {y.shape}")
    names = list(feature_names) if feature_names is not None else [f"f{k}" for k in range(x.shape[1])]
    if len(names) != x.shape[1]:
        raise ShapeError(f"{len(names)} feature names for {x.shape[1]} columns")

    sub = spec.SUBSTITUTE_NONE if substitute is None else substitute
    fp = config_fingerprint(config)
    label = attack or getattr(config, "name", "") or "attack"
    n = x.shape[0]
    frames = []
    for victim, model in models.items():
        clean = model.predict(x)
        adv = model.predict(x_adv)
        cols: Dict[str, Any] = {
            "attack": label,
            "substitute": sub,
            "fingerprint": fp,
            "task": task,
            "victim": victim,
            "example": np.arange(n),
            "y": y,
            "clean_pred": clean,
            "adv_pred": adv,
        }
        if task == "classification":
            cols["clean_correct"] = clean == y
            cols["success"] = (clean == y) & (adv != y)
        else:
            cols["clean_sq_err"] = (clean - y) ** 2
            cols["sq_err"] = (adv - y) ** 2
        for k, name in enumerate(names):
            cols[f"x_{name}"] = x[:, k]
            cols[f"adv_{name}"] = x_adv[:, k]
        frames.append(pd.DataFrame(cols))

    report = AttackReport(pd.concat(frames, ignore_index=True))
    for victim in report.victims:
        agg = report.aggregate(victim)
        logger.info("%s on %s (substitute %s): %s=%.4f clean=%.4f", label, victim, sub, agg["metric"], agg["value"], agg["clean"])
    return report
