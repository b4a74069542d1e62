"""
cade Harness — experiment orchestration.

run() walks one ExperimentConfig end to end:

    for each seed:
        generate train/test data
        train every victim (standard and defended)
        score clean test examples
        run every attack cell and score it on every victim (transfer matrix)
    write records.csv, summary.csv and summary.md

Each cell draws from its own generator, derived from (seed, cell index),
so running cells concurrently never changes a result. A RunLog writes
one JSON line per completed step to <out>/run_log.jsonl.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .attacks import AttackConfig, run_attack
from .config import AttackGridSpec, ExperimentConfig, VictimSpec, cell_name
from .datasets import Dataset, generate
from .errors import CadeError, ExperimentError, IoError
from .evaluation import AttackReport, evaluate
from .models import BaseModel
from .report import RECORD_COLUMNS, write_report
from .training import fit_linear_erm, train
from . import spec

logger = logging.getLogger(__name__)

TRAIN_STREAM = 1
CELL_STREAM = 2
TEST_STREAM = 3


def child_seed(master: int, *keys: int) -> int:
    """A 32-bit seed derived from (master, keys...) through numpy's SeedSequence."""
    return int(np.random.SeedSequence([int(master), *[int(k) for k in keys]]).generate_state(1)[0])


class RunLog:
    """
    JSONL record of what one run did and how long it took. Opening a log
    empties the file, so a rerun into the same directory starts clean.
    """

    def __init__(self, log_path: str | Path):
        self.log_path = Path(log_path)
        try:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self.log_path.write_text("")
        except OSError as e:
            raise IoError(f"cannot open run log {self.log_path}: {e}") from e
        self.start = time.monotonic()
        self.entries: List[dict] = []

    def log(self, event: str, cell: str = "", meta: Optional[dict] = None) -> dict:
        entry = {
            "ts": datetime.now(timezone.utc).isoformat(),
            "elapsed_ms": int((time.monotonic() - self.start) * 1000),
            "event": event,
            "cell": cell,
            "meta": meta or {},
        }
        self.entries.append(entry)
        with open(self.log_path, "a") as f:
            f.write(json.dumps(entry) + "\n")
        return entry


@dataclass(frozen=True)
class Cell:
    index: int
    label: str
    S: Tuple[str, ...]
    mode: str
    epsilon: float
    substitute: str
    grid: AttackGridSpec

    @property
    def name(self) -> str:
        return cell_name(self.label, self.mode, self.epsilon, self.substitute)


@dataclass
class RunBundle:
    config: ExperimentConfig
    out_dir: Path
    records: pd.DataFrame
    reports: Dict[str, AttackReport] = field(default_factory=dict)
    train_metrics: pd.DataFrame = field(default_factory=pd.DataFrame)


def attack_cells(config: ExperimentConfig) -> List[Cell]:
    """Expand the attack grid in config order: grid entry × mode × ε × substitute."""
    victims = [v.name for v in config.victims]
    cells: List[Cell] = []
    seen = set()
    for grid in config.attacks:
        for mode in grid.modes:
            if mode == "random":
                subs = [spec.SUBSTITUTE_NONE]
            else:
                subs = list(grid.substitutes) or victims
            for eps in grid.epsilons:
                for sub in subs:
                    cell = Cell(len(cells), grid.label, grid.S, mode, float(eps), sub, grid)
                    if cell.name in seen:
                        continue
                    seen.add(cell.name)
                    cells.append(cell)
    return cells


def prepare_data(config: ExperimentConfig, seed: int) -> Tuple[Dataset, Dataset]:
    ds = config.dataset
    train_data = generate(ds.generator, ds.n_train, seed, **ds.params)
    test_data = generate(ds.generator, ds.n_test, child_seed(seed, TEST_STREAM), **{**ds.params, **ds.test_params})
    return train_data, test_data


def _n_outputs(data: Dataset) -> int:
    if data.task == "regression":
        return 1
    return int(data.params.get("n_bins", int(data.labels.max()) + 1))


def train_victim(victim: VictimSpec, data: Dataset, seed: int) -> Tuple[BaseModel, dict]:
    if victim.fit == "erm":
        model = fit_linear_erm(data, fit_intercept=True)
        loss = model.loss(data.features, data.response())
        return model, {"train_loss": loss, "val_loss": float("nan")}
    result = train(victim.model_spec(_n_outputs(data)), data, victim.train_config(data.task, seed))
    return result.model, {"train_loss": result.train_loss, "val_loss": result.val_loss}


def _run_cell(
    cell: Cell,
    seed: int,
    models: Dict[str, BaseModel],
    examples: Dataset,
    ranges: np.ndarray,
    support,
) -> AttackReport:
    grid = cell.grid
    cfg = AttackConfig(
        S=cell.S,
        epsilon=cell.epsilon,
        step_size=grid.step_size,
        steps=grid.steps,
        mode=cell.mode,
        seed=child_seed(seed, CELL_STREAM, cell.index),
        range_scaled=grid.range_scaled,
        clip_to_support=grid.clip_to_support,
        label=cell.label,
    )
    substitute = models.get(cell.substitute)
    x_full = examples.full()
    y = examples.response()
    x_adv = run_attack(cfg, substitute, examples.scm, x_full, y, examples.feature_index, ranges, support)
    return evaluate(
        models,
        examples.features,
        examples.to_features(x_adv),
        y,
        examples.task,
        config=cfg,
        substitute=cell.substitute,
        attack=cell.name,
        feature_names=examples.column_names,
    )


def _records(report: AttackReport, seed: int, label: str, mode: str, epsilon: float, file: str) -> List[dict]:
    rows = []
    for row in report.summary().to_dict("records"):
        rows.append({
            "seed": seed,
            "attack": label,
            "mode": mode,
            "epsilon": epsilon,
            "substitute": row["substitute"],
            "victim": row["victim"],
            "whitebox": bool(row["whitebox"]),
            "metric": row["metric"],
            "value": row["value"],
            "clean": row["clean"],
            "n": row["n"],
            "file": file,
        })
    return rows


def run(config: ExperimentConfig, out_dir: Optional[str | Path] = None) -> RunBundle:
    """
    Run every seed of an experiment and write its artifacts under out_dir
    (default: config.output). Module errors surface as ExperimentError
    naming the failing cell.
    """
    out = Path(out_dir or config.output)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.json")
    runlog = RunLog(out / "run_log.jsonl")
    runlog.log("run_start", meta={"name": config.name, "seeds": list(config.seeds)})

    cells = attack_cells(config)
    records: List[dict] = []
    reports: Dict[str, AttackReport] = {}
    train_rows: List[dict] = []

    for seed in config.seeds:
        seed_dir = out / f"seed-{seed}"
        try:
            train_data, test_data = prepare_data(config, seed)
        except CadeError as e:
            raise ExperimentError(config.name, f"seed-{seed}/data", e) from e

        models: Dict[str, BaseModel] = {}
        for k, victim in enumerate(config.victims):
            try:
                model, metrics = train_victim(victim, train_data, child_seed(seed, TRAIN_STREAM, k))
            except CadeError as e:
                raise ExperimentError(config.name, f"seed-{seed}/train:{victim.name}", e) from e
            models[victim.name] = model
            train_rows.append({"seed": seed, "victim": victim.name, **metrics})
            runlog.log("trained", f"seed-{seed}/{victim.name}", metrics)

        examples = test_data.subset(np.arange(min(config.n_attack, test_data.n)))
        ranges = train_data.variable_ranges()
        support = train_data.variable_support()

        if models:
            clean = evaluate(
                models, examples.features, examples.features, examples.response(), examples.task,
                attack="clean", feature_names=examples.column_names,
            )
            rel = f"seed-{seed}/clean.csv"
            clean.save(out / rel)
            reports[rel] = clean
            records.extend(_records(clean, seed, "clean", "clean", 0.0, rel))

        def job(cell: Cell) -> AttackReport:
            t0 = time.monotonic()
            try:
                report = _run_cell(cell, seed, models, examples, ranges, support)
            except CadeError as e:
                raise ExperimentError(config.name, f"seed-{seed}/{cell.name}", e) from e
            logger.debug("cell %s took %.2fs", cell.name, time.monotonic() - t0)
            return report

        if config.workers > 1 and len(cells) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(job, cells))
        else:
            results = [job(cell) for cell in cells]

        for cell, report in zip(cells, results):
            rel = f"seed-{seed}/{cell.name}.csv"
            report.save(out / rel)
            reports[rel] = report
            rows = _records(report, seed, cell.label, cell.mode, cell.epsilon, rel)
            records.extend(rows)
            runlog.log("cell", f"seed-{seed}/{cell.name}", {r["victim"]: r["value"] for r in rows})

    frame = pd.DataFrame.from_records(records, columns=list(RECORD_COLUMNS))
    train_metrics = pd.DataFrame.from_records(train_rows, columns=["seed", "victim", "train_loss", "val_loss"])
    try:
        frame.to_csv(out / "records.csv", index=False)
        train_metrics.to_csv(out / "train_metrics.csv", index=False)
    except OSError as e:
        raise IoError(f"cannot write run records to {out}: {e}") from e
    write_report(out)
    runlog.log("run_end", meta={"cells": len(cells) * len(config.seeds)})
    logger.info("run %s finished: %d records in %s", config.name, len(frame), out)
    return RunBundle(config, out, frame, reports, train_metrics)


def budget_sweep(
    config: ExperimentConfig,
    epsilons: Optional[Sequence[float]] = None,
    out_dir: Optional[str | Path] = None,
) -> pd.DataFrame:
    """
    Run the attack grid over a budget list and write a plot-ready
    sweep.csv with one row per (ε, S, mode, seed, substitute, victim).
    """
    if epsilons is not None:
        config = config.with_epsilons(epsilons)
    bundle = run(config, out_dir)
    rows = bundle.records[bundle.records["mode"] != "clean"]
    sweep = rows[["epsilon", "attack", "mode", "seed", "substitute", "victim", "metric", "value", "clean"]]
    sweep = sweep.sort_values(["attack", "mode", "substitute", "victim", "epsilon", "seed"], kind="mergesort")
    sweep = sweep.reset_index(drop=True)
    try:
        sweep.to_csv(bundle.out_dir / "sweep.csv", index=False)
    except OSError as e:
        raise IoError(f"cannot write sweep to {bundle.out_dir}: {e}") from e
    return sweep
