"""
cade Report — summary tables from a finished run directory.

The summary is rebuilt from the per-example CSVs every time, so each
number in summary.md can be traced back to rows on disk. Cells read
"mean±std" across seeds ("mean" alone for a single seed); a trailing *
marks white-box cells, where the examples were crafted on the victim
they are scored on.
"""

import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from .errors import ConfigError, IoError
from .evaluation import AttackReport
from .serialize import fingerprint, read_json
from . import spec

logger = logging.getLogger(__name__)

RECORD_COLUMNS = (
    "seed", "attack", "mode", "epsilon", "substitute", "victim",
    "whitebox", "metric", "value", "clean", "n", "file",
)
GROUP_COLUMNS = ["attack", "mode", "epsilon", "substitute", "victim", "whitebox", "metric"]
MODE_TAG = {"clean": "", "whitebox": "(i)", "random": "(r)", "perturbation": "(p)", "fgsm": "(fgsm)", "pgd": "(pgd)"}
DIGITS = {"asr": 1, "rmse": 3}


def recompute_records(out_dir: str | Path) -> pd.DataFrame:
    """Reload every per-example report listed in records.csv and recompute its aggregates."""
    out = Path(out_dir)
    index_path = out / "records.csv"
    if not index_path.exists():
        raise FileNotFoundError(f"Run records not found: {index_path}")
    # "None" is a substitute name, not a missing value
    index = pd.read_csv(
        index_path,
        float_precision="round_trip",
        dtype={"victim": str, "substitute": str, "attack": str},
        keep_default_na=False,
        na_values=[""],
    )
    rows: List[dict] = []
    cache: Dict[str, AttackReport] = {}
    for entry in index.to_dict("records"):
        rel = entry["file"]
        if rel not in cache:
            cache[rel] = AttackReport.load(out / rel)
        agg = cache[rel].aggregate(entry["victim"])
        rows.append({**entry, "value": agg["value"], "clean": agg["clean"], "n": agg["n"]})
    return pd.DataFrame.from_records(rows, columns=list(RECORD_COLUMNS))


def summarize(records: pd.DataFrame) -> pd.DataFrame:
    """Mean and std (ddof=1) over seeds per (attack, mode, ε, substitute, victim)."""
    if records.empty:
        return pd.DataFrame(columns=GROUP_COLUMNS + ["mean", "std", "seeds", "clean_mean"])
    grouped = records.groupby(GROUP_COLUMNS, sort=False, dropna=False)
    out = grouped.agg(
        mean=("value", "mean"),
        std=("value", lambda v: float(np.std(v, ddof=1)) if len(v) > 1 else float("nan")),
        seeds=("seed", "nunique"),
        clean_mean=("clean", "mean"),
    )
    return out.reset_index()


def format_cell(mean: float, std: float, seeds: int, whitebox: bool, metric: str) -> str:
    digits = DIGITS.get(metric, 3)
    text = f"{mean:.{digits}f}"
    if seeds > 1 and np.isfinite(std):
        text += f"±{std:.{digits}f}"
    return text + ("*" if whitebox else "")


def to_markdown(summary: pd.DataFrame, title: str = "", header: Tuple[str, ...] = ()) -> str:
    """One table per metric; rows are attack cells, columns are victims."""
    lines = [f"# {title}" if title else "# Attack summary", ""]
    lines.extend(header)
    if header:
        lines.append("")
    if summary.empty:
        lines.append("_no results_")
        return "\n".join(lines) + "\n"

    victims = list(dict.fromkeys(summary["victim"]))
    for metric in dict.fromkeys(summary["metric"]):
        part = summary[summary["metric"] == metric]
        name = "ASR (%)" if metric == "asr" else metric.upper()
        lines.append(f"## {name}")
        lines.append("")
        lines.append("| attack | ε | substitute | " + " | ".join(victims) + " |")
        lines.append("|" + "---|" * (3 + len(victims)))
        keys = list(dict.fromkeys(zip(part["attack"], part["mode"], part["epsilon"], part["substitute"])))
        for attack, mode, eps, sub in keys:
            rows = part[(part["attack"] == attack) & (part["mode"] == mode) & (part["epsilon"] == eps) & (part["substitute"] == sub)]
            by_victim = {r["victim"]: r for r in rows.to_dict("records")}
            cells = []
            for v in victims:
                r = by_victim.get(v)
                cells.append("" if r is None else format_cell(r["mean"], r["std"], int(r["seeds"]), bool(r["whitebox"]), metric))
            label = f"{attack}{MODE_TAG.get(mode, '')}"
            eps_text = "" if mode == "clean" else f"{eps:g}"
            sub_text = "" if mode == "clean" else sub
            lines.append(f"| {label} | {eps_text} | {sub_text} | " + " | ".join(cells) + " |")
        lines.append("")
    if (summary["whitebox"]).any():
        lines.append("\\* white-box: crafted on the scored victim.")
    return "\n".join(lines) + "\n"


def write_report(out_dir: str | Path) -> Tuple[Path, Path]:
    """Rebuild summary.csv and summary.md in a run directory."""
    out = Path(out_dir)
    records = recompute_records(out)
    summary = summarize(records)
    title, header = "", ()
    config_path = out / "config.json"
    if config_path.exists():
        try:
            doc = read_json(config_path, "config", version=spec.CONFIG_VERSION)
        except ConfigError as e:
            logger.warning("ignoring config header: %s", e)
        else:
            title = doc.get("name", "")
            header = (
                f"- seeds: {', '.join(str(s) for s in doc.get('seeds', []))}",
                f"- dataset: {doc['dataset']['generator']} (train {doc['dataset']['n_train']}, test {doc['dataset']['n_test']})",
                f"- config fingerprint: `{fingerprint(doc)}`",
                f"- report version: {spec.REPORT_VERSION}",
            )
    csv_path, md_path = out / "summary.csv", out / "summary.md"
    try:
        summary.to_csv(csv_path, index=False)
        md_path.write_text(to_markdown(summary, title, header))
    except OSError as e:
        raise IoError(f"cannot write report to {out}: {e}") from e
    logger.info("report written to %s", md_path)
    return csv_path, md_path
