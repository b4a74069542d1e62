"""Tests for experiment runs, run artifacts and summary reports."""

import json
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from cade import spec
from cade.config import AttackGridSpec, DatasetSpec, ExperimentConfig, VictimSpec, load_config
from cade.errors import ExperimentError
from cade.harness import attack_cells, budget_sweep, child_seed, run
from cade.report import format_cell, recompute_records, summarize, write_report


def _config(**overrides) -> ExperimentConfig:
    base = dict(
        name="toy-test",
        dataset=DatasetSpec("linear_toy", n_train=500, n_test=100),
        victims=(
            VictimSpec("Linear", kind="linear", fit="erm"),
            VictimSpec("MLP", hidden=(8,), epochs=3),
        ),
        attacks=(
            AttackGridSpec("x3", S=("x3",), modes=("whitebox", "perturbation"), epsilons=(0.1,), steps=5, step_size=0.05),
            AttackGridSpec("x2", S=("x2",), modes=("random",), epsilons=(0.5,)),
        ),
        seeds=(0,),
        n_attack=40,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def _cell_files(out: Path):
    return sorted(p.relative_to(out) for p in out.glob("seed-*/*.csv"))


def test_child_seeds_are_stable_and_distinct():
    """Derived seeds depend only on their keys."""
    assert child_seed(0, 2, 1) == child_seed(0, 2, 1)
    assert len({child_seed(0, 2, k) for k in range(50)}) == 50
    assert child_seed(0, 1) != child_seed(1, 1)


def test_attack_cells_expand_the_grid():
    """Whitebox and perturbation run per substitute; random runs once with 'None'."""
    names = [c.name for c in attack_cells(_config())]
    assert names == [
        "x3-i-eps0.1-Linear", "x3-i-eps0.1-MLP",
        "x3-p-eps0.1-Linear", "x3-p-eps0.1-MLP",
        "x2-r-eps0.5-None",
    ]


def test_run_writes_artifacts():
    """A run writes per-example CSVs, records, train metrics, summaries and a run log."""
    with tempfile.TemporaryDirectory() as tmpdir:
        out = Path(tmpdir)
        bundle = run(_config(), out)
        for name in ("config.json", "records.csv", "train_metrics.csv", "summary.csv", "summary.md", "run_log.jsonl"):
            assert (out / name).exists()
        assert len(_cell_files(out)) == 6
        records = bundle.records
        assert set(records["victim"]) == {"Linear", "MLP"}
        assert len(records) == 2 * 6
        events = [json.loads(line)["event"] for line in (out / "run_log.jsonl").read_text().splitlines()]
        assert events[0] == "run_start" and events[-1] == "run_end"
        assert events.count("cell") == 5


def test_rerun_starts_a_fresh_run_log():
    """Running twice into one directory leaves only the second run's log."""
    config = _config(attacks=())
    with tempfile.TemporaryDirectory() as tmpdir:
        run(config, tmpdir)
        run(config, tmpdir)
        events = [json.loads(line)["event"] for line in (Path(tmpdir) / "run_log.jsonl").read_text().splitlines()]
    assert events.count("run_start") == 1
    assert events.count("run_end") == 1


def test_run_is_deterministic_across_workers():
    """Same config and seeds give byte-identical per-example outputs, threaded or not."""
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        run(_config(seeds=(0, 1)), a)
        run(_config(seeds=(0, 1), workers=3), b)
        files = _cell_files(Path(a))
        assert files == _cell_files(Path(b))
        for rel in files + [Path("records.csv"), Path("summary.csv")]:
            assert (Path(a) / rel).read_bytes() == (Path(b) / rel).read_bytes()


def test_empty_attack_grid_reports_clean_scores():
    """With no attacks only the clean rows are written."""
    with tempfile.TemporaryDirectory() as tmpdir:
        bundle = run(_config(attacks=()), tmpdir)
        assert set(bundle.records["mode"]) == {"clean"}
        assert (Path(tmpdir) / "summary.md").exists()


def test_single_seed_report_has_no_spread():
    """One seed prints no ±; white-box cells carry an asterisk."""
    with tempfile.TemporaryDirectory() as tmpdir:
        run(_config(), tmpdir)
        text = (Path(tmpdir) / "summary.md").read_text()
    assert "±" not in text
    assert "*" in text
    assert "config fingerprint" in text
    assert "report version: 1.0" in text


def _table_rows(text: str, label: str):
    return [line for line in text.splitlines() if line.startswith(f"| {label} |")]


def test_report_fills_clean_and_model_free_rows():
    """Clean rows and random rows crafted without a substitute carry numbers for every victim."""
    with tempfile.TemporaryDirectory() as tmpdir:
        run(_config(), tmpdir)
        text = (Path(tmpdir) / "summary.md").read_text()
        summary = pd.read_csv(Path(tmpdir) / "summary.csv", keep_default_na=False, na_values=[""])
    clean_rows, random_rows = _table_rows(text, "clean"), _table_rows(text, "x2(r)")
    assert clean_rows and random_rows
    for line in clean_rows + random_rows:
        cells = [c.strip() for c in line.strip("|").split("|")][3:]
        assert len(cells) == 2
        assert all(c and float(c.rstrip("*")) >= 0 for c in cells)
    assert random_rows[0].startswith("| x2(r) | 0.5 | None |")
    assert set(summary.loc[summary["mode"] == "random", "substitute"]) == {"None"}


def test_multi_seed_report_has_spread():
    """Several seeds print mean ± std."""
    with tempfile.TemporaryDirectory() as tmpdir:
        run(_config(seeds=(0, 1)), tmpdir)
        text = (Path(tmpdir) / "summary.md").read_text()
    assert "±" in text


def test_report_recomputes_from_per_example_files():
    """Aggregates rebuilt from the CSVs match what the run recorded."""
    with tempfile.TemporaryDirectory() as tmpdir:
        bundle = run(_config(), tmpdir)
        again = recompute_records(tmpdir)
        assert np.allclose(again["value"].to_numpy(), bundle.records["value"].to_numpy(), rtol=0, atol=1e-12)
        (Path(tmpdir) / "summary.md").unlink()
        write_report(tmpdir)
        assert (Path(tmpdir) / "summary.md").exists()


def test_summarize_uses_sample_std():
    """std over seeds uses ddof=1; one seed gives NaN."""
    records = pd.DataFrame({
        "seed": [0, 1, 2], "attack": "C1", "mode": "whitebox", "epsilon": 0.1, "substitute": "MLP",
        "victim": "MLP", "whitebox": True, "metric": "rmse", "value": [1.0, 2.0, 3.0], "clean": 1.0, "n": 10, "file": "x",
    })
    summary = summarize(records)
    assert summary.loc[0, "mean"] == pytest.approx(2.0)
    assert summary.loc[0, "std"] == pytest.approx(1.0)
    assert np.isnan(summarize(records.iloc[:1]).loc[0, "std"])
    assert format_cell(2.0, 1.0, 3, True, "rmse") == "2.000±1.000*"
    assert format_cell(12.34, float("nan"), 1, False, "asr") == "12.3"


def test_budget_sweep_writes_plot_table():
    """The sweep overrides every grid's budgets and writes sweep.csv."""
    config = _config(attacks=(AttackGridSpec("x2", S=("x2",), modes=("random",), epsilons=(0.5,)),))
    with tempfile.TemporaryDirectory() as tmpdir:
        sweep = budget_sweep(config, epsilons=[0.1, 0.5, 1.0], out_dir=tmpdir)
        assert (Path(tmpdir) / "sweep.csv").exists()
    assert sorted(set(sweep["epsilon"])) == [0.1, 0.5, 1.0]
    assert set(sweep["mode"]) == {"random"}


def test_failing_cell_names_itself():
    """A module error inside a cell surfaces as ExperimentError with the cell name."""
    config = _config(attacks=(AttackGridSpec("x1", S=("x1",), modes=("random",), epsilons=(0.1,)),))
    with tempfile.TemporaryDirectory() as tmpdir:
        with pytest.raises(ExperimentError) as info:
            run(config, tmpdir)
    assert info.value.cell == "seed-0/x1-r-eps0.1-None"
    assert info.value.context()["cause"] == "ConfigError"


def test_diverging_victim_names_itself():
    """Training failures name the victim."""
    config = _config(victims=(VictimSpec("Bad", kind="linear", learning_rate=1e6, epochs=20),), attacks=())
    with tempfile.TemporaryDirectory() as tmpdir:
        with pytest.raises(ExperimentError) as info:
            run(config, tmpdir)
    assert info.value.cell == "seed-0/train:Bad"


def _means(summary: pd.DataFrame, mode: str, attack: str) -> pd.DataFrame:
    rows = summary[(summary["mode"] == mode) & (summary["attack"] == attack) & (summary["substitute"] == summary["victim"])]
    return rows.sort_values("epsilon", kind="mergesort")


def test_child_budget_never_lowers_rmse_over_seeds():
    """Mean C1(i) RMSE over five seeds does not drop as ε grows."""
    config = ExperimentConfig(
        name="budget",
        dataset=DatasetSpec("syn_measurement", n_train=4000, n_test=300),
        victims=(VictimSpec("MLP"),),
        attacks=(AttackGridSpec("C1", S=("C1",), epsilons=spec.MEASUREMENT_EPSILONS),),
        seeds=(0, 1, 2, 3, 4),
        n_attack=300,
    )
    with tempfile.TemporaryDirectory() as tmpdir:
        summary = summarize(run(config, tmpdir).records)
    means = _means(summary, "whitebox", "C1")["mean"].to_numpy()
    assert len(means) == len(spec.MEASUREMENT_EPSILONS)
    assert np.all(np.diff(means) >= -0.02)


@pytest.mark.slow
def test_measurement_preset_orders_interventions():
    """
    On the bundled measurement preset, for every victim and budget:
    CP(i) stays within 5% of clean RMSE, C1(i) and C1+C2(i) exceed it from
    ε = 0.05 on, interventions beat their perturbations, and child RMSE
    grows with ε.
    """
    config = replace(load_config("synmeasurement-fig6"), n_attack=300)
    with tempfile.TemporaryDirectory() as tmpdir:
        summary = summarize(run(config, tmpdir).records)
    clean = summary[summary["mode"] == "clean"].set_index("victim")["mean"]
    assert set(clean.index) == {"Linear", "MLP", "Linear(D)", "MLP(D)"}

    coparent = _means(summary, "whitebox", "CP")
    assert len(coparent) == 4 * len(spec.MEASUREMENT_EPSILONS)
    for row in coparent.to_dict("records"):
        assert abs(row["mean"] - clean[row["victim"]]) <= 0.05 * clean[row["victim"]], row

    for attack in ("C1", "C1+C2"):
        inter = _means(summary, "whitebox", attack)
        pert = _means(summary, "perturbation", attack).set_index(["victim", "epsilon"])["mean"]
        for row in inter.to_dict("records"):
            if row["epsilon"] >= 0.05:
                assert row["mean"] > clean[row["victim"]], row
            assert row["mean"] >= pert[(row["victim"], row["epsilon"])] - 1e-9, row
        for _, part in inter.groupby("victim"):
            assert np.all(np.diff(part["mean"].to_numpy()) >= -0.02), attack


@pytest.mark.slow
def test_pendulum_preset_ignores_light_but_not_shadows():
    """
    The bundled pendulum classifier reaches 95% clean accuracy; light
    interventions, carried to the shadows by the simulator, flip at most 5%
    of its labels, while direct shadow interventions flip most of them.
    """
    config = load_config("pendulum-sim")
    config = replace(
        config,
        victims=config.victims[:1],
        attacks=tuple(g for g in config.attacks if g.modes == ("random",) and g.label in ("light_angle", "shadows", "all")),
        seeds=(0,),
    )
    with tempfile.TemporaryDirectory() as tmpdir:
        records = run(config, tmpdir).records
    assert records.loc[records["mode"] == "clean", "clean"].iloc[0] >= 95.0
    asr = records[records["mode"] == "random"].set_index(["attack", "epsilon"])["value"]
    assert all(asr[("light_angle", eps)] <= 5.0 for eps in (0.1, 0.2, 0.3, 0.5))
    for label in ("shadows", "all"):
        assert asr[(label, 0.3)] >= 50.0
        grid = [asr[(label, eps)] for eps in (0.1, 0.3, 0.5)]
        assert all(b >= a - 1.0 for a, b in zip(grid, grid[1:])), label
