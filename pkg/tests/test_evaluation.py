"""Tests for per-example scoring and report persistence."""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from cade.attacks import AttackConfig
from cade.errors import ConfigError, ShapeError
from cade.evaluation import AttackReport, config_fingerprint, evaluate
from cade.models import LinearModel, MlpModel


def _classifier():
    # predicts argmax of the identity logits
    return MlpModel([np.eye(3)], [np.zeros(3)], task="classification")


def test_asr_counts_only_clean_correct_examples():
    """ASR = 100·#(correct ∧ flipped)/#correct; wrong-on-clean rows do not count."""
    x = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [1.0, 0, 0]])
    x_adv = np.array([[0, 1.0, 0], [0, 1.0, 0], [1.0, 0, 0], [0, 0, 1.0]])
    y = np.array([0, 1, 2, 1])
    report = evaluate({"clf": _classifier()}, x, x_adv, y, "classification", attack="toy")
    agg = report.aggregate("clf")
    assert agg["metric"] == "asr"
    assert agg["value"] == pytest.approx(100.0 * 2 / 3)
    assert agg["clean"] == pytest.approx(75.0)
    assert agg["n"] == 4


def test_asr_is_zero_without_correct_examples():
    """No clean-correct examples gives ASR 0 rather than a division error."""
    x = np.array([[1.0, 0, 0]])
    report = evaluate({"clf": _classifier()}, x, x, [2], "classification")
    assert report.aggregate("clf")["value"] == 0.0


def test_regression_rmse():
    """RMSE of adversarial predictions, clean RMSE alongside."""
    model = LinearModel([1.0, 0.0])
    x = np.array([[1.0, 0.0], [2.0, 0.0]])
    x_adv = x + np.array([[3.0, 0.0], [-4.0, 0.0]])
    report = evaluate({"lin": model}, x, x_adv, [1.0, 2.0], "regression")
    agg = report.aggregate("lin")
    assert agg["metric"] == "rmse"
    assert agg["clean"] == pytest.approx(0.0)
    assert agg["value"] == pytest.approx(np.sqrt((9 + 16) / 2))


def test_transfer_scores_every_victim():
    """Several victims share the same examples; white-box marks substitute == victim."""
    x = np.array([[1.0, 2.0]])
    models = {"a": LinearModel([1.0, 0.0]), "b": LinearModel([0.0, 1.0])}
    cfg = AttackConfig(S=("C1",), epsilon=0.1)
    report = evaluate(models, x, x + 1.0, [1.0], "regression", config=cfg, substitute="a")
    summary = report.summary()
    assert list(summary["victim"]) == ["a", "b"]
    assert list(summary["whitebox"]) == [True, False]
    assert report.attack == "C1"
    assert report.config_fingerprint == config_fingerprint(cfg)


def test_model_free_substitute_label():
    """Attacks without a substitute are recorded as 'None'."""
    report = evaluate({"a": LinearModel([1.0])}, [[0.0]], [[0.1]], [0.0], "regression")
    assert report.substitute == "None"
    assert not report.summary()["whitebox"].any()


def test_model_free_substitute_survives_reload():
    """A saved 'None' substitute reloads as the string, not as a missing value."""
    report = evaluate({"a": LinearModel([1.0])}, [[0.0], [1.0]], [[0.1], [0.9]], [0.0, 1.0], "regression")
    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir) / "x2-r-eps0.5-None.csv"
        report.save(path)
        loaded = AttackReport.load(path)
    assert loaded.substitute == "None"
    assert loaded.summary()["substitute"].tolist() == ["None"]


def test_misaligned_inputs_raise():
    """Shapes must agree across x, x_adv and y."""
    model = LinearModel([1.0, 1.0])
    with pytest.raises(ShapeError):
        evaluate({"m": model}, np.zeros((3, 2)), np.zeros((2, 2)), np.zeros(3), "regression")
    with pytest.raises(ShapeError):
        evaluate({"m": model}, np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(2), "regression")
    with pytest.raises(ConfigError):
        evaluate({}, np.zeros((1, 2)), np.zeros((1, 2)), [0.0], "regression")
    with pytest.raises(ConfigError):
        evaluate({"m": model}, np.zeros((1, 2)), np.zeros((1, 2)), [0.0], "ranking")


def test_unknown_victim_raises():
    """Aggregating a victim that was not scored is a ConfigError."""
    report = evaluate({"a": LinearModel([1.0])}, [[0.0]], [[0.0]], [0.0], "regression")
    with pytest.raises(ConfigError):
        report.aggregate("b")


def test_fingerprint_is_stable():
    """Equal configs share a fingerprint; different configs do not."""
    a = AttackConfig(S=("C1",), epsilon=0.1)
    assert config_fingerprint(a) == config_fingerprint(AttackConfig(S=("C1",), epsilon=0.1))
    assert config_fingerprint(a) != config_fingerprint(AttackConfig(S=("C1",), epsilon=0.2))


def test_report_save_and_load():
    """Saved reports reload to identical aggregates and feature columns."""
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 2))
    report = evaluate(
        {"a": LinearModel([0.3, -0.7]), "b": LinearModel([1.1, 0.2])},
        x, x + rng.normal(scale=0.1, size=x.shape), rng.normal(size=20),
        "regression", substitute="a", attack="C1-i-0.1", feature_names=["C1", "C2"],
    )
    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir) / "cells" / "C1-i-0.1.csv"
        report.save(path)
        loaded = AttackReport.load(path)
    assert "adv_C1" in loaded.frame.columns
    for victim in ("a", "b"):
        assert loaded.aggregate(victim) == report.aggregate(victim)


def test_report_load_missing():
    """Missing report files raise FileNotFoundError."""
    with pytest.raises(FileNotFoundError):
        AttackReport.load("/nonexistent/report.csv")
