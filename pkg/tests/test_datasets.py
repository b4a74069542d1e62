"""Tests for the generating processes and dataset persistence."""

import math
import tempfile
from pathlib import Path

import numpy as np
import pytest

from cade.datasets import (
    Dataset,
    ToyParams,
    discretize_angle,
    gen_linear_toy,
    gen_pendulum_latent,
    gen_syn_measurement,
    generate,
    shadow_length,
    shadow_position,
)
from cade.errors import ConfigError, RangeError
from cade import spec


def test_linear_toy_is_deterministic():
    """Same seed, same rows."""
    a = gen_linear_toy(5, seed=3)
    b = gen_linear_toy(5, seed=3)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.target, b.target)
    assert a.column_names == ("x1", "x2", "x3")


def test_linear_toy_covariance():
    """Cov(x1, y) ≈ a·σ₁² = 1."""
    data = gen_linear_toy(200_000, seed=0)
    cov = np.cov(data.features[:, 0], data.target)[0, 1]
    assert abs(cov - 1.0) < 0.02


def test_toy_params_require_positive_sigmas():
    """Zero variance is rejected."""
    with pytest.raises(ConfigError):
        ToyParams(sigma_2=0.0)


def test_full_rows_match_scm():
    """Full variable vectors abduct back to the drawn exogenous terms."""
    data = gen_linear_toy(50, seed=1)
    assert np.allclose(data.scm.abduct(data.full()), data.exogenous)


def test_syn_measurement_variance_and_coefficient():
    """Var(y) ≈ 7 and C1 regressed on (CP, y) gives ≈ (1, 4)."""
    data = gen_syn_measurement(100_000, seed=0)
    assert abs(data.target.var() / 7.0 - 1.0) < 0.03
    df = data.to_frame()
    design = np.column_stack([df["CP"], df["y"]])
    coef, *_ = np.linalg.lstsq(design, df["C1"].to_numpy(), rcond=None)
    assert np.allclose(coef, [1.0, 4.0], atol=0.02)


def test_syn_measurement_is_deterministic():
    """Same seed, same rows; different seed, different rows."""
    assert np.array_equal(gen_syn_measurement(20, seed=4).features, gen_syn_measurement(20, seed=4).features)
    assert not np.array_equal(gen_syn_measurement(20, seed=4).features, gen_syn_measurement(20, seed=5).features)


def test_shadow_length_at_rest():
    """Pendulum at rest under a 45° light casts a shadow of length l_p."""
    assert shadow_length(0.0, math.pi / 4) == pytest.approx(spec.PENDULUM_LENGTH)


def test_pendulum_noiseless_rows_follow_projection():
    """With noise_fraction 0 every row satisfies the projection law exactly."""
    data = gen_pendulum_latent(500, noise_fraction=0.0, seed=2)
    y, z1, z2, z3 = data.full().T
    assert np.array_equal(z2, shadow_length(y, z1))
    assert np.array_equal(z3, shadow_position(y, z1))
    assert not data.noisy_rows.any()


def test_pendulum_noise_fraction():
    """Exactly round(0.15·n) rows are rendered from a shifted angle."""
    data = gen_pendulum_latent(1000, seed=0)
    assert int(data.noisy_rows.sum()) == 150
    y, z1, z2, _ = data.full().T
    clean = ~data.noisy_rows
    assert np.array_equal(z2[clean], shadow_length(y[clean], z1[clean]))
    assert not np.allclose(z2[data.noisy_rows], shadow_length(y[data.noisy_rows], z1[data.noisy_rows]))


def test_pendulum_labels_and_ranges():
    """Labels are 50 bins of the clean angle; light angles stay in [π/4, π/2]."""
    data = gen_pendulum_latent(2000, seed=1)
    assert data.task == "classification"
    assert data.labels.min() >= 0 and data.labels.max() <= 49
    assert np.array_equal(data.labels, discretize_angle(data.target))
    z1 = data.features[:, 0]
    assert z1.min() >= math.pi / 4 and z1.max() <= math.pi / 2


def test_pendulum_noise_fraction_validated():
    """noise_fraction outside [0, 1] raises ConfigError."""
    with pytest.raises(ConfigError):
        gen_pendulum_latent(10, noise_fraction=1.5)


def test_discretize_angle_bins():
    """0 → 0, π/4 → 49 (closed last bin), π/8 → 25."""
    assert discretize_angle(0.0) == 0
    assert discretize_angle(math.pi / 4) == 49
    assert discretize_angle(math.pi / 8) == 25
    with pytest.raises(RangeError):
        discretize_angle(1.0)


def test_generate_dispatch():
    """Generators are reachable by name; unknown names raise ConfigError."""
    data = generate("pendulum_latent", 20, seed=0, noise_fraction=0.0)
    assert data.generator == "pendulum_latent"
    with pytest.raises(ConfigError):
        generate("mnist", 10, seed=0)


def test_dataset_save_and_load():
    """CSV plus sidecar round-trip the values bit for bit."""
    data = gen_pendulum_latent(100, seed=3)
    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir) / "pendulum.csv"
        data.save(path)
        assert path.with_suffix(".meta.json").exists()
        loaded = Dataset.load(path)
    assert np.array_equal(loaded.features, data.features)
    assert np.array_equal(loaded.target, data.target)
    assert np.array_equal(loaded.labels, data.labels)
    assert loaded.scm.names == data.scm.names


def test_dataset_load_missing():
    """A missing dataset raises FileNotFoundError."""
    with pytest.raises(FileNotFoundError):
        Dataset.load("/nonexistent/data.csv")


def test_subset_and_ranges():
    """subset keeps the SCM; ranges are max − min per variable."""
    data = gen_syn_measurement(200, seed=0)
    part = data.subset(np.arange(10))
    assert part.n == 10 and part.scm is data.scm
    full = data.full()
    assert np.allclose(data.variable_ranges(), full.max(axis=0) - full.min(axis=0))
