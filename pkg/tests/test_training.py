"""Tests for closed forms, least squares and gradient training."""

import numpy as np
import pytest

from cade.attacks import pgd
from cade.config import load_config
from cade.datasets import ToyParams, gen_linear_toy, gen_pendulum_latent, gen_syn_measurement
from cade.errors import ConfigError, DivergenceError, SingularError
from cade.models import LinearModel
from cade.training import (
    AdversarialConfig,
    ModelSpec,
    TrainConfig,
    adversarial_train,
    closed_form_toy_weights,
    fit_linear_erm,
    learning_rate_at,
    train,
)
from cade import spec


def _rmse(model, X, y):
    return float(np.sqrt(np.mean((model.predict(X) - y) ** 2)))


def test_closed_form_weights():
    """Unit parameters give [0.5, 0.5, −0.5]; c=0 and σ_y→0 give the robust [a, 0, 0]."""
    assert np.allclose(closed_form_toy_weights(ToyParams()), [0.5, 0.5, -0.5])
    assert np.allclose(closed_form_toy_weights(ToyParams(a=2.0, c=0.0)), [2.0, 0.0, 0.0])
    assert np.allclose(closed_form_toy_weights(ToyParams(sigma_y=1e-9)), [1.0, 0.0, 0.0], atol=1e-12)


def test_erm_recovers_closed_form():
    """Least squares on 10⁶ toy rows lands within 0.01 of the closed form."""
    data = gen_linear_toy(1_000_000, seed=0)
    model = fit_linear_erm(data)
    assert np.allclose(model.coef, [0.5, 0.5, -0.5], atol=0.01)
    assert model.info["condition_number"] > 1.0


def test_erm_small_child_noise():
    """σ₂ → 0: x2 and x3 determine y, so w ≈ [0, 1/c, −b/c]."""
    data = gen_linear_toy(20_000, ToyParams(sigma_2=1e-6), seed=1)
    model = fit_linear_erm(data)
    assert np.allclose(model.coef, [0.0, 1.0, -1.0], atol=1e-3)


def test_erm_exact_fit():
    """Noise-free targets are recovered to 1e-9."""
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 4))
    w = np.array([1.0, -2.0, 0.5, 3.0])
    model = fit_linear_erm((X, X @ w))
    assert np.allclose(model.coef, w, atol=1e-9)


def test_erm_rank_deficient():
    """A duplicated column raises SingularError."""
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2))
    X = np.column_stack([X, X[:, 0]])
    with pytest.raises(SingularError):
        fit_linear_erm((X, X[:, 0]))


def test_linear_training_converges_to_closed_form():
    """Gradient training of a linear victim lands near the closed-form weights."""
    data = gen_linear_toy(20_000, seed=2)
    cfg = TrainConfig(epochs=40, batch_size=256, learning_rate=0.01, seed=0)
    result = train(ModelSpec(kind="linear"), data, cfg)
    assert np.allclose(result.model.coef, [0.5, 0.5, -0.5], atol=0.02)
    assert len(result.history) == 40


def test_mlp_reaches_noise_floor():
    """An MLP on SynMeasurement gets clean test RMSE ≤ 1.2."""
    train_data = gen_syn_measurement(20_000, seed=0)
    test_data = gen_syn_measurement(2_000, seed=1)
    result = train(ModelSpec(kind="mlp", hidden=(32,)), train_data, TrainConfig(seed=0))
    assert _rmse(result.model, test_data.features, test_data.target) <= 1.2


def test_training_is_deterministic():
    """Same seed, same parameters, bit for bit."""
    data = gen_syn_measurement(2_000, seed=0)
    cfg = TrainConfig(epochs=3, seed=7)
    a = train(ModelSpec(hidden=(8,)), data, cfg).model
    b = train(ModelSpec(hidden=(8,)), data, cfg).model
    for p, q in zip(a.parameters(), b.parameters()):
        assert np.array_equal(p, q)


def test_cosine_schedule_anneals_the_rate():
    """Cosine starts at the base rate, halves midway and ends near zero; constant never moves."""
    cfg = TrainConfig(epochs=10, learning_rate=0.2, schedule="cosine")
    rates = [learning_rate_at(cfg, e) for e in range(10)]
    assert rates[0] == pytest.approx(0.2)
    assert rates[5] == pytest.approx(0.1)
    assert all(b < a for a, b in zip(rates, rates[1:]))
    assert 0 < rates[-1] < 0.01
    assert learning_rate_at(TrainConfig(epochs=10, learning_rate=0.2), 9) == 0.2
    with pytest.raises(ConfigError):
        TrainConfig(schedule="step")


def test_cosine_schedule_trains_the_pendulum_classifier():
    """A short annealed Adam run fits the angle classes far better than chance and is reproducible."""
    data = gen_pendulum_latent(4_000, seed=0)
    cfg = TrainConfig(epochs=30, batch_size=128, learning_rate=0.003, optimizer="adam",
                      schedule="cosine", task="classification", seed=0)
    model_spec = ModelSpec(kind="mlp", hidden=(32, 32), activation="tanh", n_outputs=50)
    result = train(model_spec, data, cfg)
    a, b = result.model, train(model_spec, data, cfg).model
    assert result.history[-1] < result.history[0]
    assert np.mean(a.predict(data.features) == data.labels) > 0.1
    for p, q in zip(a.parameters(), b.parameters()):
        assert np.array_equal(p, q)


def test_zero_epochs_returns_initial_model():
    """No epochs, no change."""
    data = gen_linear_toy(500, seed=0)
    start = LinearModel([0.1, 0.2, 0.3], 0.0)
    result = train(start, data, TrainConfig(epochs=0))
    assert np.array_equal(result.model.weights, start.weights)


def test_divergence_is_reported():
    """An absurd learning rate raises DivergenceError with the epoch."""
    data = gen_syn_measurement(2_000, seed=0)
    cfg = TrainConfig(epochs=50, learning_rate=1e6, standardize=False, seed=0)
    with pytest.raises(DivergenceError) as info:
        train(ModelSpec(kind="linear"), data, cfg)
    assert info.value.epoch is not None


def test_adversarial_training_with_zero_budget_matches_train():
    """ε = 0 follows the standard trajectory exactly."""
    data = gen_syn_measurement(1_000, seed=0)
    cfg = TrainConfig(epochs=2, seed=3)
    plain = train(ModelSpec(hidden=(8,)), data, cfg).model
    robust = adversarial_train(ModelSpec(hidden=(8,)), data, TrainConfig(epochs=2, seed=3, adversarial=AdversarialConfig(epsilon=0.0))).model
    for p, q in zip(plain.parameters(), robust.parameters()):
        assert np.array_equal(p, q)


def test_defense_trades_clean_for_robust_error():
    """A PGD-trained linear victim has higher clean RMSE but lower attacked RMSE."""
    train_data = gen_syn_measurement(20_000, seed=0)
    test_data = gen_syn_measurement(2_000, seed=1)
    eps = 0.3
    cfg = TrainConfig(epochs=20, batch_size=256, seed=0)
    standard = train(ModelSpec(kind="linear"), train_data, cfg).model
    defended = adversarial_train(ModelSpec(kind="linear"), train_data, TrainConfig(
        epochs=20, batch_size=256, seed=0, adversarial=AdversarialConfig(epsilon=eps, steps=10, step_size=0.05),
    )).model
    X, y = test_data.features, test_data.target
    assert _rmse(defended, X, y) > _rmse(standard, X, y)
    attacked = lambda m: _rmse(m, pgd(m, X, y, eps, 0.05, 10), y)
    assert attacked(defended) < attacked(standard)


def test_defense_defaults():
    """Defended victims use PGD with ε = 0.03 and 10 steps."""
    assert spec.DEFAULT_DEFENSE == {"epsilon": 0.03, "steps": 10, "step_size": 0.01}
    config = load_config("synmeasurement-fig6")
    defended = [v for v in config.victims if v.defense]
    assert defended
    for victim in defended:
        adv = victim.train_config("regression", 0).adversarial
        assert (adv.epsilon, adv.steps, adv.step_size) == (0.03, 10, 0.01)
