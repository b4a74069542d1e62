"""Tests for counterfactual attacks and the feature-space baselines."""

import numpy as np
import pytest

from cade.attacks import (
    AttackConfig,
    cade_random,
    cade_whitebox,
    fgsm,
    intervention_mask,
    perturb_baseline,
    pgd,
    run_attack,
)
from cade.datasets import TOY_FEATURES, ToyParams, gen_linear_toy, gen_pendulum_latent, gen_syn_measurement, shadow_length, shadow_position
from cade.errors import ConfigError, ShapeError
from cade.models import LinearModel, MlpModel
from cade.training import closed_form_toy_weights

X1, Y, X3, X2 = 0, 1, 2, 3


@pytest.fixture
def toy():
    data = gen_linear_toy(1000, seed=0)
    model = LinearModel(closed_form_toy_weights(ToyParams()))
    return data, model


def _predict(model, data, full):
    return model.predict(data.to_features(full))


def test_zero_budget_is_identity(toy):
    """ε = 0 leaves every example where it was."""
    data, model = toy
    x = data.full()
    cfg = AttackConfig(S=("x3",), epsilon=0.0)
    out = cade_whitebox(model, data.scm, x, data.target, cfg, feature_index=TOY_FEATURES)
    assert np.allclose(out, x, atol=1e-12)
    assert np.array_equal(fgsm(model, data.features, data.target, 0.0), data.features)
    assert np.array_equal(pgd(model, data.features, data.target, 0.0, 0.01, 5), data.features)


def test_budget_and_untouched_variables(toy):
    """|x′_S − x_S| ≤ ε and variables outside S ∪ desc(S) are unchanged."""
    data, model = toy
    x = data.full()
    cfg = AttackConfig(S=("x3",), epsilon=0.25, step_size=0.1, steps=10)
    out = cade_whitebox(model, data.scm, x, data.target, cfg, feature_index=TOY_FEATURES)
    assert np.all(np.abs(out[:, X3] - x[:, X3]) <= 0.25 + 1e-12)
    assert np.array_equal(out[:, [X1, Y]], x[:, [X1, Y]])


@pytest.mark.parametrize("eps", [0.1, 1.0, 10.0])
def test_coparent_intervention_cannot_move_erm_prediction(toy, eps):
    """do(x3) shifts x2 by b·δ, which the ERM weights cancel exactly."""
    data, model = toy
    x = data.full()
    cfg = AttackConfig(S=("x3",), epsilon=eps, step_size=eps / 4, steps=8)
    out = cade_whitebox(model, data.scm, x, data.target, cfg, feature_index=TOY_FEATURES)
    assert np.max(np.abs(out[:, X3] - x[:, X3])) > 0
    assert np.allclose(out[:, X2] - x[:, X2], out[:, X3] - x[:, X3])
    assert np.max(np.abs(_predict(model, data, out) - _predict(model, data, x))) < 1e-9


def test_perturbation_breaks_the_cancellation(toy):
    """Without propagation x2 stays put and the prediction moves by w₃·δ."""
    data, model = toy
    x = data.full()
    cfg = AttackConfig(S=("x3",), epsilon=1.0, step_size=0.5, steps=4, mode="perturbation")
    out = perturb_baseline(model, data.scm, x, data.target, cfg, feature_index=TOY_FEATURES)
    assert np.array_equal(out[:, X2], x[:, X2])
    shift = _predict(model, data, out) - _predict(model, data, x)
    assert np.allclose(shift, -0.5 * (out[:, X3] - x[:, X3]))
    assert np.max(np.abs(shift)) > 0.1


def test_intervention_attacks_refuse_perturbation_mode(toy):
    """Perturbations go through perturb_baseline; the propagating attacks refuse them."""
    data, model = toy
    x = data.full()[:10]
    cfg = AttackConfig(S=("x3",), epsilon=1.0, step_size=0.5, steps=2, mode="perturbation")
    with pytest.raises(ConfigError, match="perturb_baseline"):
        cade_whitebox(model, data.scm, x, data.target[:10], cfg, feature_index=TOY_FEATURES)
    with pytest.raises(ConfigError, match="perturb_baseline"):
        cade_random(data.scm, x, cfg)
    out = run_attack(cfg, model, data.scm, x, data.target[:10], TOY_FEATURES)
    assert np.array_equal(out[:, X2], x[:, X2])


def test_child_intervention_shifts_prediction(toy):
    """do(x2 += δ) moves the prediction by w₂·δ."""
    data, model = toy
    x = data.full()
    cfg = AttackConfig(S=("x2",), epsilon=0.5, step_size=0.2, steps=5)
    out = cade_whitebox(model, data.scm, x, data.target, cfg, feature_index=TOY_FEATURES)
    delta = out[:, X2] - x[:, X2]
    assert np.allclose(_predict(model, data, out) - _predict(model, data, x), 0.5 * delta)
    assert np.all(np.abs(delta) <= 0.5 + 1e-12) and np.max(np.abs(delta)) > 0


def test_loss_trace_is_non_decreasing(toy):
    """Single-variable ascent on a convex loss never lowers it."""
    data, model = toy
    trace = []
    cfg = AttackConfig(S=("x2",), epsilon=1.0, step_size=0.05, steps=30)
    cade_whitebox(model, data.scm, data.full(), data.target, cfg, feature_index=TOY_FEATURES, trace=trace)
    assert len(trace) == 31
    assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))
    assert trace[-1] > trace[0]


def test_syn_measurement_whitebox_on_mlp():
    """Attacking C1 on an MLP raises its loss and propagates to C2 and D."""
    data = gen_syn_measurement(100, seed=0)
    model = MlpModel.init([data.p, 16, 1], np.random.default_rng(0), activation="tanh")
    trace = []
    cfg = AttackConfig(S=("C1",), epsilon=0.5, step_size=0.1, steps=10)
    x = data.full()
    out = cade_whitebox(model, data.scm, x, data.target, cfg, feature_index=data.feature_index, trace=trace)
    names = data.scm.names
    c1, c2, dd = (names.index(n) for n in ("C1", "C2", "D"))
    delta = out[:, c1] - x[:, c1]
    assert np.allclose(out[:, c2] - x[:, c2], delta)
    assert np.allclose(out[:, dd] - x[:, dd], 2 * delta)
    assert trace[-1] >= trace[0]


def test_forbidden_intervention_sets(toy):
    """S must be non-empty, known, and exclude y and its ancestors."""
    data, _ = toy
    for S in (("y",), ("x1",), (), ("x9",)):
        with pytest.raises(ConfigError):
            intervention_mask(data.scm, AttackConfig(S=S))
    assert intervention_mask(data.scm, AttackConfig(S=("x2", "x3"))).indices == (X3, X2)


def test_attack_config_validation():
    """Unknown modes and negative budgets are rejected."""
    with pytest.raises(ConfigError):
        AttackConfig(mode="blackbox")
    with pytest.raises(ConfigError):
        AttackConfig(epsilon=-0.1)
    assert AttackConfig(S=("C1", "C2")).name == "C1+C2"


def test_fgsm_on_linear_model(toy):
    """FGSM δ = ε·sign(w)·sign(wᵀx − y) for squared loss."""
    data, model = toy
    X, y = data.features, data.target
    out = fgsm(model, X, y, 0.1)
    resid = model.predict(X) - y
    expected = 0.1 * np.sign(model.coef)[None, :] * np.sign(resid)[:, None]
    assert np.allclose(out - X, expected)


def test_pgd_at_least_as_strong_as_fgsm(toy):
    """PGD loss ≥ FGSM loss and stays inside the ball."""
    data, model = toy
    X, y = data.features, data.target
    x_pgd = pgd(model, X, y, 0.2, 0.05, 10)
    assert np.all(np.abs(x_pgd - X) <= 0.2 + 1e-12)
    assert model.loss(x_pgd, y) >= model.loss(fgsm(model, X, y, 0.2), y) - 1e-12


def test_baselines_default_to_the_feature_budget(toy):
    """Without explicit settings FGSM and PGD use ε = 0.03, 10 steps of 0.01."""
    data, model = toy
    X, y = data.features, data.target
    assert np.array_equal(fgsm(model, X, y), fgsm(model, X, y, 0.03))
    assert np.array_equal(pgd(model, X, y), pgd(model, X, y, 0.03, 0.01, 10))
    assert np.max(np.abs(pgd(model, X, y) - X)) <= 0.03 + 1e-12


def test_random_attack_is_seeded():
    """Same seed, same draw; every draw stays inside its per-variable box."""
    data = gen_syn_measurement(50, seed=0)
    cfg = AttackConfig(S=("CP", "C1"), epsilon=0.3, mode="random", seed=4)
    x = data.full()
    a = cade_random(data.scm, x, cfg)
    b = cade_random(data.scm, x, cfg)
    assert np.array_equal(a, b)
    idx = list(intervention_mask(data.scm, cfg).indices)
    assert np.all(np.abs(a[:, idx] - x[:, idx]) <= 0.3)


def test_random_light_intervention_on_pendulum():
    """Range-scaled light changes keep the pendulum angle and re-project both shadows."""
    data = gen_pendulum_latent(300, noise_fraction=0.0, seed=0)
    ranges = data.variable_ranges()
    support = data.variable_support()
    cfg = AttackConfig(S=("light_angle",), epsilon=0.3, mode="random", range_scaled=True, clip_to_support=True, seed=1)
    x = data.full()
    out = cade_random(data.scm, x, cfg, ranges=ranges, support=support)
    assert np.array_equal(out[:, 0], x[:, 0])
    assert np.all(np.abs(out[:, 1] - x[:, 1]) <= 0.3 * ranges[1] + 1e-12)
    assert out[:, 1].min() >= support[0][1] and out[:, 1].max() <= support[1][1]
    assert np.allclose(out[:, 2], shadow_length(out[:, 0], out[:, 1]))
    assert np.allclose(out[:, 3], shadow_position(out[:, 0], out[:, 1]))


def test_range_scaled_needs_ranges():
    """A range-scaled budget without ranges is a configuration error."""
    data = gen_syn_measurement(10, seed=0)
    with pytest.raises(ConfigError):
        cade_random(data.scm, data.full(), AttackConfig(S=("C1",), mode="random", range_scaled=True))


def test_run_attack_dispatch(toy):
    """run_attack returns full vectors and checks their width."""
    data, model = toy
    x = data.full()
    out = run_attack(AttackConfig(mode="fgsm", epsilon=0.03), model, data.scm, x, data.target, TOY_FEATURES)
    assert out.shape == x.shape
    assert np.array_equal(out[:, Y], x[:, Y])
    assert np.allclose(np.abs(out[:, list(TOY_FEATURES)] - data.features), 0.03)
    with pytest.raises(ShapeError):
        run_attack(AttackConfig(mode="fgsm"), model, data.scm, data.features, data.target, TOY_FEATURES)
    with pytest.raises(ConfigError):
        run_attack(AttackConfig(S=("x2",), mode="whitebox"), None, data.scm, x, data.target, TOY_FEATURES)
