"""Unit tests for src/core/training.py."""

import numpy as np
import pytest

import src.core.training as training
from src.core.config import SplitSpec, SyntheticConfig, TrainConfig
from src.core.data import generate_synthetic, stratified_split
from src.core.errors import ConfigError, DivergenceError
from src.core.model import CFGNNModel, predict
from src.core.training import AdamState, adam_step, adjacency_dropout, spectral_basis, train
from tests.conftest import random_connected_graph


def _toy_dataset():
    return generate_synthetic(SyntheticConfig(
        num_classes=2, num_samples=40, normal_fraction=0.5, feature_dim=3,
        p_in=0.5, p_out=0.0, separation=3.0, noise=0.1, seed=3,
    ))


def _model_for(ds, variant="v", seed=0, hidden_dim=8):
    return CFGNNModel.create(
        variant=variant, input_dim=ds.num_features, num_classes=ds.num_classes,
        n_nodes=ds.n, rng=np.random.default_rng(seed), hidden_dim=hidden_dim,
    )


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


class TestAdamStep:
    def test_first_step_is_learning_rate(self):
        params, state = adam_step(AdamState(), {"x": np.array(0.0)}, {"x": np.array(1.0)}, lr=0.01)
        assert float(params["x"]) == pytest.approx(-0.01 / (1.0 + 1e-8), abs=1e-15)
        assert state.t == 1

    def test_zero_gradient_no_decay(self):
        theta = np.array([1.5, -2.0])
        params, _ = adam_step(AdamState(), {"x": theta}, {"x": np.zeros(2)}, lr=0.1)
        np.testing.assert_array_equal(params["x"], theta)

    def test_two_steps_match_hand_recurrence(self):
        g, lr, b1, b2, eps = 0.5, 0.01, 0.9, 0.999, 1e-8
        params, state = {"x": np.array(1.0)}, AdamState()
        for _ in range(2):
            params, state = adam_step(state, params, {"x": np.array(g)}, lr=lr)

        theta, m, v = 1.0, 0.0, 0.0
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        assert float(params["x"]) == pytest.approx(theta, abs=1e-12)

    def test_weight_decay_is_added_to_gradient(self):
        decayed, _ = adam_step(AdamState(), {"x": np.array(2.0)}, {"x": np.array(0.0)}, lr=0.01, weight_decay=0.5)
        plain, _ = adam_step(AdamState(), {"x": np.array(2.0)}, {"x": np.array(1.0)}, lr=0.01)
        assert float(decayed["x"]) == float(plain["x"])

    def test_second_moment_non_negative(self, rng):
        params, state = {"x": rng.standard_normal(5)}, AdamState()
        for _ in range(3):
            params, state = adam_step(state, params, {"x": rng.standard_normal(5)}, lr=0.01)
        assert np.all(state.v["x"] >= 0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(AdamState(), {"x": np.zeros(2)}, {"x": np.zeros(3)}, lr=0.01)


# ---------------------------------------------------------------------------
# Adjacency dropout
# ---------------------------------------------------------------------------


class TestAdjacencyDropout:
    def test_zero_probability_is_identity(self, c4, rng):
        assert adjacency_dropout(c4, 0.0, rng) is c4

    def test_same_seed_same_graph(self, rng):
        g = random_connected_graph(10, rng)
        a = adjacency_dropout(g, 0.3, np.random.default_rng(5))
        b = adjacency_dropout(g, 0.3, np.random.default_rng(5))
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_survivors_are_scaled_and_symmetric(self, rng):
        g = random_connected_graph(10, rng)
        dropped = adjacency_dropout(g, 0.25, np.random.default_rng(1))
        np.testing.assert_array_equal(dropped.weights, dropped.weights.T)
        kept = dropped.weights > 0
        np.testing.assert_allclose(dropped.weights[kept], g.weights[kept] / 0.75)

    def test_expectation_matches_original(self, rng):
        g = random_connected_graph(6, rng, p=0.5)
        p, draws = 0.2, 10_000
        sampler = np.random.default_rng(2)
        total = np.zeros_like(g.weights)
        for _ in range(draws):
            total += adjacency_dropout(g, p, sampler).weights
        mean = total / draws
        sigma = g.weights * np.sqrt(p / (1.0 - p) / draws)
        assert np.all(np.abs(mean - g.weights) <= 4.0 * sigma + 1e-12)

    def test_rejects_probability_one(self, c4, rng):
        with pytest.raises(ValueError):
            adjacency_dropout(c4, 1.0, rng)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


class TestTrain:
    def test_zero_epochs(self):
        ds = _toy_dataset()
        model = _model_for(ds)
        trained, history = train(model, ds, TrainConfig(epochs=0), np.arange(ds.n))
        assert history == []
        for name in model.params:
            np.testing.assert_array_equal(trained.params[name], model.params[name])

    def test_history_is_deterministic_and_ordered(self):
        ds = _toy_dataset()
        config = TrainConfig(epochs=5, hidden_dim=8, seed=11)
        train_idx, test_idx = stratified_split(ds, SplitSpec(seed=11))
        _, first = train(_model_for(ds), ds, config, train_idx, test_idx)
        _, second = train(_model_for(ds), ds, config, train_idx, test_idx)
        assert first == second
        assert [r.epoch for r in first] == [1, 2, 3, 4, 5]

    def test_does_not_mutate_input_model(self):
        ds = _toy_dataset()
        model = _model_for(ds)
        before = {k: v.copy() for k, v in model.params.items()}
        train(model, ds, TrainConfig(epochs=2, hidden_dim=8), np.arange(ds.n))
        for name in before:
            np.testing.assert_array_equal(model.params[name], before[name])

    def test_separable_toy_reaches_full_training_accuracy(self):
        ds = _toy_dataset()
        config = TrainConfig(epochs=200, hidden_dim=8, learning_rate=0.05, seed=0, log_every=0)
        train_idx = np.arange(ds.n)
        trained, history = train(_model_for(ds), ds, config, train_idx)
        prediction = predict(trained, spectral_basis(ds.graph), ds.features)
        assert np.mean(prediction.labels == ds.labels) == 1.0
        assert history[-1].loss < history[0].loss

    def test_dropout_redrawn_every_epoch(self, mocker):
        ds = _toy_dataset()
        spy = mocker.spy(training, "adjacency_dropout")
        train(_model_for(ds), ds, TrainConfig(epochs=3, hidden_dim=8), np.arange(ds.n))
        assert spy.call_count == 3

    def test_divergence_reports_epoch(self, mocker):
        ds = _toy_dataset()
        mocker.patch("src.core.training.forward", side_effect=DivergenceError("Non-finite activation"))
        with pytest.raises(DivergenceError) as exc:
            train(_model_for(ds), ds, TrainConfig(epochs=3, hidden_dim=8), np.arange(ds.n))
        assert exc.value.epoch == 1
        assert "epoch 1" in str(exc.value)

    def test_invalid_config(self):
        ds = _toy_dataset()
        with pytest.raises(ConfigError):
            train(_model_for(ds), ds, TrainConfig(adjacency_dropout=1.5), np.arange(ds.n))
