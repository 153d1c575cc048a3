"""Unit tests for src/core/model.py."""

import numpy as np
import pytest

from src.core.config import TrainConfig
from src.core.data import Dataset
from src.core.errors import DivergenceError
from src.core.graph_core import Graph, laplacian
from src.core.model import (
    CFGNNModel,
    Prediction,
    backward,
    backward_from_scores,
    class_weighted_cross_entropy,
    class_weights,
    forward,
    global_baseline_forward,
    predict,
)
from src.core.spectral import eigendecompose
from src.core.training import train
from tests.conftest import make_toy_model, path_graph


def _activation_pattern(cache):
    return np.concatenate([(b.pre_activation > 0).ravel() for layer in cache.layers for b in layer])


def _loss_and_pattern(model, basis, X, labels, weights):
    prediction, cache = forward(model, basis, X)
    return class_weighted_cross_entropy(prediction, labels, weights), _activation_pattern(cache)


def _max_relative_error(model, basis, X, labels, weights, step=1e-5):
    """Central differences per parameter; entries whose perturbation crosses a ReLU kink are skipped."""
    _, cache = forward(model, basis, X)
    pattern = _activation_pattern(cache)
    grads = backward(model, cache, labels, weights)
    worst = 0.0
    for name, value in model.params.items():
        numeric = np.zeros_like(value)
        smooth = np.ones(value.shape, dtype=bool)
        for idx in np.ndindex(value.shape):
            original = value[idx]
            value[idx] = original + step
            plus, plus_pattern = _loss_and_pattern(model, basis, X, labels, weights)
            value[idx] = original - step
            minus, minus_pattern = _loss_and_pattern(model, basis, X, labels, weights)
            value[idx] = original
            numeric[idx] = (plus - minus) / (2.0 * step)
            smooth[idx] = np.array_equal(plus_pattern, pattern) and np.array_equal(minus_pattern, pattern)
        scale = max(np.max(np.abs(numeric)), np.max(np.abs(grads[name])), 1e-6)
        diff = np.abs(numeric - grads[name])[smooth]
        if diff.size:
            worst = max(worst, float(diff.max() / scale))
    return worst


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


class TestModelConstruction:
    def test_parameter_shapes(self):
        model = make_toy_model("v")
        assert model.params["layer0.W"].shape == (4, 5)
        assert model.params["layer1.W"].shape == (5, 5)
        assert model.params["layer0.psi"].shape == (3, 12, 3)
        assert model.params["layer1.rho"].shape == (3, 12)
        assert model.params["head.W"].shape == (5, 3)

    def test_global_has_one_shared_filter(self):
        model = make_toy_model("global")
        assert model.params["layer0.psi"].shape == (1, 1, 3)
        assert not any(name.endswith((".rho", ".alpha")) for name in model.params)

    def test_initial_psi_passes_order_zero(self):
        model = CFGNNModel.create("base", 4, 3, 12, np.random.default_rng(0), hidden_dim=5)
        np.testing.assert_array_equal(model.params["layer0.psi"][..., 0], 1.0)

    def test_same_seed_same_params(self):
        a = make_toy_model("e", seed=3)
        b = make_toy_model("e", seed=3)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            CFGNNModel.create("x", 4, 3, 12, np.random.default_rng(0))

    def test_copy_is_independent(self):
        model = make_toy_model("base")
        clone = model.copy()
        clone.params["head.b"][0] = 99.0
        assert model.params["head.b"][0] != 99.0

    def test_validate_detects_shape_mismatch(self):
        model = make_toy_model("base")
        model.params["head.b"] = np.zeros(4)
        with pytest.raises(ValueError):
            model.validate()


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------


class TestForward:
    def test_rows_are_stochastic(self, toy_basis, toy_features):
        for variant in ("base", "v", "e", "global"):
            prediction, _ = forward(make_toy_model(variant), toy_basis, toy_features)
            assert prediction.probs.shape == (12, 3)
            np.testing.assert_allclose(prediction.probs.sum(axis=1), 1.0, atol=1e-9)
            assert np.all(prediction.probs >= 0)

    def test_zero_weights_give_uniform_probs(self, toy_basis, toy_features):
        model = make_toy_model("v")
        model.params = {name: np.zeros_like(value) for name, value in model.params.items()}
        prediction, _ = forward(model, toy_basis, toy_features)
        np.testing.assert_allclose(prediction.probs, 1.0 / 3.0)
        np.testing.assert_array_equal(prediction.labels, 0)

    def test_v_with_unit_gamma_equals_base(self, toy_basis, toy_features):
        base = make_toy_model("base", seed=2)
        v = make_toy_model("v", seed=2)
        for name in base.params:
            v.params[name] = base.params[name].copy()
        for layer in range(v.num_layers):
            v.params[f"layer{layer}.rho"] = np.full((3, 12), np.log(np.e - 1.0))
        p_base, _ = forward(base, toy_basis, toy_features)
        p_v, _ = forward(v, toy_basis, toy_features)
        np.testing.assert_allclose(p_v.probs, p_base.probs, atol=1e-10)

    def test_e_with_identity_attention_equals_base(self, toy_basis, toy_features):
        base = make_toy_model("base", seed=4)
        e = make_toy_model("e", seed=4)
        for name in base.params:
            e.params[name] = base.params[name].copy()
        for layer in range(e.num_layers):
            e.params[f"layer{layer}.alpha"] = np.ones((3, 12))
        np.testing.assert_allclose(
            forward(e, toy_basis, toy_features)[0].probs,
            forward(base, toy_basis, toy_features)[0].probs,
            atol=1e-10,
        )

    def test_base_with_row_constant_psi_equals_global(self, toy_basis, toy_features):
        glob = make_toy_model("global", seed=5)
        base = make_toy_model("base", seed=5)
        for layer in range(2):
            base.params[f"layer{layer}.W"] = glob.params[f"layer{layer}.W"].copy()
            base.params[f"layer{layer}.psi"] = np.broadcast_to(glob.params[f"layer{layer}.psi"], (3, 12, 3)).copy()
        base.params["head.W"] = glob.params["head.W"].copy()
        base.params["head.b"] = glob.params["head.b"].copy()
        np.testing.assert_allclose(
            forward(base, toy_basis, toy_features)[0].probs,
            global_baseline_forward(glob, toy_basis, toy_features).probs,
            atol=1e-10,
        )

    def test_node_permutation_permutes_rows(self, toy_graph, toy_features):
        perm = np.random.default_rng(0).permutation(12)
        model = make_toy_model("base", seed=1)
        model.params = {name: value.copy() for name, value in model.params.items()}
        for layer in range(2):
            model.params[f"layer{layer}.psi"] = np.broadcast_to(
                model.params[f"layer{layer}.psi"][:, :1, :], (3, 12, 3)
            ).copy()
        basis = eigendecompose(laplacian(toy_graph), method="lapack")
        permuted = toy_graph.induced_subgraph(perm)
        permuted_basis = eigendecompose(laplacian(permuted), method="lapack")
        original = forward(model, basis, toy_features)[0].probs
        shuffled = forward(model, permuted_basis, toy_features[perm])[0].probs
        np.testing.assert_allclose(shuffled, original[perm], atol=1e-9)

    def test_global_baseline_requires_global_model(self, toy_basis, toy_features):
        with pytest.raises(ValueError):
            global_baseline_forward(make_toy_model("v"), toy_basis, toy_features)

    def test_dimension_mismatch(self, toy_basis):
        with pytest.raises(ValueError):
            forward(make_toy_model("base"), toy_basis, np.zeros((12, 5)))

    def test_overflow_signals_divergence(self, toy_basis, toy_features):
        model = make_toy_model("base")
        model.params["layer0.W"] = np.full_like(model.params["layer0.W"], 1e308)
        with pytest.raises(DivergenceError), np.errstate(all="ignore"):
            forward(model, toy_basis, toy_features)


class TestPredict:
    def test_tie_goes_to_lowest_class(self):
        basis = eigendecompose(laplacian(path_graph(1)))
        model = CFGNNModel.create("base", 1, 2, 1, np.random.default_rng(0), num_layers=1, hidden_dim=1)
        model.params["head.W"] = np.zeros((1, 2))
        prediction = predict(model, basis, np.ones((1, 1)))
        np.testing.assert_allclose(prediction.probs, [[0.5, 0.5]])
        assert prediction.labels[0] == 0

    def test_agrees_with_argmax(self, toy_basis, toy_features):
        model = make_toy_model("e", seed=9)
        prediction = predict(model, toy_basis, toy_features)
        np.testing.assert_array_equal(prediction.labels, np.argmax(prediction.probs, axis=1))


# ---------------------------------------------------------------------------
# Loss and class weights
# ---------------------------------------------------------------------------


class TestLoss:
    def test_perfect_prediction(self):
        pred = Prediction(probs=np.eye(2), labels=np.array([0, 1]))
        assert class_weighted_cross_entropy(pred, [0, 1], [1.0, 1.0]) == 0.0

    def test_uniform_binary_is_ln2(self):
        pred = Prediction(probs=np.full((4, 2), 0.5), labels=np.zeros(4, dtype=int))
        assert class_weighted_cross_entropy(pred, [0, 1, 1, 1], [2.0, 7.0]) == pytest.approx(np.log(2.0))

    def test_hand_computed_weighted_loss(self):
        pred = Prediction(probs=np.array([[0.9, 0.1], [0.6, 0.4]]), labels=np.array([0, 0]))
        expected = -(1.0 * np.log(0.9) + 3.0 * np.log(0.4)) / 4.0
        assert class_weighted_cross_entropy(pred, [0, 1], [1.0, 3.0]) == pytest.approx(expected)
        assert expected == pytest.approx(0.7135, abs=1e-4)

    def test_probability_floor(self):
        pred = Prediction(probs=np.array([[1.0, 0.0]]), labels=np.array([0]))
        assert class_weighted_cross_entropy(pred, [1], [1.0, 1.0]) == pytest.approx(-np.log(1e-12))

    def test_equal_weights_match_mean_cross_entropy(self, rng):
        probs = rng.dirichlet(np.ones(3), size=8)
        labels = rng.integers(0, 3, size=8)
        pred = Prediction(probs=probs, labels=np.argmax(probs, axis=1))
        expected = -np.mean(np.log(probs[np.arange(8), labels]))
        assert class_weighted_cross_entropy(pred, labels, np.ones(3)) == pytest.approx(expected)

    def test_index_restricts_rows(self):
        pred = Prediction(probs=np.array([[0.9, 0.1], [0.1, 0.9]]), labels=np.array([0, 1]))
        assert class_weighted_cross_entropy(pred, [0, 0], [1.0, 1.0], index=np.array([0])) == pytest.approx(-np.log(0.9))

    def test_rejects_bad_labels(self):
        pred = Prediction(probs=np.full((1, 2), 0.5), labels=np.array([0]))
        with pytest.raises(ValueError):
            class_weighted_cross_entropy(pred, [2], [1.0, 1.0])

    def test_duplication_invariance(self, rng):
        probs = rng.dirichlet(np.ones(2), size=6)
        labels = np.array([0, 0, 0, 0, 1, 1])
        dup = np.concatenate([np.arange(6), [4, 5, 4, 5]])
        w = class_weights(labels, 2)
        w_dup = class_weights(labels[dup], 2)
        original = class_weighted_cross_entropy(Prediction(probs, labels), labels, w)
        duplicated = class_weighted_cross_entropy(Prediction(probs[dup], labels[dup]), labels[dup], w_dup)
        assert duplicated == pytest.approx(original, abs=1e-6)


class TestClassWeights:
    def test_inverse_frequency(self):
        np.testing.assert_allclose(class_weights([0, 0, 0, 1], 2), [4 / 6, 2.0])

    def test_none_mode(self):
        np.testing.assert_array_equal(class_weights([0, 0, 1], 2, mode="none"), [1.0, 1.0])

    def test_clipping(self):
        labels = [0] * 1000 + [1]
        weights = class_weights(labels, 2)
        assert weights.min() >= 0.1
        assert weights.max() == 100.0

    def test_balanced_weights_leave_loss_unchanged(self, rng):
        labels = np.array([0, 1, 0, 1])
        probs = rng.dirichlet(np.ones(2), size=4)
        pred = Prediction(probs, np.argmax(probs, axis=1))
        assert class_weighted_cross_entropy(pred, labels, class_weights(labels, 2)) == class_weighted_cross_entropy(
            pred, labels, class_weights(labels, 2, mode="none")
        )


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------


class TestBackward:
    @pytest.mark.parametrize("variant", ["base", "v", "e", "global"])
    def test_matches_finite_differences(self, variant, toy_basis, toy_features, toy_labels):
        weights = class_weights(toy_labels, 3)
        for seed in range(20):
            model = make_toy_model(variant, seed=seed, hidden_dim=3)
            assert _max_relative_error(model, toy_basis, toy_features, toy_labels, weights) < 1e-3

    def test_masked_rows_have_no_influence(self, toy_basis, toy_features, toy_labels):
        model = make_toy_model("v", seed=1)
        weights = np.ones(3)
        _, cache = forward(model, toy_basis, toy_features)
        index = np.array([0, 1, 2])
        altered = toy_labels.copy()
        altered[5:] = (altered[5:] + 1) % 3
        g1 = backward(model, cache, toy_labels, weights, index)
        g2 = backward(model, cache, altered, weights, index)
        for name in g1:
            np.testing.assert_array_equal(g1[name], g2[name])

    def test_quadratic_head_loss(self, toy_basis, toy_features):
        model = make_toy_model("base")
        _, cache = forward(model, toy_basis, toy_features)
        # ½‖W_head‖² has gradient W_head; the upstream score gradient is zero here
        grads = backward_from_scores(model, cache, np.zeros((12, 3)))
        grads["head.W"] = grads["head.W"] + model.params["head.W"]
        np.testing.assert_array_equal(grads["head.W"], model.params["head.W"])

    def test_zero_signal_gives_zero_spectral_gradient(self, toy_basis, toy_labels):
        model = make_toy_model("v")
        _, cache = forward(model, toy_basis, np.zeros((12, 4)))
        grads = backward(model, cache, toy_labels, np.ones(3))
        for layer in range(2):
            np.testing.assert_array_equal(grads[f"layer{layer}.rho"], 0.0)

    def test_requires_cache(self, toy_labels):
        with pytest.raises(ValueError):
            backward(make_toy_model("base"), None, toy_labels, np.ones(3))


# ---------------------------------------------------------------------------
# Shared filter vs class branches
# ---------------------------------------------------------------------------


def _mirrored_blocks() -> Dataset:
    """Two 4-cliques joined by one edge; i ↔ 7 − i swaps the blocks and fixes the features."""
    w = np.zeros((8, 8))
    for block in (range(0, 4), range(4, 8)):
        for i in block:
            for j in block:
                if i != j:
                    w[i, j] = 1.0
    w[3, 4] = w[4, 3] = 1.0
    half = np.array([[1.0, 0.2], [1.0, -0.5], [1.0, 0.9], [1.0, 0.4]])
    features = np.vstack([half, half[::-1]])
    return Dataset(
        features=features,
        labels=np.array([0, 0, 0, 0, 1, 1, 1, 1]),
        class_names=("left", "right"),
        graph=Graph.from_weights(w),
        feature_names=("bias", "x"),
    )


class TestSharedFilterBaseline:
    def _trained_loss(self, ds, basis, variant):
        config = TrainConfig(
            variant=variant, hidden_dim=8, epochs=200, adjacency_dropout=0.0,
            weight_decay=0.0, learning_rate=0.02, seed=3, log_every=0,
        )
        model = CFGNNModel.create(
            variant=variant, input_dim=2, num_classes=2, n_nodes=8,
            rng=np.random.default_rng(3), hidden_dim=8, K=2,
        )
        trained, _ = train(model, ds, config, np.arange(8))
        if variant == "global":
            prediction = global_baseline_forward(trained, basis, ds.features)
        else:
            prediction = predict(trained, basis, ds.features)
        return prediction, class_weighted_cross_entropy(prediction, ds.labels, np.ones(2))

    def test_mirrored_nodes_get_identical_global_scores(self):
        ds = _mirrored_blocks()
        basis = eigendecompose(laplacian(ds.graph), method="lapack")
        model = CFGNNModel.create(
            variant="global", input_dim=2, num_classes=2, n_nodes=8, rng=np.random.default_rng(0), hidden_dim=8,
        )
        probs = global_baseline_forward(model, basis, ds.features).probs
        np.testing.assert_allclose(probs, probs[::-1], atol=1e-10)

    def test_class_branches_beat_shared_filter_after_training(self):
        ds = _mirrored_blocks()
        basis = eigendecompose(laplacian(ds.graph), method="lapack")
        global_pred, global_loss = self._trained_loss(ds, basis, "global")
        cf_pred, cf_loss = self._trained_loss(ds, basis, "v")

        # mirrored rows share one distribution, so the shared filter cannot beat ln 2
        assert global_loss >= np.log(2.0) - 1e-9
        assert not np.allclose(global_pred.probs, cf_pred.probs)
        assert global_loss - cf_loss > 0.0
