"""Root-level test fixtures."""

import numpy as np
import pytest

from src.core.config import SyntheticConfig
from src.core.data import Dataset, generate_synthetic
from src.core.graph_core import Graph, laplacian
from src.core.model import CFGNNModel
from src.core.spectral import eigendecompose


# Keep env-driven knobs out of tests
@pytest.fixture(autouse=True)
def _clear_env(monkeypatch):
    monkeypatch.delenv("CFGNN_MAX_PRODUCT_NODES", raising=False)
    monkeypatch.delenv("CFGNN_RUN_LOG", raising=False)
    monkeypatch.delenv("CFGNN_LOG_LEVEL", raising=False)


def path_graph(n: int) -> Graph:
    w = np.zeros((n, n))
    for i in range(n - 1):
        w[i, i + 1] = w[i + 1, i] = 1.0
    return Graph.from_weights(w)


def cycle_graph(n: int) -> Graph:
    w = np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        w[i, j] = w[j, i] = 1.0
    return Graph.from_weights(w)


def random_connected_graph(n: int, rng: np.random.Generator, p: float = 0.3) -> Graph:
    """Random weighted graph with a spanning path so it is always connected."""
    w = np.triu(rng.random((n, n)) < p, k=1) * rng.uniform(0.5, 2.0, size=(n, n))
    for i in range(n - 1):
        w[i, i + 1] = max(w[i, i + 1], 1.0)
    return Graph.from_weights(w + w.T)


@pytest.fixture
def c4():
    return cycle_graph(4)


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_graph():
    """12-node connected graph used for gradient checks."""
    return random_connected_graph(12, np.random.default_rng(7), p=0.35)


@pytest.fixture
def toy_basis(toy_graph):
    return eigendecompose(laplacian(toy_graph), method="lapack")


@pytest.fixture
def toy_features():
    return np.random.default_rng(11).standard_normal((12, 4))


@pytest.fixture
def toy_labels():
    return np.array([0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 0, 1])


def make_toy_model(variant: str, seed: int = 0, hidden_dim: int = 5, num_layers: int = 2) -> CFGNNModel:
    """n=12, D=4, C=3, K=2 model with perturbed spectral parameters."""
    rng = np.random.default_rng(seed)
    model = CFGNNModel.create(
        variant=variant, input_dim=4, num_classes=3, n_nodes=12, rng=rng,
        num_layers=num_layers, hidden_dim=hidden_dim, K=2,
    )
    for name in model.params:
        if name.endswith((".rho", ".alpha")):
            model.params[name] = model.params[name] + rng.normal(0.0, 0.3, size=model.params[name].shape)
        if name == "head.b":
            model.params[name] = rng.normal(0.0, 0.1, size=model.params[name].shape)
    return model


@pytest.fixture
def small_synthetic_config():
    return SyntheticConfig(
        num_classes=3, num_samples=60, normal_fraction=0.5, feature_dim=4,
        p_in=0.3, p_out=0.02, separation=3.0, noise=0.3, seed=5,
    )


@pytest.fixture
def small_dataset(small_synthetic_config) -> Dataset:
    return generate_synthetic(small_synthetic_config)
