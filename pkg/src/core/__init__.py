"""
Core numerical modules.
"""

from src.core.config import SplitSpec, SyntheticConfig, TrainConfig
from src.core.data import Dataset, generate_synthetic, load_csv
from src.core.graph_core import Graph, laplacian
from src.core.model import CFGNNModel, Prediction, forward, predict
from src.core.spectral import SpectralBasis, eigendecompose
from src.core.training import train

__all__ = [
    "TrainConfig",
    "SyntheticConfig",
    "SplitSpec",
    "Dataset",
    "generate_synthetic",
    "load_csv",
    "Graph",
    "laplacian",
    "CFGNNModel",
    "Prediction",
    "forward",
    "predict",
    "SpectralBasis",
    "eigendecompose",
    "train",
]
