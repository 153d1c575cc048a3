"""Exception hierarchy shared by the numerical modules and the CLI."""

from typing import Optional


class CFGNNError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CFGNNError):
    """Invalid configuration value or unknown configuration key."""


class DataError(CFGNNError):
    """Malformed input data or an infeasible data operation."""


class GraphError(DataError):
    """Graph violates the undirected / simple / non-negative contract."""


class GraphSizeError(GraphError):
    def __init__(self, nodes: int, limit: int):
        self.nodes = nodes
        self.limit = limit
        super().__init__(f"Product construction needs {nodes} nodes, limit is {limit}")


class NumericalError(CFGNNError):
    """A numerical routine could not produce a trustworthy result."""


class ConvergenceError(NumericalError):
    def __init__(self, routine: str, iterations: int):
        self.routine = routine
        self.iterations = iterations
        super().__init__(f"{routine} did not converge after {iterations} iterations")


class DegenerateVectorError(NumericalError):
    """A vector that must be non-zero vanished."""


class DivergenceError(NumericalError):
    def __init__(self, message: str, epoch: Optional[int] = None):
        self.epoch = epoch
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)


class StorageError(CFGNNError):
    """An artifact could not be written to the output location."""

    def __init__(self, path, cause: OSError):
        self.path = path
        self.cause = cause
        super().__init__(f"Cannot write {path}: {cause}")
