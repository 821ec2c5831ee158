"""Exception types shared across the lab."""

from typing import Optional


class LabError(Exception):
    """Base class for lab errors."""


class GraphError(LabError, ValueError):
    """Invalid use of a compute graph (shape mismatch, missing leaf, misuse)."""

    def __init__(
        self, message: str, primitive: Optional[str] = None, node: Optional[int] = None
    ) -> None:
        """Initialize graph error.

        Args:
            message: Human readable description
            primitive: Name of the primitive that failed, if any
            node: Index of the failing node in the graph, if any
        """
        self.primitive = primitive
        self.node = node
        location = ""
        if primitive is not None:
            location = f"[{primitive}"
            location += f" @ node {node}]" if node is not None else "]"
            location += " "
        super().__init__(f"{location}{message}")


class NonFiniteError(LabError, ArithmeticError):
    """A NaN or Inf appeared in a forward or backward pass, or in training."""

    def __init__(self, message: str, where: Optional[str] = None) -> None:
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class ConfigError(LabError, ValueError):
    """Invalid or unknown experiment configuration."""


class RunFailure(LabError, RuntimeError):
    """A training run aborted."""
