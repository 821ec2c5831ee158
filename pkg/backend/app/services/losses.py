"""TD loss functions (Huber, MSE) and their graph wiring."""

from typing import Literal, Union

import numpy as np

from backend.app.networks.autodiff import ComputeGraph

LossKind = Literal["huber", "mse"]
Number = Union[float, np.ndarray]


def huber(y: Number, y_hat: Number, delta: float = 1.0) -> Number:
    """0.5 u^2 if |u| <= delta else delta |u| - 0.5 delta^2, with u = y - y_hat.

    Raises:
        ValueError: If delta is not positive
    """
    if delta <= 0:
        raise ValueError(f"Huber delta must be positive, got {delta}")
    u = np.asarray(y, dtype=np.float64) - np.asarray(y_hat, dtype=np.float64)
    abs_u = np.abs(u)
    out = np.where(abs_u <= delta, 0.5 * u * u, delta * abs_u - 0.5 * delta * delta)
    return float(out) if out.ndim == 0 else out


def mse(y: Number, y_hat: Number) -> Number:
    """0.5 (y - y_hat)^2."""
    u = np.asarray(y, dtype=np.float64) - np.asarray(y_hat, dtype=np.float64)
    out = 0.5 * u * u
    return float(out) if out.ndim == 0 else out


def add_td_loss(
    graph: ComputeGraph, prediction: str, target: str, kind: LossKind, delta: float = 1.0
) -> str:
    """Per-sample TD loss of ``prediction`` against a constant ``target``.

    Returns:
        Reference to the elementwise loss
    """
    residual = graph.sub(target, prediction)
    if kind == "huber":
        if delta <= 0:
            raise ValueError(f"Huber delta must be positive, got {delta}")
        return graph.huber(residual, delta)
    if kind == "mse":
        return graph.half_square(residual)
    raise ValueError(f"Unknown loss '{kind}', expected 'huber' or 'mse'")


def add_weighted_mean(graph: ComputeGraph, per_sample: str, weights: str) -> str:
    """Mean over the batch of importance-weighted per-sample losses."""
    return graph.mean(graph.mul(per_sample, weights))
