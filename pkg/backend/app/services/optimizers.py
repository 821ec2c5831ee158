"""Adam and RMSProp updates over a named parameter set."""

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

OptimizerKind = Literal["adam", "rmsprop"]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
RMSPROP_DECAY = 0.95


@dataclass
class OptimizerState:
    """Per-parameter moment accumulators for one agent."""

    kind: OptimizerKind
    lr: float
    eps: float
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def create(
        cls, kind: OptimizerKind, params: dict[str, np.ndarray], lr: float, eps: float
    ) -> "OptimizerState":
        """Fresh state shaped like ``params``."""
        if kind not in ("adam", "rmsprop"):
            raise ValueError(f"Unknown optimizer '{kind}', expected 'adam' or 'rmsprop'")
        state = cls(kind=kind, lr=lr, eps=eps)
        for name, value in params.items():
            state.second_moment[name] = np.zeros_like(value)
            if kind == "adam":
                state.first_moment[name] = np.zeros_like(value)
        return state


def _check_shapes(state: OptimizerState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
    for name, grad in grads.items():
        if name not in params:
            raise ValueError(f"gradient for unknown parameter '{name}'")
        if grad.shape != params[name].shape or name not in state.second_moment:
            raise ValueError(
                f"gradient shape {grad.shape} does not match parameter "
                f"'{name}' {params[name].shape}"
            )


def adam_step(
    state: OptimizerState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> OptimizerState:
    """Adam with bias correction; ``params`` are updated in place.

    Raises:
        ValueError: On a kind or shape mismatch
    """
    if state.kind != "adam":
        raise ValueError(f"adam_step called with a '{state.kind}' state")
    _check_shapes(state, params, grads)
    state.step_count += 1
    correction1 = 1.0 - ADAM_BETA1**state.step_count
    correction2 = 1.0 - ADAM_BETA2**state.step_count
    for name, grad in grads.items():
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * grad
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        params[name] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


def rmsprop_step(
    state: OptimizerState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> OptimizerState:
    """v <- 0.95 v + 0.05 g^2; theta <- theta - lr g / sqrt(v + eps). No momentum, no centering.

    Raises:
        ValueError: On a kind or shape mismatch
    """
    if state.kind != "rmsprop":
        raise ValueError(f"rmsprop_step called with a '{state.kind}' state")
    _check_shapes(state, params, grads)
    state.step_count += 1
    for name, grad in grads.items():
        v = state.second_moment[name]
        v *= RMSPROP_DECAY
        v += (1.0 - RMSPROP_DECAY) * grad * grad
        params[name] -= state.lr * grad / np.sqrt(v + state.eps)
    return state


def apply_gradients(
    state: OptimizerState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> OptimizerState:
    """Dispatch on the optimizer kind."""
    if state.kind == "adam":
        return adam_step(state, params, grads)
    return rmsprop_step(state, params, grads)
