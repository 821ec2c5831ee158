"""Layer definitions: plain, noisy and convolutional layers plus the dueling head.

Each layer exists twice: as a direct numpy evaluation (used by tests and for
quick inspection) and as a graph builder used for training. Both follow the
same arithmetic order so their results agree bitwise.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from backend.app.networks.autodiff import ComputeGraph


def _check_linear_shapes(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> None:
    if W.ndim != 2 or b.shape != (W.shape[0],) or x.shape[-1] != W.shape[1]:
        raise ValueError(
            f"linear shapes incompatible: W {W.shape}, b {b.shape}, x {x.shape}"
        )


def linear_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = Wx + b for a single input vector or a batch of row vectors."""
    W, b, x = (np.asarray(a, dtype=np.float64) for a in (W, b, x))
    _check_linear_shapes(W, b, x)
    return np.matmul(x, W.T) + b


def scaled_noise(values: np.ndarray) -> np.ndarray:
    """f(x) = sign(x) * sqrt(|x|)."""
    return np.sign(values) * np.sqrt(np.abs(values))


def factorised_noise_from(
    row_noise: np.ndarray, col_noise: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Build (eps_w, eps_b) from raw per-output (row) and per-input (col) draws."""
    f_out = scaled_noise(np.asarray(row_noise, dtype=np.float64))
    f_in = scaled_noise(np.asarray(col_noise, dtype=np.float64))
    return np.outer(f_out, f_in), f_out


def sample_factorised_noise(
    n_in: int, n_out: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample factorised Gaussian noise for an ``n_in -> n_out`` noisy layer.

    Returns:
        eps_w of shape (n_out, n_in) and eps_b of shape (n_out,)
    """
    col_noise = rng.standard_normal(n_in)
    row_noise = rng.standard_normal(n_out)
    return factorised_noise_from(row_noise, col_noise)


@dataclass
class NoisyLayerParams:
    """Deterministic stream (W, b) and noisy stream (W_noisy, b_noisy)."""

    W: np.ndarray
    b: np.ndarray
    W_noisy: np.ndarray
    b_noisy: np.ndarray

    def __post_init__(self) -> None:
        if self.W.shape != self.W_noisy.shape or self.b.shape != self.b_noisy.shape:
            raise ValueError(
                "noisy stream shapes must match the deterministic stream: "
                f"W {self.W.shape} vs {self.W_noisy.shape}, "
                f"b {self.b.shape} vs {self.b_noisy.shape}"
            )


def noisy_linear_forward(
    p: NoisyLayerParams, x: np.ndarray, noise: tuple[np.ndarray, np.ndarray]
) -> np.ndarray:
    """y = (b + Wx) + (b_noisy * eps_b + (W_noisy * eps_w) x)."""
    eps_w, eps_b = noise
    x = np.asarray(x, dtype=np.float64)
    _check_linear_shapes(p.W, p.b, x)
    if eps_w.shape != p.W.shape or eps_b.shape != p.b.shape:
        raise ValueError(
            f"noise shapes {eps_w.shape}/{eps_b.shape} do not match layer {p.W.shape}"
        )
    deterministic = np.matmul(x, p.W.T) + p.b
    noisy = np.matmul(x, (p.W_noisy * eps_w).T) + p.b_noisy * eps_b
    return deterministic + noisy


def dueling_aggregate(V: float, A: np.ndarray) -> np.ndarray:
    """Q_a = V + A_a - mean(A)."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        raise ValueError("dueling aggregation needs at least one action")
    return V + (A - A.mean())


def conv_forward(filters: np.ndarray, x: np.ndarray, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """Valid stride-1 convolution of an H x W x C input followed by ReLU.

    Args:
        filters: (kh, kw, C, F) kernel
        x: (H, W, C) input, or a (B, H, W, C) batch
        bias: Optional (F,) bias

    Returns:
        Feature map of shape (H-kh+1, W-kw+1, F) (batched if the input was)
    """
    filters = np.asarray(filters, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    batch = x[None] if single else x
    kh, kw = filters.shape[:2]
    if batch.ndim != 4 or filters.ndim != 4 or batch.shape[3] != filters.shape[2]:
        raise ValueError(f"conv shapes incompatible: {x.shape} * {filters.shape}")
    out_h, out_w = batch.shape[1] - kh + 1, batch.shape[2] - kw + 1
    if out_h < 1 or out_w < 1:
        raise ValueError(f"kernel {kh}x{kw} larger than input {batch.shape[1:3]}")
    out = np.zeros((batch.shape[0], out_h, out_w, filters.shape[3]))
    for i in range(kh):
        for j in range(kw):
            out += np.matmul(batch[:, i : i + out_h, j : j + out_w, :], filters[i, j])
    if bias is not None:
        out = out + bias
    out = np.maximum(out, 0.0)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Graph builders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerSpec:
    """Fully connected layer in a network topology."""

    name: str
    n_in: int
    n_out: int
    noisy: bool = False

    @property
    def parameter_names(self) -> list[str]:
        names = [f"{self.name}.W", f"{self.name}.b"]
        if self.noisy:
            names += [f"{self.name}.W_noisy", f"{self.name}.b_noisy"]
        return names

    @property
    def noise_names(self) -> list[str]:
        return [f"{self.name}.eps_w", f"{self.name}.eps_b"] if self.noisy else []


def add_linear(graph: ComputeGraph, x: str, spec: LayerSpec) -> str:
    """Declare the parameters of ``spec`` on ``graph`` and apply the layer to ``x``."""
    W = graph.leaf(f"{spec.name}.W", (spec.n_out, spec.n_in))
    b = graph.leaf(f"{spec.name}.b", (spec.n_out,))
    y = graph.add(graph.matmul(x, graph.transpose(W)), b)
    if not spec.noisy:
        return y
    W_noisy = graph.leaf(f"{spec.name}.W_noisy", (spec.n_out, spec.n_in))
    b_noisy = graph.leaf(f"{spec.name}.b_noisy", (spec.n_out,))
    eps_w = graph.leaf(f"{spec.name}.eps_w", (spec.n_out, spec.n_in), requires_grad=False)
    eps_b = graph.leaf(f"{spec.name}.eps_b", (spec.n_out,), requires_grad=False)
    noisy = graph.add(
        graph.matmul(x, graph.transpose(graph.mul(W_noisy, eps_w))),
        graph.mul(b_noisy, eps_b),
    )
    return graph.add(y, noisy)


def add_conv(graph: ComputeGraph, x: str, name: str, kernel: int, channels: int, filters: int) -> str:
    """Valid convolution + bias + ReLU."""
    weights = graph.leaf(f"{name}.filters", (kernel, kernel, channels, filters))
    bias = graph.leaf(f"{name}.b", (filters,))
    return graph.relu(graph.add(graph.conv2d(x, weights), bias))


def add_dueling(graph: ComputeGraph, value: str, advantage: str) -> str:
    """Q = V + (A - mean_a A); actions live on axis 1."""
    centred = graph.sub(advantage, graph.mean(advantage, axis=1, keepdims=True))
    return graph.add(value, centred)
