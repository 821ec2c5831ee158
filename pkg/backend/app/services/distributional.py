"""Return-distribution parameterizations: categorical (C51), quantile (QR) and implicit quantile (IQN)."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from backend.app.networks.layers import linear_forward
from backend.app.networks.q_network import cosine_basis


@dataclass(frozen=True)
class CategoricalSupport:
    """Equally spaced atoms from v_min to v_max."""

    num_atoms: int = 51
    v_min: float = -200.0
    v_max: float = 200.0

    def __post_init__(self) -> None:
        if self.num_atoms < 2 or self.v_max <= self.v_min:
            raise ValueError(
                f"degenerate support: {self.num_atoms} atoms on "
                f"[{self.v_min}, {self.v_max}]"
            )

    @classmethod
    def symmetric(cls, num_atoms: int, v_max: float) -> "CategoricalSupport":
        return cls(num_atoms=num_atoms, v_min=-v_max, v_max=v_max)

    @property
    def delta_z(self) -> float:
        return (self.v_max - self.v_min) / (self.num_atoms - 1)

    @property
    def atom_values(self) -> np.ndarray:
        return self.v_min + self.delta_z * np.arange(self.num_atoms, dtype=np.float64)


@dataclass(frozen=True)
class QuantileHead:
    """N quantile midpoints tau_i = (2i - 1) / 2N and the Huber threshold kappa."""

    num_quantiles: int = 51
    kappa: float = 1.0
    fractions: Optional[tuple[float, ...]] = field(default=None)

    def __post_init__(self) -> None:
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.num_quantiles < 1:
            raise ValueError(f"need at least one quantile, got {self.num_quantiles}")

    @classmethod
    def from_fractions(cls, fractions: list[float], kappa: float = 1.0) -> "QuantileHead":
        return cls(num_quantiles=len(fractions), kappa=kappa, fractions=tuple(fractions))

    @property
    def midpoints(self) -> np.ndarray:
        if self.fractions is not None:
            return np.asarray(self.fractions, dtype=np.float64)
        i = np.arange(1, self.num_quantiles + 1, dtype=np.float64)
        return (2.0 * i - 1.0) / (2.0 * self.num_quantiles)


@dataclass(frozen=True)
class IqnConfig:
    """Sample counts and cosine-embedding width for implicit quantile heads."""

    num_tau_samples: int = 32
    num_tau_prime_samples: int = 32
    num_quantile_samples: int = 32
    quantile_embedding_dim: int = 64

    def __post_init__(self) -> None:
        for name in (
            "num_tau_samples",
            "num_tau_prime_samples",
            "num_quantile_samples",
            "quantile_embedding_dim",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def project_batch(
    target_values: np.ndarray, target_probs: np.ndarray, support: CategoricalSupport
) -> np.ndarray:
    """Project (B, M) weighted samples onto the support, returning (B, num_atoms).

    Each value is clamped to [v_min, v_max] and its mass is split linearly
    between the two nearest atoms.
    """
    values = np.asarray(target_values, dtype=np.float64)
    probs = np.asarray(target_probs, dtype=np.float64)
    if values.shape != probs.shape or values.ndim != 2:
        raise ValueError(
            f"values {values.shape} and probabilities {probs.shape} must be equal (B, M) arrays"
        )
    position = (np.clip(values, support.v_min, support.v_max) - support.v_min) / support.delta_z
    position = np.clip(position, 0.0, support.num_atoms - 1)
    lower = np.floor(position).astype(np.int64)
    upper = np.ceil(position).astype(np.int64)
    same = lower == upper
    lower_mass = np.where(same, probs, probs * (upper - position))
    upper_mass = np.where(same, 0.0, probs * (position - lower))

    out = np.zeros((values.shape[0], support.num_atoms))
    rows = np.broadcast_to(np.arange(values.shape[0])[:, None], values.shape)
    np.add.at(out, (rows, lower), lower_mass)
    np.add.at(out, (rows, upper), upper_mass)
    return out


def categorical_project(
    target_values: np.ndarray, target_probs: np.ndarray, support: CategoricalSupport
) -> np.ndarray:
    """Project one weighted sample set onto the support.

    Args:
        target_values: Sample locations (e.g. r + gamma^h z_j)
        target_probs: Sample masses summing to one
        support: Atom grid

    Returns:
        Probabilities over the atoms

    Raises:
        ValueError: If lengths differ or the masses do not sum to one
    """
    values = np.asarray(target_values, dtype=np.float64).reshape(1, -1)
    probs = np.asarray(target_probs, dtype=np.float64).reshape(1, -1)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"target probabilities sum to {probs.sum()}, expected 1")
    return project_batch(values, probs, support)[0]


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=axis, keepdims=True))
    return shifted / shifted.sum(axis=axis, keepdims=True)


def c51_loss(predicted_logits: np.ndarray, projected_probs: np.ndarray) -> float:
    """Cross-entropy -sum_i p_i log softmax(logits)_i."""
    logits = np.asarray(predicted_logits, dtype=np.float64)
    probs = np.asarray(projected_probs, dtype=np.float64)
    if logits.shape != probs.shape:
        raise ValueError(f"atom counts differ: {logits.shape} vs {probs.shape}")
    return float(-(probs * log_softmax(logits)).sum())


def quantile_huber_loss(
    pred_quantiles: np.ndarray, target_samples: np.ndarray, head: QuantileHead
) -> float:
    """Mean over pairs (i, j) of |tau_i - 1{u_ij < 0}| L_kappa(u_ij) / kappa, u_ij = target_j - pred_i."""
    pred = np.asarray(pred_quantiles, dtype=np.float64).reshape(-1)
    target = np.asarray(target_samples, dtype=np.float64).reshape(-1)
    taus = head.midpoints
    if taus.shape != pred.shape:
        raise ValueError(f"{pred.size} predictions for {taus.size} quantile fractions")
    kappa = head.kappa
    u = target[None, :] - pred[:, None]
    abs_u = np.abs(u)
    huber = np.where(abs_u <= kappa, 0.5 * u * u, kappa * abs_u - 0.5 * kappa * kappa)
    weight = np.abs(taus[:, None] - (u < 0.0))
    return float((weight * huber / kappa).mean())


def iqn_embed(tau: float, cfg: IqnConfig, params: dict[str, np.ndarray]) -> np.ndarray:
    """phi(tau)_j = ReLU(sum_{i<d} cos(pi i tau) w_ij + b_j).

    Args:
        tau: Quantile fraction in [0, 1]
        cfg: Embedding configuration
        params: ``iqn.W`` of shape (width, d) and ``iqn.b`` of shape (width,)

    Returns:
        Embedding of the network's feature width
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"quantile fraction must lie in [0, 1], got {tau}")
    basis = np.cos(cosine_basis(cfg.quantile_embedding_dim)[0] * tau)
    return np.maximum(linear_forward(params["iqn.W"], params["iqn.b"], basis), 0.0)


def sample_tau(count: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform quantile fractions on the open interval (0, 1)."""
    if count <= 0:
        raise ValueError(f"count must be positive, got {count}")
    taus = rng.random(count)
    zero = taus == 0.0
    while zero.any():
        taus[zero] = rng.random(int(zero.sum()))
        zero = taus == 0.0
    return taus


def distribution_to_q(
    head_output: np.ndarray, head_kind: str, support: Optional[CategoricalSupport] = None
) -> np.ndarray:
    """Reduce a head output to expected action values.

    Args:
        head_output: ``c51``: probabilities (..., A, atoms); ``qr``: quantiles
            (..., A, N); ``iqn``: quantiles (B, K, A); ``scalar``: (..., A)
        head_kind: One of scalar, c51, qr, iqn
        support: Atom grid (c51 only)

    Returns:
        Action values (..., A)
    """
    out = np.asarray(head_output, dtype=np.float64)
    if head_kind == "c51":
        if support is None:
            raise ValueError("categorical heads need a support")
        return out @ support.atom_values
    if head_kind == "qr":
        return out.mean(axis=-1)
    if head_kind == "iqn":
        return out.mean(axis=-2)
    if head_kind == "scalar":
        return out
    raise ValueError(f"Unknown head kind '{head_kind}'")
