"""Q-network assembly from a :class:`NetworkConfig`."""

import copy
import hashlib
from typing import Optional

import numpy as np

from backend.app.models.network import NetworkConfig
from backend.app.networks.autodiff import ComputeGraph, forward
from backend.app.networks.layers import (
    LayerSpec,
    add_conv,
    add_dueling,
    add_linear,
    sample_factorised_noise,
)

OBSERVATION = "obs"
TAU = "tau"


class QNetwork:
    """Parameter set plus topology for one Q-network.

    Head outputs by kind, for a batch of B observations:

    * ``scalar``: (B, A) action values
    * ``c51``: (B, A, num_atoms) logits
    * ``qr``: (B, A, N) quantile values
    * ``iqn``: (B, K, A) quantile values at the K supplied fractions
    """

    def __init__(self, cfg: NetworkConfig, params: dict[str, np.ndarray]) -> None:
        """Initialize network.

        Args:
            cfg: Network configuration
            params: Parameter arrays keyed by leaf name
        """
        self.cfg = cfg
        self.layers = _layer_specs(cfg)
        self.params = params
        self._graphs: dict[int, tuple[ComputeGraph, str]] = {}

    # -- topology -----------------------------------------------------------

    @property
    def noisy_layers(self) -> list[LayerSpec]:
        return [spec for spec in self.layers.values() if spec.noisy]

    @property
    def feature_size(self) -> int:
        """Width of the trunk output fed to the head."""
        return self.cfg.units

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def build(self, graph: ComputeGraph, obs: str, num_taus: int = 0) -> str:
        """Add this network's nodes to ``graph`` and return the head output.

        Args:
            graph: Graph to extend; parameter leaves are declared on it
            obs: Reference to a (B, *input_shape) observation tensor
            num_taus: Quantile fractions per observation (IQN only); a
                ``tau`` leaf of shape (B * num_taus, 1) is declared

        Returns:
            Reference to the head output
        """
        cfg = self.cfg
        x = obs
        if cfg.use_conv:
            h, w, c = cfg.input_shape
            x = add_conv(graph, x, "conv", cfg.conv_kernel, c, cfg.conv_filters)
            x = graph.reshape(x, (-1, self.layers["fc0"].n_in))
        for index in range(cfg.hidden_layers):
            x = graph.relu(add_linear(graph, x, self.layers[f"fc{index}"]))

        if cfg.head == "iqn":
            if num_taus < 1:
                raise ValueError("an implicit quantile head needs num_taus >= 1")
            x = self._add_quantile_embedding(graph, x, num_taus)

        width = cfg.head_width
        actions = cfg.num_actions
        if cfg.dueling:
            value = add_linear(graph, x, self.layers["value"])
            advantage = add_linear(graph, x, self.layers["advantage"])
            if width > 1:
                value = graph.reshape(value, (-1, 1, width))
                advantage = graph.reshape(advantage, (-1, actions, width))
            out = add_dueling(graph, value, advantage)
        else:
            out = add_linear(graph, x, self.layers["output"])
            if width > 1:
                out = graph.reshape(out, (-1, actions, width))

        if cfg.head == "iqn":
            out = graph.reshape(out, (-1, num_taus, actions))
        graph.set_output(out)
        return out

    def _add_quantile_embedding(self, graph: ComputeGraph, features: str, num_taus: int) -> str:
        """psi(x) * phi(tau) with phi(tau)_j = ReLU(sum_i cos(pi i tau) w_ij + b_j)."""
        dim = self.cfg.quantile_embedding_dim
        tau = graph.leaf(TAU, (None, 1), requires_grad=False)
        index = graph.leaf("iqn.basis", (1, dim), requires_grad=False)
        basis = graph.cos(graph.mul(tau, index))
        phi = graph.relu(add_linear(graph, basis, self.layers["iqn"]))
        psi = graph.repeat(features, num_taus)
        return graph.mul(psi, phi)

    def graph(self, num_taus: int = 0) -> tuple[ComputeGraph, str]:
        """Inference graph (cached per number of quantile fractions)."""
        if num_taus not in self._graphs:
            graph = ComputeGraph()
            obs = graph.leaf(OBSERVATION, (None,) + tuple(self.cfg.input_shape), requires_grad=False)
            out = self.build(graph, obs, num_taus)
            self._graphs[num_taus] = (graph, out)
        return self._graphs[num_taus]

    # -- evaluation ----------------------------------------------------------

    def zero_noise(self) -> dict[str, np.ndarray]:
        noise: dict[str, np.ndarray] = {}
        for spec in self.noisy_layers:
            noise[f"{spec.name}.eps_w"] = np.zeros((spec.n_out, spec.n_in))
            noise[f"{spec.name}.eps_b"] = np.zeros(spec.n_out)
        return noise

    def sample_noise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        noise: dict[str, np.ndarray] = {}
        for spec in self.noisy_layers:
            eps_w, eps_b = sample_factorised_noise(spec.n_in, spec.n_out, rng)
            noise[f"{spec.name}.eps_w"] = eps_w
            noise[f"{spec.name}.eps_b"] = eps_b
        return noise

    def leaf_values(
        self,
        noise: Optional[dict[str, np.ndarray]] = None,
        taus: Optional[np.ndarray] = None,
    ) -> dict[str, np.ndarray]:
        """Parameter, noise and quantile-fraction leaves (everything but observations)."""
        values: dict[str, np.ndarray] = dict(self.params)
        if self.noisy_layers:
            values.update(noise if noise is not None else self.zero_noise())
        if self.cfg.head == "iqn":
            if taus is None:
                raise ValueError("an implicit quantile head needs quantile fractions")
            values[TAU] = np.asarray(taus, dtype=np.float64).reshape(-1, 1)
            values["iqn.basis"] = cosine_basis(self.cfg.quantile_embedding_dim)
        return values

    def forward(
        self,
        obs: np.ndarray,
        noise: Optional[dict[str, np.ndarray]] = None,
        taus: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Evaluate the head for a batch of observations.

        Args:
            obs: (B, *input_shape) observations
            noise: Noise for noisy layers (zero noise when omitted)
            taus: (B, K) quantile fractions for an IQN head

        Returns:
            Head output, see the class docstring for shapes
        """
        obs = np.asarray(obs, dtype=np.float64)
        num_taus = 0
        if self.cfg.head == "iqn":
            if taus is None:
                raise ValueError("an implicit quantile head needs quantile fractions")
            taus = np.asarray(taus, dtype=np.float64)
            num_taus = taus.shape[1]
        graph, out = self.graph(num_taus)
        leaves = self.leaf_values(noise, taus)
        leaves[OBSERVATION] = obs
        return forward(graph, leaves)[out].data

    # -- parameters -----------------------------------------------------------

    def clone(self) -> "QNetwork":
        """Independent copy with identical parameters."""
        return QNetwork(self.cfg, copy.deepcopy(self.params))

    def load_parameters(self, other: "QNetwork") -> None:
        """Overwrite parameters with a bitwise copy of ``other``'s."""
        for name, value in other.params.items():
            self.params[name] = value.copy()

    def parameter_digest(self) -> str:
        """Hash of all parameter bytes."""
        digest = hashlib.sha256()
        for name in sorted(self.params):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.params[name]).tobytes())
        return digest.hexdigest()


def cosine_basis(dim: int) -> np.ndarray:
    """pi * i for i in 0..dim-1, shaped (1, dim)."""
    return (np.pi * np.arange(dim, dtype=np.float64)).reshape(1, dim)


def _layer_specs(cfg: NetworkConfig) -> dict[str, LayerSpec]:
    specs: dict[str, LayerSpec] = {}
    if cfg.use_conv:
        h, w, _ = cfg.input_shape
        k = cfg.conv_kernel
        if k > h or k > w:
            raise ValueError(f"kernel {k}x{k} larger than input {h}x{w}")
        n_in = (h - k + 1) * (w - k + 1) * cfg.conv_filters
    else:
        n_in = int(cfg.input_shape[0])

    for index in range(cfg.hidden_layers):
        specs[f"fc{index}"] = LayerSpec(f"fc{index}", n_in, cfg.units, cfg.noisy)
        n_in = cfg.units

    if cfg.head == "iqn":
        specs["iqn"] = LayerSpec("iqn", cfg.quantile_embedding_dim, cfg.units)

    width = cfg.head_width
    if cfg.dueling:
        specs["value"] = LayerSpec("value", n_in, width, cfg.noisy)
        specs["advantage"] = LayerSpec("advantage", n_in, cfg.num_actions * width, cfg.noisy)
    else:
        specs["output"] = LayerSpec("output", n_in, cfg.num_actions * width, cfg.noisy)
    return specs


def build_q_network(cfg: NetworkConfig, seed: int = 0) -> QNetwork:
    """Build a network with seeded initial parameters.

    Deterministic streams are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)];
    noisy streams start at the constant 0.5/sqrt(fan_in).

    Args:
        cfg: Network configuration
        seed: Initialization seed

    Returns:
        Freshly initialized network
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    if cfg.use_conv:
        channels = cfg.input_shape[2]
        k = cfg.conv_kernel
        fan_in = k * k * channels
        bound = 1.0 / np.sqrt(fan_in)
        params["conv.filters"] = rng.uniform(-bound, bound, (k, k, channels, cfg.conv_filters))
        params["conv.b"] = rng.uniform(-bound, bound, cfg.conv_filters)

    for spec in _layer_specs(cfg).values():
        bound = 1.0 / np.sqrt(spec.n_in)
        params[f"{spec.name}.W"] = rng.uniform(-bound, bound, (spec.n_out, spec.n_in))
        params[f"{spec.name}.b"] = rng.uniform(-bound, bound, spec.n_out)
        if spec.noisy:
            params[f"{spec.name}.W_noisy"] = np.full((spec.n_out, spec.n_in), 0.5 * bound)
            params[f"{spec.name}.b_noisy"] = np.full(spec.n_out, 0.5 * bound)
    return QNetwork(cfg, params)
