"""Agent assembly from component flags: action selection, gradient steps and target syncs."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from backend.app.models.experiment import AgentConfig
from backend.app.models.network import NetworkConfig
from backend.app.models.replay import Transition, TransitionBatch
from backend.app.networks.autodiff import ComputeGraph, backward, forward
from backend.app.networks.q_network import OBSERVATION, QNetwork, build_q_network
from backend.app.repositories.replay_buffer import (
    NStepAccumulator,
    PrioritizedReplayBuffer,
    ReplayBuffer,
)
from backend.app.services.distributional import QuantileHead, sample_tau
from backend.app.services.losses import add_td_loss, add_weighted_mean
from backend.app.services.optimizers import OptimizerState, apply_gradients
from backend.app.services.targets import compute_target, expected_q, greedy_actions
from backend.app.utils.errors import NonFiniteError
from backend.app.utils.logger import get_logger
from backend.app.utils.seeding import SeedStreams

logger = get_logger(__name__)

ACTIONS = "batch.actions"
TARGET = "batch.target"
WEIGHTS = "batch.weights"
LOSS_TAU = "loss.tau"


def epsilon_schedule(step: int, cfg: AgentConfig) -> float:
    """Linear decay from 1.0 to ``epsilon_train`` over ``epsilon_decay_period`` steps after warm-up."""
    if step < 0:
        raise ValueError(f"step must be non-negative, got {step}")
    steps_left = cfg.epsilon_decay_period + cfg.min_replay_history - step
    bonus = (1.0 - cfg.epsilon_train) * steps_left / cfg.epsilon_decay_period
    bonus = min(max(bonus, 0.0), 1.0 - cfg.epsilon_train)
    return cfg.epsilon_train + bonus


def network_config_for(
    cfg: AgentConfig, observation_shape: tuple[int, ...], num_actions: int
) -> NetworkConfig:
    return NetworkConfig(
        input_shape=tuple(observation_shape),
        num_actions=num_actions,
        hidden_layers=cfg.hidden_layers,
        units=cfg.units,
        use_conv=cfg.use_conv,
        noisy=cfg.noisy,
        dueling=cfg.dueling,
        head=cfg.head,
        num_atoms=cfg.num_atoms,
        quantile_embedding_dim=cfg.quantile_embedding_dim,
    )


@dataclass
class LossGraph:
    """Training graph of the online network plus the references the agent reads back."""

    graph: ComputeGraph
    prediction: str
    per_sample: str
    loss: str


def build_loss_graph(online: QNetwork, cfg: AgentConfig) -> LossGraph:
    """Weighted mean TD loss for the online network's head.

    Scalar heads use Huber or MSE on Q(s, a); C51 uses cross-entropy against
    the projected target; QR and IQN use the quantile Huber loss averaged over
    all (prediction, target) pairs.
    """
    graph = ComputeGraph()
    head = online.cfg.head
    obs = graph.leaf(OBSERVATION, (None,) + tuple(online.cfg.input_shape), requires_grad=False)
    num_taus = cfg.num_tau_samples if head == "iqn" else 0
    out = online.build(graph, obs, num_taus)
    actions = graph.leaf(ACTIONS, (None,), requires_grad=False)
    weights = graph.leaf(WEIGHTS, (None,), requires_grad=False)

    if head == "scalar":
        prediction = graph.gather(out, actions, axis=1)
        target = graph.leaf(TARGET, (None,), requires_grad=False)
        per_sample = add_td_loss(graph, prediction, target, cfg.loss, cfg.huber_delta)
    elif head == "c51":
        prediction = graph.gather(out, actions, axis=1)
        target = graph.leaf(TARGET, (None, cfg.num_atoms), requires_grad=False)
        log_probs = graph.log_softmax(prediction, axis=-1)
        per_sample = graph.scale(graph.sum(graph.mul(target, log_probs), axis=1), -1.0)
    else:
        if head == "qr":
            prediction = graph.gather(out, actions, axis=1)
            count, target_count = cfg.num_atoms, cfg.num_atoms
            tau = graph.leaf(LOSS_TAU, (1, count, 1), requires_grad=False)
        else:
            prediction = graph.gather(out, actions, axis=2)
            count, target_count = cfg.num_tau_samples, cfg.num_tau_prime_samples
            tau = graph.leaf(LOSS_TAU, (None, count, 1), requires_grad=False)
        target = graph.leaf(TARGET, (None, 1, target_count), requires_grad=False)
        residual = graph.sub(target, graph.reshape(prediction, (-1, count, 1)))
        pairwise = graph.quantile_huber(residual, tau, cfg.kappa)
        per_sample = graph.mean(graph.mean(pairwise, axis=2), axis=1)

    loss = add_weighted_mean(graph, per_sample, weights)
    return LossGraph(graph, prediction, per_sample, loss)


class Agent:
    """Online / target network pair with replay, optimizer and schedules."""

    def __init__(
        self,
        cfg: AgentConfig,
        observation_shape: tuple[int, ...],
        num_actions: int,
        seed: int = 0,
    ) -> None:
        """Initialize agent.

        Args:
            cfg: Agent configuration
            observation_shape: Shape of one (normalized) observation
            num_actions: Size of the discrete action set
            seed: Run seed; all agent randomness derives from it
        """
        self.cfg = cfg
        self.num_actions = num_actions
        self.streams = SeedStreams.from_seed(seed)
        net_cfg = network_config_for(cfg, observation_shape, num_actions)
        self.online = build_q_network(net_cfg, self.streams.init_seed)
        self.target = self.online.clone()
        self.optimizer = OptimizerState.create(
            cfg.optimizer, self.online.params, cfg.learning_rate, cfg.eps
        )
        self.replay: ReplayBuffer
        if cfg.prioritized:
            self.replay = PrioritizedReplayBuffer(
                cfg.replay_capacity,
                cfg.min_replay_history,
                priority_exponent=cfg.priority_exponent,
                importance_beta=cfg.importance_beta,
                priority_epsilon=cfg.priority_epsilon,
            )
        else:
            self.replay = ReplayBuffer(cfg.replay_capacity, cfg.min_replay_history)
        self.accumulator = NStepAccumulator(cfg.gamma, cfg.update_horizon)
        self.loss_graph = build_loss_graph(self.online, cfg)
        self.step_count = 0
        self.training_steps = 0
        self.sync_count = 0
        logger.debug(
            f"Built agent {cfg.preset} components={cfg.components} "
            f"parameters={self.online.parameter_count()}"
        )

    # -- acting ----------------------------------------------------------------

    def epsilon(self) -> float:
        return epsilon_schedule(self.step_count, self.cfg)

    def q_values(self, obs: np.ndarray, noise: Optional[dict[str, np.ndarray]] = None) -> np.ndarray:
        """Expected action values for one observation."""
        batch = np.asarray(obs, dtype=np.float64)[None]
        return expected_q(self.online, self.cfg, batch, noise, self.streams.noise)[0]

    def select_action(
        self,
        obs: np.ndarray,
        rng: Optional[np.random.Generator] = None,
        epsilon: Optional[float] = None,
    ) -> int:
        """Noisy networks act greedily under fresh noise; otherwise epsilon-greedy.

        Args:
            obs: Normalized observation
            rng: Exploration generator (the agent's own stream by default)
            epsilon: Override of the scheduled epsilon

        Returns:
            Action index; ties go to the lowest index
        """
        rng = rng if rng is not None else self.streams.exploration
        if self.cfg.noisy:
            noise = self.online.sample_noise(self.streams.noise)
            return int(greedy_actions(self.q_values(obs, noise)))
        eps = self.epsilon() if epsilon is None else epsilon
        if rng.random() < eps:
            return int(rng.integers(self.num_actions))
        return int(greedy_actions(self.q_values(obs)))

    def observe(
        self, obs: np.ndarray, action: int, reward: float, next_obs: np.ndarray, done: bool
    ) -> Optional[float]:
        """Record one environment step and run the training / sync schedule.

        Returns:
            The loss if a gradient step ran, else None
        """
        step = Transition(
            s=np.asarray(obs, dtype=np.float64),
            a=int(action),
            r=float(reward),
            s_next=np.asarray(next_obs, dtype=np.float64),
            done=bool(done),
        )
        for transition in self.accumulator.push(step):
            self.replay.append(transition)
        self.step_count += 1

        loss = None
        if self.replay.can_sample() and self.step_count % self.cfg.update_period == 0:
            loss = self.train_step()
        if self.step_count % self.cfg.target_update_period == 0:
            self.sync_target()
        return loss

    def end_episode(self) -> None:
        self.accumulator.reset()

    # -- learning --------------------------------------------------------------

    def _loss_leaves(
        self, batch: TransitionBatch, target: np.ndarray, noise: Optional[dict[str, np.ndarray]]
    ) -> dict[str, np.ndarray]:
        cfg = self.cfg
        head = self.online.cfg.head
        size = len(batch)
        taus = None
        if head == "iqn":
            taus = sample_tau(size * cfg.num_tau_samples, self.streams.noise).reshape(
                size, cfg.num_tau_samples
            )
        leaves = self.online.leaf_values(noise, taus)
        leaves[OBSERVATION] = batch.obs
        leaves[ACTIONS] = batch.actions.astype(np.float64)
        use_weights = cfg.prioritized and cfg.is_correction
        leaves[WEIGHTS] = batch.is_weights if use_weights else np.ones(size)
        if head in ("scalar", "c51"):
            leaves[TARGET] = target
        else:
            leaves[TARGET] = target.reshape(size, 1, -1)
        if head == "qr":
            leaves[LOSS_TAU] = QuantileHead(cfg.num_atoms, cfg.kappa).midpoints.reshape(1, -1, 1)
        elif head == "iqn":
            assert taus is not None
            leaves[LOSS_TAU] = taus.reshape(size, -1, 1)
        return leaves

    def train_step(self) -> float:
        """Sample a batch, take one optimizer step and refresh priorities.

        Returns:
            The batch loss

        Raises:
            ValueError: If replay holds fewer than min_replay_history transitions
            NonFiniteError: If the loss, a target or a gradient is NaN / Inf
        """
        cfg = self.cfg
        batch = self.replay.sample(cfg.batch_size, self.streams.replay)
        online_noise = target_noise = None
        if cfg.noisy:
            online_noise = self.online.sample_noise(self.streams.noise)
            target_noise = self.target.sample_noise(self.streams.noise)
        target = compute_target(
            cfg, batch, self.online, self.target, self.streams.noise, online_noise, target_noise
        )

        graph = self.loss_graph.graph
        activations = forward(graph, self._loss_leaves(batch, target, online_noise))
        loss = float(activations.output.data)
        if not np.isfinite(loss):
            raise NonFiniteError("non-finite loss", where=f"training step {self.training_steps}")
        grads = backward(graph, activations)
        apply_gradients(self.optimizer, self.online.params, grads)
        self.training_steps += 1

        if isinstance(self.replay, PrioritizedReplayBuffer):
            if self.online.cfg.head == "scalar":
                errors = target - activations[self.loss_graph.prediction].data
            else:
                errors = activations[self.loss_graph.per_sample].data
            self.replay.update_priorities(batch.indices, errors)

        logger.debug(f"train step {self.training_steps}: loss={loss:.6g}")
        return loss

    def sync_target(self) -> None:
        """Copy the online parameters into the target network bitwise."""
        self.target.load_parameters(self.online)
        self.sync_count += 1
