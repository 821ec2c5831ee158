"""Bootstrapped TD targets for every head, with and without the Munchausen term.

The array functions take network outputs that were already computed, so they
can be checked against scalar evaluations directly. :func:`compute_target` and
:func:`munchausen_target` run the networks and dispatch on the head kind.
"""

from typing import Optional

import numpy as np

from backend.app.models.experiment import AgentConfig
from backend.app.models.replay import TransitionBatch
from backend.app.networks.q_network import QNetwork
from backend.app.services.distributional import (
    CategoricalSupport,
    distribution_to_q,
    log_softmax,
    project_batch,
    sample_tau,
    softmax,
)
from backend.app.utils.errors import NonFiniteError

Noise = Optional[dict[str, np.ndarray]]


def _not_done(dones: np.ndarray) -> np.ndarray:
    return 1.0 - np.asarray(dones, dtype=np.float64)


def discounts_for(gamma: float, horizons: np.ndarray) -> np.ndarray:
    """gamma ** h per sample."""
    return gamma ** np.asarray(horizons, dtype=np.float64)


def greedy_actions(q_values: np.ndarray) -> np.ndarray:
    """Argmax over the last axis; ties go to the lowest index."""
    return np.argmax(q_values, axis=-1)


def scalar_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    discounts: np.ndarray,
    next_q_target: np.ndarray,
    next_q_online: Optional[np.ndarray] = None,
) -> np.ndarray:
    """r + gamma^h * bootstrap, bootstrap zero on done.

    Args:
        rewards: (B,) n-step rewards
        dones: (B,) terminal flags
        discounts: (B,) gamma ** horizon
        next_q_target: (B, A) target-network values at s'
        next_q_online: (B, A) online values at s'; selects the action when given

    Returns:
        (B,) targets
    """
    if next_q_online is None:
        bootstrap = next_q_target.max(axis=1)
    else:
        chosen = greedy_actions(next_q_online)
        bootstrap = np.take_along_axis(next_q_target, chosen[:, None], axis=1)[:, 0]
    return rewards + discounts * (bootstrap * _not_done(dones))


def categorical_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    discounts: np.ndarray,
    next_probs_target: np.ndarray,
    next_q_select: np.ndarray,
    support: CategoricalSupport,
) -> np.ndarray:
    """Project r + gamma^h z onto the support under the selected action's distribution.

    Returns:
        (B, num_atoms) target probabilities
    """
    chosen = greedy_actions(next_q_select)
    probs = np.take_along_axis(next_probs_target, chosen[:, None, None], axis=1)[:, 0, :]
    shift = discounts * _not_done(dones)
    values = rewards[:, None] + shift[:, None] * support.atom_values[None, :]
    return project_batch(values, probs, support)


def quantile_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    discounts: np.ndarray,
    next_quantiles_target: np.ndarray,
    next_q_select: np.ndarray,
) -> np.ndarray:
    """r + gamma^h * theta_j(s', a*) for every target quantile.

    Args:
        next_quantiles_target: (B, A, N) quantile values at s'
        next_q_select: (B, A) values used to pick a*

    Returns:
        (B, N) target samples
    """
    chosen = greedy_actions(next_q_select)
    quantiles = np.take_along_axis(next_quantiles_target, chosen[:, None, None], axis=1)[:, 0, :]
    shift = discounts * _not_done(dones)
    return rewards[:, None] + shift[:, None] * quantiles


def _munchausen_bonus(
    q_current: np.ndarray, actions: np.ndarray, tau: float, alpha: float, clip_min: float
) -> np.ndarray:
    log_pi = log_softmax(q_current / tau, axis=1)
    taken = np.take_along_axis(log_pi, np.asarray(actions)[:, None], axis=1)[:, 0]
    return alpha * tau * np.maximum(taken, clip_min)


def munchausen_scalar_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    discounts: np.ndarray,
    actions: np.ndarray,
    q_current: np.ndarray,
    q_next: np.ndarray,
    tau: float,
    alpha: float,
    clip_min: float,
) -> np.ndarray:
    """r + alpha tau [ln pi(a|s)]_clip + gamma^h sum_a' pi(a'|s') (Q(s',a') - tau ln pi(a'|s')).

    pi = softmax(Q / tau) of the target network; the soft value vanishes on done.

    Raises:
        ValueError: If tau is not positive
    """
    if tau <= 0:
        raise ValueError(f"Munchausen temperature must be positive, got {tau}")
    bonus = _munchausen_bonus(q_current, actions, tau, alpha, clip_min)
    next_log_pi = log_softmax(q_next / tau, axis=1)
    next_pi = np.exp(next_log_pi)
    soft_value = (next_pi * (q_next - tau * next_log_pi)).sum(axis=1)
    return rewards + bonus + discounts * (soft_value * _not_done(dones))


def munchausen_quantile_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    discounts: np.ndarray,
    actions: np.ndarray,
    q_current: np.ndarray,
    q_next: np.ndarray,
    next_quantiles: np.ndarray,
    tau: float,
    alpha: float,
    clip_min: float,
) -> np.ndarray:
    """Per-quantile Munchausen target.

    Args:
        q_current: (B, A) expected values at s, defining pi(.|s)
        q_next: (B, A) expected values at s', defining pi(.|s')
        next_quantiles: (B, A, N) quantile values at s'

    Returns:
        (B, N) target samples
    """
    if tau <= 0:
        raise ValueError(f"Munchausen temperature must be positive, got {tau}")
    bonus = _munchausen_bonus(q_current, actions, tau, alpha, clip_min)
    next_log_pi = log_softmax(q_next / tau, axis=1)
    next_pi = np.exp(next_log_pi)
    soft = (next_pi[:, :, None] * (next_quantiles - tau * next_log_pi[:, :, None])).sum(axis=1)
    shift = discounts * _not_done(dones)
    return (rewards + bonus)[:, None] + shift[:, None] * soft


# ---------------------------------------------------------------------------
# Network-driven dispatch
# ---------------------------------------------------------------------------


def support_for(cfg: AgentConfig) -> CategoricalSupport:
    return CategoricalSupport.symmetric(cfg.num_atoms, cfg.vmax)


def expected_q(
    network: QNetwork,
    cfg: AgentConfig,
    obs: np.ndarray,
    noise: Noise,
    rng: np.random.Generator,
) -> np.ndarray:
    """(B, A) expected action values for any head.

    IQN heads average ``num_quantile_samples`` fresh fractions per observation.
    """
    head = network.cfg.head
    if head == "iqn":
        taus = sample_tau(obs.shape[0] * cfg.num_quantile_samples, rng).reshape(
            obs.shape[0], cfg.num_quantile_samples
        )
        return distribution_to_q(network.forward(obs, noise, taus), "iqn")
    out = network.forward(obs, noise)
    if head == "c51":
        return distribution_to_q(softmax(out), "c51", support_for(cfg))
    return distribution_to_q(out, head)


def _next_quantiles(
    network: QNetwork, cfg: AgentConfig, next_obs: np.ndarray, noise: Noise, rng: np.random.Generator
) -> np.ndarray:
    """(B, A, N) target quantile values at s'."""
    if network.cfg.head == "iqn":
        taus = sample_tau(next_obs.shape[0] * cfg.num_tau_prime_samples, rng).reshape(
            next_obs.shape[0], cfg.num_tau_prime_samples
        )
        return np.transpose(network.forward(next_obs, noise, taus), (0, 2, 1))
    return network.forward(next_obs, noise)


def _check_finite(values: np.ndarray) -> np.ndarray:
    if not np.isfinite(values).all():
        raise NonFiniteError("non-finite TD target", where="target computation")
    return values


def compute_target(
    cfg: AgentConfig,
    batch: TransitionBatch,
    online: QNetwork,
    target: QNetwork,
    rng: np.random.Generator,
    online_noise: Noise = None,
    target_noise: Noise = None,
) -> np.ndarray:
    """TD target for a batch: (B,) for scalar heads, (B, atoms) for C51, (B, N) for QR / IQN.

    Raises:
        NonFiniteError: If a network output or the target is NaN / Inf
    """
    if cfg.munchausen:
        return munchausen_target(cfg, batch, target, rng, target_noise)
    discounts = discounts_for(cfg.gamma, batch.horizons)
    head = target.cfg.head

    if head == "scalar":
        next_q_target = target.forward(batch.next_obs, target_noise)
        next_q_online = online.forward(batch.next_obs, online_noise) if cfg.double else None
        return _check_finite(
            scalar_target(batch.rewards, batch.dones, discounts, next_q_target, next_q_online)
        )

    if cfg.double:
        select = expected_q(online, cfg, batch.next_obs, online_noise, rng)
    else:
        select = None

    if head == "c51":
        support = support_for(cfg)
        probs = softmax(target.forward(batch.next_obs, target_noise))
        if select is None:
            select = distribution_to_q(probs, "c51", support)
        return _check_finite(
            categorical_target(batch.rewards, batch.dones, discounts, probs, select, support)
        )

    quantiles = _next_quantiles(target, cfg, batch.next_obs, target_noise, rng)
    if select is None:
        if head == "iqn":
            select = expected_q(target, cfg, batch.next_obs, target_noise, rng)
        else:
            select = quantiles.mean(axis=2)
    return _check_finite(quantile_target(batch.rewards, batch.dones, discounts, quantiles, select))


def munchausen_target(
    cfg: AgentConfig,
    batch: TransitionBatch,
    target: QNetwork,
    rng: np.random.Generator,
    target_noise: Noise = None,
) -> np.ndarray:
    """Munchausen target from the target network: (B,) for scalar heads, (B, N) otherwise.

    Raises:
        ValueError: If the temperature is not positive or the head is categorical
    """
    if cfg.munchausen_tau <= 0:
        raise ValueError(f"Munchausen temperature must be positive, got {cfg.munchausen_tau}")
    head = target.cfg.head
    if head == "c51":
        raise ValueError("munchausen targets are not defined for a c51 head")
    discounts = discounts_for(cfg.gamma, batch.horizons)
    q_current = expected_q(target, cfg, batch.obs, target_noise, rng)
    q_next = expected_q(target, cfg, batch.next_obs, target_noise, rng)
    args = (cfg.munchausen_tau, cfg.munchausen_alpha, cfg.clip_value_min)
    if head == "scalar":
        return _check_finite(
            munchausen_scalar_target(
                batch.rewards, batch.dones, discounts, batch.actions, q_current, q_next, *args
            )
        )
    quantiles = _next_quantiles(target, cfg, batch.next_obs, target_noise, rng)
    return _check_finite(
        munchausen_quantile_target(
            batch.rewards, batch.dones, discounts, batch.actions, q_current, q_next, quantiles, *args
        )
    )
