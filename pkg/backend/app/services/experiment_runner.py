"""Single runs and multi-seed batches."""

import time
from dataclasses import dataclass, field

import anyio
import anyio.to_process
import numpy as np

from backend.app.models.experiment import ExperimentConfig, IterationRecord, RunLog
from backend.app.services.agent import Agent
from backend.app.services.environments import make_env, normalize_obs
from backend.app.utils.errors import LabError, NonFiniteError, RunFailure
from backend.app.utils.logger import RunContextFilter, get_logger, log_execution_time
from backend.app.utils.seeding import SeedStreams

logger = get_logger(__name__)


def _iteration_record(iteration: int, returns: list[float]) -> IterationRecord:
    if not returns:
        return IterationRecord(iteration=iteration, episodes=0)
    return IterationRecord(
        iteration=iteration,
        episodes=len(returns),
        mean_return=float(np.mean(returns)),
        min_return=float(min(returns)),
        max_return=float(max(returns)),
    )


@log_execution_time
def run_experiment(cfg: ExperimentConfig, seed: int) -> RunLog:
    """Train one agent for ``num_iterations`` x ``steps_per_iteration`` steps.

    Episodes may straddle iteration boundaries; a return is counted in the
    iteration where its episode ends. Iterations without a finished episode
    log NaN statistics.

    Args:
        cfg: Validated experiment
        seed: Run seed

    Returns:
        Per-iteration training-return statistics

    Raises:
        RunFailure: If training produces NaN / Inf, naming iteration and step
    """
    context = RunContextFilter(cfg.env.name, cfg.label, seed)
    logger.addFilter(context)
    try:
        return _run(cfg, seed)
    finally:
        logger.removeFilter(context)


def _run(cfg: ExperimentConfig, seed: int) -> RunLog:
    started = time.perf_counter()
    env = make_env(cfg.env.name)
    spec = env.spec
    agent = Agent(cfg.agent, spec.observation_shape, spec.num_actions, seed)
    streams = SeedStreams.from_seed(seed)

    def prepare(raw: np.ndarray) -> np.ndarray:
        return normalize_obs(raw, spec) if cfg.agent.normalize_obs else np.asarray(raw, dtype=np.float64)

    obs = prepare(env.reset(streams.env_seed))
    episode_return = 0.0
    records: list[IterationRecord] = []
    for iteration in range(1, cfg.run.num_iterations + 1):
        returns: list[float] = []
        for step in range(cfg.run.steps_per_iteration):
            try:
                action = agent.select_action(obs)
                result = env.step(action)
                next_obs = prepare(result.observation)
                agent.observe(obs, action, result.reward, next_obs, result.done)
            except NonFiniteError as e:
                raise RunFailure(
                    f"non-finite value at iteration {iteration}, step {step}: {e}"
                ) from e
            episode_return += result.reward
            if result.done:
                returns.append(episode_return)
                episode_return = 0.0
                agent.end_episode()
                obs = prepare(env.reset())
            else:
                obs = next_obs
        record = _iteration_record(iteration, returns)
        records.append(record)
        logger.info(
            f"iteration {iteration}/{cfg.run.num_iterations}: episodes={record.episodes} "
            f"mean_return={record.mean_return:.2f} train_steps={agent.training_steps}"
        )

    return RunLog(
        seed=seed,
        config_hash=cfg.config_hash(),
        label=cfg.label,
        wall_clock_seconds=time.perf_counter() - started,
        records=records,
    )


@dataclass
class SeedBatch:
    """Logs of the seeds that finished and error messages of those that did not."""

    logs: list[RunLog] = field(default_factory=list)
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_isolated(cfg: ExperimentConfig, seed: int) -> tuple[int, RunLog | None, str | None]:
    try:
        return seed, run_experiment(cfg, seed), None
    except LabError as e:
        return seed, None, str(e)
    except Exception as e:
        return seed, None, f"{type(e).__name__}: {e}"


def _collect(cfg: ExperimentConfig, outcomes: list[tuple[int, RunLog | None, str | None]]) -> SeedBatch:
    batch = SeedBatch()
    for seed, log, error in sorted(outcomes, key=lambda item: item[0]):
        if log is not None:
            batch.logs.append(log)
        else:
            batch.failures[seed] = error or "unknown failure"
            logger.error(f"{cfg.env.name}/{cfg.label} seed {seed} failed: {error}")
    return batch


async def run_seeds_async(cfg: ExperimentConfig, seeds: list[int], workers: int) -> SeedBatch:
    """Run seeds in worker processes, at most ``workers`` at a time."""
    limiter = anyio.CapacityLimiter(workers)
    outcomes: list[tuple[int, RunLog | None, str | None]] = []

    async def run_one(seed: int) -> None:
        outcomes.append(
            await anyio.to_process.run_sync(_run_isolated, cfg, seed, limiter=limiter)
        )

    async with anyio.create_task_group() as tg:
        for seed in seeds:
            tg.start_soon(run_one, seed)
    return _collect(cfg, outcomes)


def run_seeds(cfg: ExperimentConfig, seeds: list[int], workers: int = 1) -> SeedBatch:
    """Run every seed; failures are isolated per seed.

    With one worker the seeds run sequentially in this process; the result
    is identical either way.
    """
    if workers <= 1 or len(seeds) <= 1:
        return _collect(cfg, [_run_isolated(cfg, seed) for seed in seeds])
    return anyio.run(run_seeds_async, cfg, seeds, workers)
