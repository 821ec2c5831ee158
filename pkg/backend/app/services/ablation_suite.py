"""Add-one / remove-one ablation suites and the sweep suites built on them."""

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from backend.app.models.experiment import ExperimentConfig, RunLog
from backend.app.services.experiment_config import experiment_from_preset
from backend.app.services.experiment_runner import run_seeds
from backend.app.utils.errors import ConfigError
from backend.app.utils.logger import get_logger, log_execution_time

logger = get_logger(__name__)

# Each Rainbow component as the agent fields that switch it on / off.
COMPONENTS_ON: dict[str, dict[str, Any]] = {
    "double": {"double": True},
    "prioritized": {"prioritized": True},
    "dueling": {"dueling": True},
    "multi_step": {"update_horizon": 3},
    "c51": {"head": "c51"},
    "noisy": {"noisy": True},
}
COMPONENTS_OFF: dict[str, dict[str, Any]] = {
    "double": {"double": False},
    "prioritized": {"prioritized": False},
    "dueling": {"dueling": False},
    "multi_step": {"update_horizon": 1},
    "c51": {"head": "scalar"},
    "noisy": {"noisy": False},
}
RAINBOW_EXTRAS = {"prioritized": True, "dueling": True, "update_horizon": 3, "noisy": True}

NETWORK_LAYERS = (1, 2, 3)
NETWORK_UNITS = (128, 256, 512)
BATCH_SIZES = (32, 64, 128, 256, 512)
LEARNING_RATES = (1e-4, 2.5e-4, 5e-4, 1e-3, 2e-3)


@dataclass
class Variant:
    """One configuration of a suite."""

    label: str
    preset: str
    agent_overrides: dict[str, Any] = field(default_factory=dict)


@dataclass
class SuitePlan:
    """Variants to run and the ones skipped, with the reason."""

    variants: list[Variant] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)


def _add_one(preset: str, components: list[str], forbidden: Optional[dict[str, str]] = None) -> SuitePlan:
    plan = SuitePlan(variants=[Variant(preset, preset)])
    for name in components:
        if forbidden and name in forbidden:
            plan.skipped[f"{preset}+{name}"] = forbidden[name]
            continue
        plan.variants.append(Variant(f"{preset}+{name}", preset, dict(COMPONENTS_ON[name])))
    return plan


def dqn_add_one() -> SuitePlan:
    return _add_one("dqn", list(COMPONENTS_ON))


def rainbow_remove_one() -> SuitePlan:
    plan = SuitePlan(variants=[Variant("rainbow", "rainbow")])
    for name, fields in COMPONENTS_OFF.items():
        plan.variants.append(Variant(f"rainbow-{name}", "rainbow", dict(fields)))
    return plan


_NON_C51 = ["double", "prioritized", "dueling", "multi_step", "noisy"]
_MUNCHAUSEN_FORBIDDEN = {
    "c51": "munchausen cannot be combined with a c51 head",
    "double": "munchausen cannot be combined with double",
}


def qr_add_one() -> SuitePlan:
    return _add_one("qr_dqn", _NON_C51)


def iqn_add_one() -> SuitePlan:
    return _add_one("iqn", _NON_C51)


def mdqn_add_one() -> SuitePlan:
    return _add_one("m_dqn", list(COMPONENTS_ON), _MUNCHAUSEN_FORBIDDEN)


def miqn_add_one() -> SuitePlan:
    return _add_one("m_iqn", _NON_C51, _MUNCHAUSEN_FORBIDDEN)


def flavours() -> SuitePlan:
    """DQN, Rainbow and the Rainbow variants with other heads or the Munchausen target."""
    return SuitePlan(
        variants=[
            Variant("dqn", "dqn"),
            Variant("rainbow", "rainbow"),
            Variant("qrainbow", "rainbow", {"head": "qr"}),
            Variant("irainbow", "rainbow", {"head": "iqn"}),
            Variant("m_rainbow", "m_dqn", dict(RAINBOW_EXTRAS)),
            Variant("m_irainbow", "m_iqn", dict(RAINBOW_EXTRAS)),
        ]
    )


def loss_optimizer() -> SuitePlan:
    plan = SuitePlan()
    for optimizer in ("adam", "rmsprop"):
        for loss in ("huber", "mse"):
            plan.variants.append(
                Variant(f"dqn_{optimizer}_{loss}", "dqn", {"optimizer": optimizer, "loss": loss})
            )
    return plan


def network_sweep() -> SuitePlan:
    plan = SuitePlan()
    for preset in ("dqn", "rainbow"):
        for layers in NETWORK_LAYERS:
            for units in NETWORK_UNITS:
                plan.variants.append(
                    Variant(
                        f"{preset}_{layers}x{units}",
                        preset,
                        {"hidden_layers": layers, "units": units},
                    )
                )
    return plan


def batch_sweep() -> SuitePlan:
    plan = SuitePlan()
    for preset in ("dqn", "rainbow"):
        for size in BATCH_SIZES:
            plan.variants.append(Variant(f"{preset}_batch{size}", preset, {"batch_size": size}))
    return plan


def lr_sweep(preset: str = "dqn") -> SuitePlan:
    return SuitePlan(
        variants=[
            Variant(f"{preset}_lr{lr:g}", preset, {"learning_rate": lr}) for lr in LEARNING_RATES
        ]
    )


SUITES: dict[str, Callable[[], SuitePlan]] = {
    "dqn_add_one": dqn_add_one,
    "rainbow_remove_one": rainbow_remove_one,
    "qr_add_one": qr_add_one,
    "iqn_add_one": iqn_add_one,
    "mdqn_add_one": mdqn_add_one,
    "miqn_add_one": miqn_add_one,
    "flavours": flavours,
    "loss_optimizer": loss_optimizer,
    "network_sweep": network_sweep,
    "batch_sweep": batch_sweep,
    "lr_sweep": lr_sweep,
}


def plan_suite(base: str) -> SuitePlan:
    """Variants of a named suite.

    Raises:
        ValueError: If the suite name is unknown
    """
    if base not in SUITES:
        raise ValueError(f"Unknown suite '{base}'. Expected one of: {', '.join(SUITES)}")
    plan = SUITES[base]()
    for label, reason in plan.skipped.items():
        logger.warning(f"Skipping {label}: {reason}")
    return plan


def suite_configs(
    base: str, env_name: str, run_overrides: Optional[dict[str, Any]] = None
) -> dict[str, ExperimentConfig]:
    """Validated config per variant label."""
    configs: dict[str, ExperimentConfig] = {}
    for variant in plan_suite(base).variants:
        run = {"label": variant.label, **(run_overrides or {})}
        configs[variant.label] = experiment_from_preset(
            env_name, variant.preset, variant.agent_overrides, run
        )
    return configs


def suite_seeds(num_seeds: int, master_seed: int = 0) -> list[int]:
    """Run i uses master_seed + i."""
    if num_seeds < 1:
        raise ValueError(f"need at least one seed, got {num_seeds}")
    return [master_seed + i for i in range(num_seeds)]


@log_execution_time
def run_ablation_suite(
    base: str,
    env_name: str,
    seeds: list[int],
    workers: int = 1,
    run_overrides: Optional[dict[str, Any]] = None,
    on_variant: Optional[Callable[[str, ExperimentConfig, list[RunLog]], None]] = None,
) -> dict[str, list[RunLog]]:
    """Run every variant of a suite over all seeds.

    Per-run failures are logged and the suite continues; a variant whose
    config is invalid is skipped the same way.

    Args:
        base: Suite name
        env_name: Environment for every variant
        seeds: Seeds run for each variant
        workers: Concurrent runs
        run_overrides: Extra ``[run]`` fields (e.g. shorter iterations)
        on_variant: Called after each variant finishes, e.g. to write CSVs

    Returns:
        Logs per variant label, in suite order
    """
    results: dict[str, list[RunLog]] = {}
    for variant in plan_suite(base).variants:
        run = {"label": variant.label, **(run_overrides or {})}
        try:
            cfg = experiment_from_preset(env_name, variant.preset, variant.agent_overrides, run)
        except ConfigError as e:
            logger.error(f"Skipping {variant.label}: {e}")
            continue
        logger.info(f"Running {variant.label} on {env_name} over {len(seeds)} seeds")
        batch = run_seeds(cfg, seeds, workers)
        results[variant.label] = batch.logs
        if on_variant is not None:
            on_variant(variant.label, cfg, batch.logs)
    return results
