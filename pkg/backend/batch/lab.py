"""Command-line entry point: train, suite, plot and trace-env."""

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any, NoReturn, Optional

from backend.app.models.experiment import CliInvocation, CurvePoint, ExperimentConfig, RunLog
from backend.app.repositories.run_log_repository import (
    RunLogRepository,
    emit_csv,
    format_float,
    read_run_logs,
)
from backend.app.services.ablation_suite import SUITES, run_ablation_suite, suite_seeds
from backend.app.services.environments import ENVIRONMENTS, trace_environment
from backend.app.services.experiment_config import (
    effective_config_lines,
    load_experiment,
    parse_overrides,
)
from backend.app.services.experiment_runner import run_seeds
from backend.app.services.plot_generator import emit_svg_plot
from backend.app.services.statistics import aggregate_ci
from backend.app.utils.errors import ConfigError, RunFailure
from backend.app.utils.logger import setup_logger
from config.config import config, ensure_directories

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUN = 2

logger = setup_logger("rainbow_lab", console=True)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="rainbow-lab",
        description="Train DQN-family agents and run component ablations.",
        epilog="Any config key can be overridden as --section.key value, e.g. --agent.gamma 0.99",
    )
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    train = sub.add_parser("train", help="Train one experiment")
    train.add_argument("--config", required=True, help="TOML experiment file")
    train.add_argument("--seed", type=int, help="Run only this seed")

    suite = sub.add_parser("suite", help="Run an ablation or sweep suite")
    suite.add_argument("--base", required=True, choices=list(SUITES), help="Suite name")
    suite.add_argument("--env", required=True, choices=sorted(ENVIRONMENTS), help="Environment")
    suite.add_argument("--seeds", type=int, default=1, help="Seeds per variant")
    suite.add_argument("--workers", type=int, help="Concurrent runs")

    plot = sub.add_parser("plot", help="Plot run-log CSVs with confidence bands")
    plot.add_argument("--in", dest="inputs", nargs="+", required=True, help="Run-log CSVs")
    plot.add_argument("--out", required=True, help="SVG output path")
    plot.add_argument("--ci", type=float, default=config.ci_level, help="Confidence level")
    plot.add_argument("--title", help="Plot title")

    trace = sub.add_parser("trace-env", help="Dump a seeded random-policy trajectory as CSV")
    trace.add_argument("--env", required=True, choices=sorted(ENVIRONMENTS), help="Environment")
    trace.add_argument("--seed", type=int, default=0, help="Environment and policy seed")
    trace.add_argument("--steps", type=int, default=1000, help="Steps to record")
    trace.add_argument("--out", help="CSV path (stdout when omitted)")
    return parser


def _split_overrides(extra: list[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    tokens = iter(extra)
    for token in tokens:
        if not token.startswith("--") or "." not in token:
            raise ConfigError(f"unexpected argument '{token}'")
        key, _, value = token[2:].partition("=")
        if not value:
            value = next(tokens, "")
            if not value:
                raise ConfigError(f"override '{key}' needs a value")
        overrides[key] = value
    return overrides


def parse_and_validate(argv: list[str]) -> CliInvocation:
    """Parse the command line and check override keys.

    Raises:
        ConfigError: On usage errors and unknown or malformed keys
    """
    parser = build_parser()
    if not argv:
        raise ConfigError(parser.format_usage().strip())
    args, extra = parser.parse_known_args(argv)
    if args.subcommand is None:
        raise ConfigError(parser.format_usage().strip())
    overrides = _split_overrides(extra)
    if overrides and args.subcommand not in ("train", "suite"):
        raise ConfigError(f"{args.subcommand} takes no config overrides")
    parse_overrides(overrides)

    fields: dict[str, Any] = {"subcommand": args.subcommand, "overrides": overrides}
    if args.subcommand == "train":
        fields.update(config_path=args.config, seed=args.seed)
    elif args.subcommand == "suite":
        if args.seeds < 1:
            raise ConfigError("--seeds must be at least 1")
        fields.update(base=args.base, env=args.env, num_seeds=args.seeds, workers=args.workers)
    elif args.subcommand == "plot":
        fields.update(inputs=args.inputs, out=args.out, ci=args.ci, title=args.title)
    else:
        if args.steps < 0:
            raise ConfigError("--steps must be non-negative")
        fields.update(env=args.env, seed=args.seed, steps=args.steps, out=args.out)
    return CliInvocation(**fields)


def _summary(cfg: ExperimentConfig, log: RunLog, csv_path: Path) -> str:
    final = log.final_window_mean(config.final_window)
    return json.dumps(
        {
            "env": cfg.env.name,
            "agent": cfg.label,
            "seed": log.seed,
            "iterations": len(log.records),
            "final_mean_return": None if math.isnan(final) else final,
            "wall_clock_seconds": round(log.wall_clock_seconds, 3),
            "config_hash": log.config_hash,
            "csv": str(csv_path),
        },
        sort_keys=True,
    )


def _repository(cfg: Optional[ExperimentConfig] = None) -> RunLogRepository:
    if cfg is not None and cfg.run.output_dir:
        return RunLogRepository(cfg.run.output_dir)
    return RunLogRepository(config.results_dir)


def cmd_train(invocation: CliInvocation) -> int:
    assert invocation.config_path is not None
    cfg = load_experiment(invocation.config_path, invocation.overrides)
    for line in effective_config_lines(cfg):
        print(line)
    seeds = [invocation.seed] if invocation.seed is not None else cfg.run.seeds
    batch = run_seeds(cfg, seeds, cfg.run.workers)
    repository = _repository(cfg)
    path = repository.save_run_logs(cfg.env.name, cfg.label, batch.logs)
    for log in batch.logs:
        print(_summary(cfg, log, path))
    if not batch.ok:
        raise RunFailure(f"{len(batch.failures)} of {len(seeds)} runs failed")
    return EXIT_OK


def cmd_suite(invocation: CliInvocation) -> int:
    assert invocation.base is not None and invocation.env is not None
    overrides = parse_overrides(invocation.overrides)
    unsupported = set(overrides) - {"run"}
    if unsupported:
        raise ConfigError(f"suite overrides may only touch [run], got {sorted(unsupported)}")
    seeds = suite_seeds(invocation.num_seeds or 1)
    workers = invocation.workers or config.max_workers
    repository = _repository()
    failed = 0

    def write_variant(label: str, cfg: ExperimentConfig, logs: list[RunLog]) -> None:
        nonlocal failed
        failed += len(seeds) - len(logs)
        path = repository.save_run_logs(cfg.env.name, label, logs)
        if len(logs) >= 2:
            repository.save_curve(cfg.env.name, label, aggregate_ci(logs, config.ci_level))
        for log in logs:
            print(_summary(cfg, log, path))

    run_ablation_suite(
        invocation.base,
        invocation.env,
        seeds,
        workers,
        run_overrides=overrides.get("run"),
        on_variant=write_variant,
    )
    if failed:
        raise RunFailure(f"{failed} runs failed")
    return EXIT_OK


def _curve(logs: list[RunLog], level: float) -> list[CurvePoint]:
    if len(logs) >= 2:
        return aggregate_ci(logs, level)
    return [
        CurvePoint(iteration=r.iteration, mean=r.mean_return, ci_lower=r.mean_return, ci_upper=r.mean_return)
        for r in logs[0].records
    ]


def cmd_plot(invocation: CliInvocation) -> int:
    assert invocation.out is not None
    curves: dict[str, list[CurvePoint]] = {}
    for name in invocation.inputs:
        path = Path(name)
        if not path.exists():
            raise ConfigError(f"input not found: {path}")
        try:
            logs = read_run_logs(path)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if not logs:
            raise ConfigError(f"{path} holds no runs")
        curves[path.stem] = _curve(logs, invocation.ci)
    title = invocation.title or ", ".join(curves)
    emit_svg_plot(curves, invocation.out, title)
    if len(curves) == 1:
        emit_csv(next(iter(curves.values())), Path(invocation.out).with_suffix(".csv"))
    return EXIT_OK


def cmd_trace_env(invocation: CliInvocation) -> int:
    assert invocation.env is not None
    rows = trace_environment(invocation.env, invocation.seed or 0, invocation.steps or 0)
    width = len(rows[0][1]) if rows else 0
    header = ["step"] + [f"s{i}" for i in range(width)] + ["action", "reward", "done"]
    handle = open(invocation.out, "w", encoding="utf-8", newline="") if invocation.out else sys.stdout
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for step, state, action, reward, done in rows:
            writer.writerow(
                [step] + [format_float(float(v)) for v in state] + [action, format_float(reward), int(done)]
            )
    finally:
        if handle is not sys.stdout:
            handle.close()
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "suite": cmd_suite,
    "plot": cmd_plot,
    "trace-env": cmd_trace_env,
}


def main(argv: Optional[list[str]] = None) -> int:
    """Dispatch a command line and map failures to exit codes.

    Returns:
        0 on success, 1 for configuration errors, 2 for run failures
    """
    argv = sys.argv[1:] if argv is None else argv
    try:
        invocation = parse_and_validate(argv)
        return COMMANDS[invocation.subcommand](invocation)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except RunFailure as e:
        logger.error(f"Run failed: {e}")
        return EXIT_RUN
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_RUN


def run() -> None:
    ensure_directories()
    sys.exit(main())


if __name__ == "__main__":
    run()
