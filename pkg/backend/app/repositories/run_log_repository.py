"""CSV persistence for run logs and aggregated curves."""

import csv
import re
from collections.abc import Sequence
from pathlib import Path
from typing import Union

from backend.app.models.experiment import CurvePoint, IterationRecord, RunLog
from backend.app.utils.logger import get_logger

logger = get_logger(__name__)

LOG_HEADER = ["iteration", "seed", "mean_return", "min_return", "max_return"]
CURVE_HEADER = ["iteration", "mean", "ci_lower", "ci_upper"]


def format_float(value: float) -> str:
    """17 significant digits, enough to read back the exact double."""
    return format(value, ".17g")


def emit_csv(rows: Sequence[Union[RunLog, CurvePoint]], path: Union[str, Path]) -> Path:
    """Write run logs or a curve as UTF-8 CSV with LF line endings.

    An empty sequence writes the curve header only.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    is_logs = bool(rows) and isinstance(rows[0], RunLog)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if is_logs:
            writer.writerow(LOG_HEADER)
            for log in rows:
                assert isinstance(log, RunLog)
                for record in log.records:
                    writer.writerow(
                        [
                            record.iteration,
                            log.seed,
                            format_float(record.mean_return),
                            format_float(record.min_return),
                            format_float(record.max_return),
                        ]
                    )
        else:
            writer.writerow(CURVE_HEADER)
            for point in rows:
                assert isinstance(point, CurvePoint)
                writer.writerow(
                    [
                        point.iteration,
                        format_float(point.mean),
                        format_float(point.ci_lower),
                        format_float(point.ci_upper),
                    ]
                )
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def read_run_logs(path: Union[str, Path]) -> list[RunLog]:
    """Read a run-log CSV back into one RunLog per seed, ordered by seed.

    Raises:
        ValueError: If the header is not the run-log schema
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != LOG_HEADER:
            raise ValueError(f"{path} is not a run-log CSV (header {header})")
        by_seed: dict[int, list[IterationRecord]] = {}
        for row in reader:
            iteration, seed, mean_return, min_return, max_return = row
            by_seed.setdefault(int(seed), []).append(
                IterationRecord(
                    iteration=int(iteration),
                    mean_return=float(mean_return),
                    min_return=float(min_return),
                    max_return=float(max_return),
                )
            )
    return [
        RunLog(seed=seed, label=path.stem, records=sorted(records, key=lambda r: r.iteration))
        for seed, records in sorted(by_seed.items())
    ]


def read_curve(path: Union[str, Path]) -> list[CurvePoint]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CURVE_HEADER:
            raise ValueError(f"{path} is not a curve CSV (header {header})")
        return [
            CurvePoint(
                iteration=int(row[0]),
                mean=float(row[1]),
                ci_lower=float(row[2]),
                ci_upper=float(row[3]),
            )
            for row in reader
        ]


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]+", "_", text)


class RunLogRepository:
    """Lays out result files under one directory per environment."""

    def __init__(self, results_dir: Union[str, Path]) -> None:
        """Initialize repository.

        Args:
            results_dir: Root directory for CSV and SVG outputs
        """
        self.results_dir = Path(results_dir)

    def env_dir(self, env_name: str) -> Path:
        return self.results_dir / _slug(env_name)

    def run_log_path(self, env_name: str, label: str) -> Path:
        return self.env_dir(env_name) / f"{_slug(label)}.csv"

    def curve_path(self, env_name: str, label: str) -> Path:
        return self.env_dir(env_name) / f"{_slug(label)}.curve.csv"

    def save_run_logs(self, env_name: str, label: str, logs: list[RunLog]) -> Path:
        return emit_csv(logs, self.run_log_path(env_name, label))

    def save_curve(self, env_name: str, label: str, curve: list[CurvePoint]) -> Path:
        return emit_csv(curve, self.curve_path(env_name, label))

    def load_run_logs(self, env_name: str, label: str) -> list[RunLog]:
        return read_run_logs(self.run_log_path(env_name, label))
