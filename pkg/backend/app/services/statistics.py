"""Across-seed aggregation of run logs."""

import math
from statistics import NormalDist

import numpy as np

from backend.app.models.experiment import CurvePoint, RunLog

Z_SCORES = {0.90: 1.645, 0.95: 1.960, 0.99: 2.576}


def z_score(level: float) -> float:
    """Two-sided normal critical value; the usual levels use their tabulated values."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    for known, z in Z_SCORES.items():
        if math.isclose(level, known):
            return z
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def aggregate_ci(logs: list[RunLog], level: float = 0.95) -> list[CurvePoint]:
    """mean +/- z * s / sqrt(n) of the per-iteration mean returns.

    NaN entries (iterations in which a run finished no episode) are left out
    of that iteration's statistics.

    Raises:
        ValueError: With fewer than two logs or misaligned iteration counts
    """
    if len(logs) < 2:
        raise ValueError(f"need at least two run logs, got {len(logs)}")
    lengths = {len(log.records) for log in logs}
    if len(lengths) != 1:
        raise ValueError(f"run logs have different iteration counts: {sorted(lengths)}")
    z = z_score(level)
    table = np.array([log.mean_returns for log in logs], dtype=np.float64)

    curve = []
    for column in range(table.shape[1]):
        values = table[:, column]
        values = values[~np.isnan(values)]
        if values.size == 0:
            mean = half = math.nan
        elif values.size == 1:
            mean, half = float(values[0]), math.nan
        else:
            mean = float(values.mean())
            half = z * float(values.std(ddof=1)) / math.sqrt(values.size)
        curve.append(
            CurvePoint(iteration=column + 1, mean=mean, ci_lower=mean - half, ci_upper=mean + half)
        )
    return curve


def final_window_stats(logs: list[RunLog], window: int) -> tuple[float, float]:
    """Mean and standard error across runs of each run's final-window mean return."""
    if window < 1:
        raise ValueError(f"window must be positive, got {window}")
    finals = np.array([log.final_window_mean(window) for log in logs], dtype=np.float64)
    finals = finals[~np.isnan(finals)]
    if finals.size == 0:
        return math.nan, math.nan
    if finals.size == 1:
        return float(finals[0]), math.nan
    return float(finals.mean()), float(finals.std(ddof=1) / math.sqrt(finals.size))
