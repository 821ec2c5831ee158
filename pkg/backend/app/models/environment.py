"""Environment description models."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class EnvSpec(BaseModel):
    """Static description of an environment."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Environment name")
    observation_shape: tuple[int, ...] = Field(..., description="Raw observation shape")
    num_actions: int = Field(..., ge=2, description="Discrete action count")
    max_episode_steps: int = Field(..., gt=0, description="Time limit")
    obs_bounds: Optional[tuple[float, ...]] = Field(
        None, description="Per-dimension magnitude used for normalization; None for grids"
    )

    @model_validator(mode="after")
    def _check_bounds(self) -> "EnvSpec":
        if self.obs_bounds is not None:
            if len(self.observation_shape) != 1 or len(self.obs_bounds) != self.observation_shape[0]:
                raise ValueError(
                    f"{len(self.obs_bounds)} bounds for observation shape {self.observation_shape}"
                )
            if any(not np.isfinite(b) or b <= 0 for b in self.obs_bounds):
                raise ValueError(f"bounds must be finite and positive, got {self.obs_bounds}")
        return self


@dataclass
class StepResult:
    """Outcome of one environment step."""

    observation: np.ndarray
    reward: float
    done: bool
