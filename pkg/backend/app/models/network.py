"""Network configuration model."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

HeadKind = Literal["scalar", "c51", "qr", "iqn"]


class NetworkConfig(BaseModel):
    """Declarative description of a Q-network."""

    model_config = ConfigDict(frozen=True)

    input_shape: tuple[int, ...] = Field(..., description="Observation shape")
    num_actions: int = Field(..., ge=1, description="Number of discrete actions")
    hidden_layers: int = Field(2, ge=1, description="Fully connected hidden layers")
    units: int = Field(512, ge=1, description="Units per hidden layer")
    use_conv: bool = Field(False, description="Single conv layer trunk (grid inputs)")
    conv_filters: int = Field(16, ge=1, description="Number of conv filters")
    conv_kernel: int = Field(3, ge=1, description="Square conv kernel size")
    noisy: bool = Field(False, description="Noisy fully connected layers")
    dueling: bool = Field(False, description="Value/advantage streams")
    head: HeadKind = Field("scalar", description="Output head kind")
    num_atoms: int = Field(51, description="C51 atoms or QR quantiles")
    quantile_embedding_dim: int = Field(64, ge=1, description="IQN cosine basis size")

    @model_validator(mode="after")
    def _check_head(self) -> "NetworkConfig":
        if self.head in ("c51", "qr") and self.num_atoms < 2:
            raise ValueError(
                f"head '{self.head}' needs num_atoms >= 2, got {self.num_atoms}"
            )
        if self.use_conv and len(self.input_shape) != 3:
            raise ValueError(
                f"conv trunk needs an H x W x C input, got {self.input_shape}"
            )
        if not self.use_conv and len(self.input_shape) != 1:
            raise ValueError(
                f"MLP trunk needs a flat input, got {self.input_shape}"
            )
        return self

    @property
    def head_width(self) -> int:
        """Outputs per action."""
        return self.num_atoms if self.head in ("c51", "qr") else 1

    @property
    def output_size(self) -> int:
        """Length of the flattened output for one observation."""
        return self.num_actions * self.head_width
