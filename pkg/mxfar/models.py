"""Configuration and record models shared across the toolkit"""
from enum import Enum
from typing import Optional, Literal, Any, Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from mxfar.core.types import KernelKind


class ReferenceSpec(BaseModel):
    """Where the reference signal U_t driving the coefficient functions comes from"""
    model_config = ConfigDict(frozen=True)

    source: Literal["channel", "exogenous"] = Field(default="channel", description="Lagged panel channel or exogenous series")
    channel: Optional[int] = Field(default=None, ge=1, description="1-based reference channel j* (channel source only)")
    lag: int = Field(ge=0, description="Reference lag d, U_t = S_{t-d}")

    @model_validator(mode="after")
    def _check_source(self) -> "ReferenceSpec":
        if self.source == "channel":
            if self.channel is None:
                raise ValueError("channel-sourced reference needs a channel index")
            if self.lag < 1:
                raise ValueError("channel-sourced reference must use past values (lag >= 1)")
        elif self.channel is not None:
            raise ValueError("exogenous reference takes no channel index")
        return self

    @classmethod
    def from_channel(cls, channel: int, lag: int) -> "ReferenceSpec":
        return cls(source="channel", channel=channel, lag=lag)

    @classmethod
    def exogenous(cls, lag: int = 0) -> "ReferenceSpec":
        return cls(source="exogenous", lag=lag)

    def label(self) -> str:
        if self.source == "channel":
            return f"ch{self.channel}@lag{self.lag}"
        return f"exogenous@lag{self.lag}"


class ModelConfig(BaseModel):
    """Tuning quantities of an MX-FAR fit"""
    model_config = ConfigDict(frozen=True)

    p: int = Field(ge=1, description="Autoregressive lag order")
    reference: ReferenceSpec = Field(description="Reference signal specification")
    kernel: KernelKind = Field(default=KernelKind.EPANECHNIKOV, description="Kernel function K")
    bandwidth: float = Field(gt=0, description="Kernel bandwidth h in reference-signal units")
    grid_size: int = Field(default=50, ge=2, description="Number M of grid segments")
    penalty_scale: float = Field(default=1.0, gt=0, description="Penalty scale lambda")
    grid_clip: Tuple[float, float] = Field(default=(0.01, 0.99), description="Pooled quantiles bounding the grid")
    pilot_stride: int = Field(default=5, ge=1, description="Every n-th grid point is a variance-component pilot point")
    ridge: float = Field(default=1e-8, ge=0, description="Jitter added to normal-matrix diagonals")
    variance_floor: float = Field(default=1e-8, gt=0, description="Lower bound on variance components")

    @model_validator(mode="after")
    def _check_clip(self) -> "ModelConfig":
        low, high = self.grid_clip
        if not (0.0 <= low < high <= 1.0):
            raise ValueError(f"grid_clip must satisfy 0 <= low < high <= 1, got {self.grid_clip}")
        return self

    @property
    def burn_in(self) -> int:
        """First usable 0-based time index, max(p, d)"""
        return max(self.p, self.reference.lag)

    def updated(self, **changes: Any) -> "ModelConfig":
        """Validated copy with some fields replaced"""
        data = self.model_dump()
        data.update(changes)
        return ModelConfig.model_validate(data)


class GeneratorKind(str, Enum):
    """Simulation designs"""
    EXPAR = "expar"
    SIGMOID_TWO_GROUP = "sigmoid"
    LINEAR_VAR = "var"
    TAR = "tar"
    CUSTOM = "custom"


DEFAULT_RANDOM_EFFECT_SD = {
    GeneratorKind.EXPAR: 0.03,
    GeneratorKind.SIGMOID_TWO_GROUP: 0.8,
    GeneratorKind.LINEAR_VAR: 0.0,
    GeneratorKind.TAR: 0.0,
    GeneratorKind.CUSTOM: 0.0,
}


class GeneratorSpec(BaseModel):
    """Everything needed to regenerate a simulated panel bit-exactly"""
    model_config = ConfigDict(frozen=True)

    kind: GeneratorKind = Field(description="Simulation design")
    n_subjects: int = Field(default=10, ge=1, description="Number of subjects N")
    group_sizes: Optional[List[int]] = Field(default=None, description="Subjects per group; overrides n_subjects")
    n_channels: int = Field(default=2, ge=1, description="Channels k")
    n_time: int = Field(default=500, ge=2, description="Retained length T")
    burn_in: int = Field(default=200, ge=0, description="Discarded leading samples")
    p: int = Field(default=1, ge=1, description="Lag order of the generator")
    reference_channel: int = Field(default=2, ge=1, description="1-based channel driving the coefficients")
    reference_lag: int = Field(default=2, ge=1, description="Reference lag d")
    noise_sd: float = Field(default=1.0, ge=0, description="Innovation standard deviation")
    random_effect_sd: Optional[float] = Field(default=None, ge=0, description="Subject random-effect SD; None uses the design default")
    coefficients: Optional[List[List[List[float]]]] = Field(default=None, description="Lag matrices [lag][target][source] (VAR, TAR low regime)")
    coefficients_high: Optional[List[List[List[float]]]] = Field(default=None, description="TAR high-regime lag matrices")
    threshold: float = Field(default=0.0, description="TAR threshold on the reference")
    bound: float = Field(default=1e6, gt=0, description="Boundedness guard on |Y|")
    max_redraws: int = Field(default=50, ge=0, description="Random-effect redraws allowed for an unbounded subject")
    seed: int = Field(default=0, ge=0, description="Root seed")

    @model_validator(mode="after")
    def _check_groups(self) -> "GeneratorSpec":
        if self.group_sizes is not None:
            if not self.group_sizes or any(size < 1 for size in self.group_sizes):
                raise ValueError("group_sizes must be a non-empty list of positive sizes")
        if self.reference_channel > self.n_channels:
            raise ValueError("reference_channel exceeds n_channels")
        return self

    @property
    def resolved_group_sizes(self) -> List[int]:
        if self.group_sizes is not None:
            return list(self.group_sizes)
        if self.kind == GeneratorKind.SIGMOID_TWO_GROUP:
            return [10, 10]
        return [self.n_subjects]

    @property
    def total_subjects(self) -> int:
        return sum(self.resolved_group_sizes)

    @property
    def resolved_random_effect_sd(self) -> float:
        if self.random_effect_sd is not None:
            return self.random_effect_sd
        return DEFAULT_RANDOM_EFFECT_SD[self.kind]


class RunManifest(BaseModel):
    """Record of one command-line run"""
    command: str = Field(description="Subcommand name")
    config: Dict[str, Any] = Field(description="Fully resolved flags")
    seed: Optional[int] = Field(default=None, description="Root seed, when the command is random")
    inputs: Dict[str, str] = Field(default_factory=dict, description="Input path -> sha256 digest")
    outputs: Dict[str, str] = Field(default_factory=dict, description="Output file -> sha256 digest")
    tool_version: str = Field(description="mxfar version")
    duration_seconds: float = Field(ge=0, description="Wall-clock duration")
    created_at: Optional[str] = Field(default=None, description="UTC timestamp")
