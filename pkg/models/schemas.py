"""Pydantic models for study configuration and result records."""

import os
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


DEFAULT_MASTER_SEED = 20230519

DEFAULT_T_GRID = [round(0.1 * k, 10) for k in range(31)]


class RateTable(BaseModel):
    """Tabulated (u, F(u)) pairs for one reaction of a custom model."""

    model_config = ConfigDict(frozen=True)

    u: List[float] = Field(..., min_length=2, description="Strictly increasing densities")
    f: List[float] = Field(..., min_length=2, description="Rate values F(u)")

    @model_validator(mode="after")
    def validate_lengths(self) -> "RateTable":
        if len(self.u) != len(self.f):
            raise ValueError("u and f must have the same length")
        return self


class ModelConfig(BaseModel):
    """Model selector plus parameters."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    kind: Literal["birth_death", "sis", "pure_birth", "custom"] = Field(
        "birth_death", alias="model", description="Model family"
    )
    lam: Optional[float] = Field(None, alias="lambda", ge=0, description="Birth / infection rate")
    theta: Optional[float] = Field(None, ge=0, description="Death / recovery rate")
    x: float = Field(..., description="Start density")
    jumps: Optional[List[float]] = Field(None, description="Jump sizes of a custom model")
    tables: Optional[List[RateTable]] = Field(None, description="Rate tables of a custom model")
    domain: Optional[Tuple[float, Optional[float]]] = Field(
        None, description="Custom domain [lower, upper]; null upper means unbounded"
    )
    label: Optional[str] = None

    @model_validator(mode="after")
    def validate_family(self) -> "ModelConfig":
        """Ensure each family carries the parameters it needs."""
        if self.kind in ("birth_death", "sis"):
            if self.lam is None or self.theta is None:
                raise ValueError(f"{self.kind} needs both lambda and theta")
        elif self.kind == "pure_birth":
            if self.lam is None:
                raise ValueError("pure_birth needs lambda")
        else:
            if not self.jumps or not self.tables or len(self.jumps) != len(self.tables):
                raise ValueError("custom models need one rate table per jump")
            if self.domain is None:
                raise ValueError("custom models need an explicit domain")
        return self


class FluidSection(BaseModel):
    tol: float = Field(1e-10, gt=0, description="ODE / quadrature tolerance")
    r: float = Field(2.0, description="Level for tau and fluid output")
    points: int = Field(201, ge=2, description="Rows of the fluid CSV")


class RateSection(BaseModel):
    r: float = Field(2.0, description="Level r")
    t_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_T_GRID))
    r_stop: Optional[float] = Field(None, description="Fluid horizon level for the profile")
    check_samples: int = Field(10, ge=1, description="Random levels per identity check")
    variational_samples: int = Field(20, ge=1)
    perturbed_paths: int = Field(50, ge=1)
    audit_radii: List[float] = Field(default_factory=lambda: [0.55, 0.6, 0.65])


class SimulationSection(BaseModel):
    n: int = Field(10_000, ge=1)
    r: float = 2.0
    replicas: int = Field(1_000, ge=1)
    t_max_multiplier: float = Field(10.0, gt=0)
    record_stride: int = Field(1_000, ge=1, description="Event stride of recorded paths")


class DiffusionSection(BaseModel):
    n: int = Field(10_000, ge=1)
    r: float = 2.0
    replicas: int = Field(1_000, ge=1)
    dt: Optional[float] = Field(None, gt=0)
    bridge_correction: bool = True
    noise: bool = True
    t_max_multiplier: float = Field(10.0, gt=0)


class OracleSection(BaseModel):
    n: int = Field(2, ge=1)
    r: float = 2.0
    absorb_zero: bool = True
    replicas: int = Field(100_000, ge=1)
    t_grid: List[float] = Field(default_factory=lambda: [0.25 * k for k in range(21)])
    confidence: float = Field(0.999, gt=0, lt=1)


class ExperimentSection(BaseModel):
    """Replica-experiment settings (everything except the model)."""

    n: int = Field(10_000, ge=1)
    alpha: float = Field(0.9, description="Exponent of a_n = n^alpha")
    r: float = 2.0
    t_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_T_GRID))
    replicas: int = Field(10_000, ge=1)
    engine: Literal["ssa", "diffusion"] = "ssa"
    t_max_multiplier: float = Field(10.0, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    bridge_correction: bool = True
    noise: bool = True
    confidence: float = Field(0.95, gt=0, lt=1, description="Wilson band confidence")
    min_count: int = Field(30, ge=1, description="Tail count needed for a comparison")

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v: float) -> float:
        """a_n must sit strictly between sqrt(n) and n."""
        if not 0.5 < v < 1.0:
            raise ValueError("alpha must satisfy 0.5 < alpha < 1")
        return v

    @field_validator("t_grid")
    @classmethod
    def validate_t_grid(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("t_grid cannot be empty")
        if any(t < 0 for t in v):
            raise ValueError("t_grid must be nonnegative")
        return sorted(v)


class ExperimentConfig(ExperimentSection):
    """A complete replica experiment: model plus settings plus seed."""

    model: ModelConfig
    master_seed: int = Field(DEFAULT_MASTER_SEED, ge=0, lt=2 ** 64)

    @property
    def a_n(self) -> float:
        return float(self.n) ** self.alpha


class DiffusionConfig(BaseModel):
    """Euler-Maruyama settings for the diffusion approximation."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    dt: float = Field(..., gt=0)
    bridge_correction: bool = True
    seed: int = Field(DEFAULT_MASTER_SEED, ge=0, lt=2 ** 64)
    t_max: float = Field(..., gt=0)
    noise: bool = Field(True, description="False runs the noise-free diagnostic scheme")


class StudyConfig(BaseModel):
    """The structured config file: one section per module."""

    model: ModelConfig
    fluid: FluidSection = Field(default_factory=FluidSection)
    rate: RateSection = Field(default_factory=RateSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    diffusion: DiffusionSection = Field(default_factory=DiffusionSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)

    def experiment_config(self, master_seed: int) -> ExperimentConfig:
        return ExperimentConfig(
            model=self.model, master_seed=master_seed, **self.experiment.model_dump()
        )


class HittingSample(BaseModel):
    """Outcome of one replica."""

    model_config = ConfigDict(frozen=True)

    hit: bool
    tau: float = Field(..., ge=0, description="Hitting time; censoring time when not hit")
    events: int = Field(..., ge=0, description="Jumps or steps executed")
    terminal_state: float = Field(..., description="Unscaled state X (ssa) or density Z (diffusion)")
    replica_seed: int = Field(..., ge=0, lt=2 ** 64)
    replica: int = Field(0, ge=0)
    censor_reason: Optional[Literal["extinct", "horizon"]] = Field(None, description="Empty for hits")
    clamped: int = Field(0, ge=0, description="Rate evaluations clamped to zero")

    @model_validator(mode="after")
    def validate_censoring(self) -> "HittingSample":
        if self.hit != (self.censor_reason is None):
            raise ValueError("a sample is either hit or censored, not both")
        return self


class SystemConfig(BaseModel):
    """Model for system configuration from environment variables."""

    maxConcurrentWorkers: int = Field(default=4, ge=1, description="Maximum concurrent replica batches")
    batchSize: int = Field(default=250, ge=1, description="Replicas per batch")
    logLevel: str = Field(default="INFO", description="Logging level")

    @field_validator('logLevel')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Ensure log level is valid."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        v_upper = v.upper()
        if v_upper not in valid_levels:
            raise ValueError(f"Log level must be one of {valid_levels}")
        return v_upper

    @classmethod
    def from_env(cls) -> "SystemConfig":
        return cls(
            maxConcurrentWorkers=int(os.getenv("HITTIME_WORKERS", os.cpu_count() or 4)),
            batchSize=int(os.getenv("HITTIME_BATCH_SIZE", 250)),
            logLevel=os.getenv("LOG_LEVEL", "INFO"),
        )


SUBCOMMANDS = (
    "fluid", "tau", "rate", "check", "simulate", "diffusion", "oracle", "mdp", "clt", "compare",
)


class RunConfig(BaseModel):
    """One CLI invocation."""

    subcommand: Literal[
        "fluid", "tau", "rate", "check", "simulate", "diffusion", "oracle", "mdp", "clt", "compare"
    ]
    config_path: str
    output_dir: str = "results"
    master_seed: int = Field(DEFAULT_MASTER_SEED, ge=0, lt=2 ** 64)
    workers: int = Field(4, ge=1)
    overrides: List[str] = Field(default_factory=list)

    @field_validator("config_path")
    @classmethod
    def validate_config_path(cls, v: str) -> str:
        if not os.path.isfile(v):
            raise ValueError(f"config file {v} does not exist")
        return v

    @field_validator("overrides")
    @classmethod
    def validate_overrides(cls, v: List[str]) -> List[str]:
        for item in v:
            if "=" not in item:
                raise ValueError(f"override '{item}' is not key=value")
        return v
