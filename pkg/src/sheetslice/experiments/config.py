"""Experiment configuration model and config hashing."""
import hashlib
import json
import re
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.randfield import GridSpec
from ..core.setkit import CompactSet1D
from ..errors import ConfigurationError

# Fields that select which trials run; they do not change what a trial computes.
TRIAL_FIELDS = frozenset({"trials", "trial_start"})

LADDER_FIELDS = ("r_ladder", "rho_ladder", "eps_ladder", "k_ladder", "alpha_ladder", "widths")

_GRID_PATTERN = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")


def parse_grid(text: str) -> tuple[int, int]:
    """Parse ``"256x512"`` into (256, 512)."""
    match = _GRID_PATTERN.match(str(text))
    if not match:
        raise ConfigurationError(f"grid must look like 256x256, got '{text}'")
    return int(match.group(1)), int(match.group(2))


class ExperimentConfig(BaseModel):
    """Everything a run depends on; two runs with equal configs draw the same samples."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    dim: Optional[int] = Field(default=None, ge=1)
    grid: str = "256x256"
    s_max: float = Field(default=2.0, gt=0)
    t_max: float = Field(default=2.0, gt=0)
    set: str = "1,2"
    reference_set: Optional[str] = None
    r: Optional[float] = Field(default=None, gt=0)
    s: float = Field(default=1.0, gt=0)
    r_ladder: list[float] = Field(default_factory=list)
    rho_ladder: list[float] = Field(default_factory=list)
    eps_ladder: list[float] = Field(default_factory=list)
    k_ladder: list[int] = Field(default_factory=list)
    alpha_ladder: list[float] = Field(default_factory=list)
    widths: list[float] = Field(default_factory=list)
    psi_table: Optional[list[list[float]]] = None
    trials: int = Field(default=1, ge=1)
    trial_start: int = Field(default=0, ge=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    steps: int = Field(default=256, ge=2)
    epochs: int = Field(default=12, ge=1)
    columns: int = Field(default=32, ge=1)
    threshold_n: float = Field(default=2.0, gt=0)
    beta: Optional[float] = None
    kernel: str = "riesz"
    eps: Optional[float] = Field(default=None, gt=0)
    atoms: int = Field(default=256, ge=2)
    atom_ladder: list[int] = Field(default_factory=list)
    m: int = Field(default=1, ge=1)
    pairs: int = Field(default=20, ge=1)
    scales: int = Field(default=10, ge=1)
    target: Optional[float] = None
    tolerance: Optional[float] = Field(default=None, gt=0)
    level_ratio: Optional[float] = Field(default=None, gt=0)
    nodes: int = Field(default=2000, ge=10)
    members: list[str] = Field(default_factory=list)

    @field_validator(*LADDER_FIELDS)
    @classmethod
    def _sorted_ladder(cls, values: list, info) -> list:
        if any(v <= 0 for v in values):
            raise ValueError(f"{info.field_name} entries must be positive")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"{info.field_name} must be strictly increasing, got {values}")
        return values

    @field_validator("grid")
    @classmethod
    def _grid_shape(cls, value: str) -> str:
        ns, nt = parse_grid(value)
        if ns < 2 or nt < 2:
            raise ValueError(f"grid needs at least 2x2 cells, got {value}")
        return f"{ns}x{nt}"

    @field_validator("set", "reference_set")
    @classmethod
    def _parsable_set(cls, value: Optional[str]) -> Optional[str]:
        if value is None:
            return value
        return CompactSet1D.from_text(value).to_text()

    @model_validator(mode="after")
    def _grid_fits(self) -> "ExperimentConfig":
        if self.dim is not None:
            self.grid_spec()
        return self

    @property
    def F(self) -> CompactSet1D:
        return CompactSet1D.from_text(self.set)

    @property
    def reference(self) -> Optional[CompactSet1D]:
        return None if self.reference_set is None else CompactSet1D.from_text(self.reference_set)

    @property
    def trial_range(self) -> tuple[int, int]:
        return self.trial_start, self.trial_start + self.trials

    def grid_spec(self) -> GridSpec:
        """GridSpec over [0, s_max] x [0, t_max] carrying this config's dim and seed."""
        if self.dim is None:
            raise ConfigurationError(f"experiment '{self.name}' needs dim")
        ns, nt = parse_grid(self.grid)
        return GridSpec(self.s_max, self.t_max, ns, nt, self.dim, self.seed)

    def hashed_fields(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude=set(TRIAL_FIELDS))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every field except the trial range."""
        canonical = json.dumps(self.hashed_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_trials(self, trials: int, trial_start: int = 0) -> "ExperimentConfig":
        return self.model_copy(update={"trials": trials, "trial_start": trial_start})


def build_config(name: str, *layers: dict[str, Any]) -> ExperimentConfig:
    """Merge key-value layers (later wins, ``None`` skipped) into a validated config.

    Raises:
        ConfigurationError: If a value is invalid or a key unknown
    """
    merged: dict[str, Any] = {}
    for layer in layers:
        merged.update({k.replace("-", "_"): v for k, v in layer.items() if v is not None})
    merged["name"] = name
    try:
        return ExperimentConfig(**merged)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration for '{name}': {e}") from e
