"""Strict JSON experiment configuration.

Every section rejects unknown keys.  ``schema_version`` must match
:data:`SCHEMA_VERSION`.  Loading raises :class:`~modcontract.errors.ConfigError`
for parse and validation failures alike.
"""

import hashlib
import json
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

SCHEMA_VERSION = 1

CHECK_NAMES = ("margins", "char_roots", "hierarchical", "theorem1", "empirical_contraction", "robustness")
DEFAULT_CHECKS = ("margins", "char_roots", "hierarchical", "empirical_contraction", "robustness")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Range = Tuple[float, float]


class PegEnv(_Strict):
    kind: Literal["peg"] = "peg"
    k_sur: Range = (1.0, 31.0)
    k1s: Range = (-0.01, 0.01)
    k2s: Range = (-0.01, 0.01)
    x_d: Range = (1.2, 2.8)
    f_d: Range = (-0.3, -0.05)
    x0: Range = (1.0, 3.0)
    z0: Range = (0.1, 1.0)
    tau_x: float = Field(0.0437, gt=0)
    tau_z: float = Field(0.01, gt=0)
    force_weight: float = Field(1.0, gt=0)
    dt: float = Field(5e-4, gt=0)
    horizon: float = Field(1.5, gt=0)
    transform_update: Literal["regime", "step"] = "regime"


class LtiEnv(_Strict):
    kind: Literal["lti"] = "lti"
    a: List[float] = [1.0, 0.5]
    b: List[float] = [1.0, 2.0]
    y0_box: Range = (-1.0, 1.0)
    dt: float = Field(1e-3, gt=0)
    horizon: float = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _sizes(self):
        if len(self.a) != len(self.b) or not self.a:
            raise ValueError("a and b must be non-empty and of equal length")
        if min(self.a) <= 0 or min(self.b) <= 0:
            raise ValueError("a and b must be positive")
        return self


class SecondOrderEnv(_Strict):
    kind: Literal["second_order"] = "second_order"
    lambda_d: List[float] = [1.0]
    kp: List[float] = [4.0]
    kd: List[float] = [4.0]
    branch: Literal["plus", "minus"] = "plus"
    e0_box: Range = (-1.0, 1.0)
    dt: float = Field(1e-3, gt=0)
    horizon: float = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _sizes(self):
        if not len(self.lambda_d) == len(self.kp) == len(self.kd) >= 1:
            raise ValueError("lambda_d, kp and kd must be non-empty and of equal length")
        return self


class PolicySpec(_Strict):
    zero: bool = False
    hidden: List[int] = [16, 16]
    constrained: bool = True
    floor: float = Field(1e-6, gt=0)
    flips: bool = True
    weight_range: Range = (0.5, 2.0)
    bias_scale: float = Field(0.05, ge=0)
    output_scale: Optional[List[float]] = None
    integral_gain: Optional[List[float]] = None
    gain_cap: Optional[List[float]] = None

    @field_validator("hidden")
    @classmethod
    def _hidden(cls, v):
        if any(h < 1 for h in v):
            raise ValueError("hidden layer sizes must be positive")
        return v


class VerifySpec(_Strict):
    alpha: float = Field(0.0, ge=0)
    beta: float = Field(0.5, gt=0)
    samples: int = Field(64, ge=1)
    z_box: Range = (-0.1, 1.0)
    s2_box: Range = (-1.0, 1.0)
    pairs: int = Field(3, ge=1)
    contraction_horizon: Optional[float] = Field(None, gt=0)
    d_bar: float = Field(0.01, gt=0)
    robustness_slack: float = Field(0.0, ge=0)
    checks: List[str] = list(DEFAULT_CHECKS)

    @field_validator("checks")
    @classmethod
    def _checks(cls, v):
        bad = [c for c in v if c not in CHECK_NAMES]
        if bad:
            raise ValueError(f"unknown checks {bad}; choose from {list(CHECK_NAMES)}")
        return v


class TrainSpec(_Strict):
    population: int = 16
    sigma: float = 0.02
    step_size: float = 0.005
    iterations: int = 20
    episodes_per_eval: int = 2
    constrained: Optional[bool] = None
    eval_episodes: int = Field(8, ge=1)
    sign_changes: int = Field(20, ge=0)


class ExperimentConfig(_Strict):
    schema_version: int
    seed: int = 0
    env: PegEnv | LtiEnv | SecondOrderEnv = Field(default_factory=PegEnv, discriminator="kind")
    policy: PolicySpec = PolicySpec()
    verify: VerifySpec = VerifySpec()
    train: TrainSpec = TrainSpec()
    out_dir: str = "out"

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"schema_version {v} is not supported (expected {SCHEMA_VERSION})")
        return v

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; ``out_dir`` is excluded."""
        blob = json.dumps(self.model_dump(mode="json", exclude={"out_dir"}), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_config(data)


def with_overrides(cfg: ExperimentConfig, **updates) -> ExperimentConfig:
    """Revalidated copy with top-level fields replaced."""
    data = cfg.model_dump(mode="json")
    data.update({k: v for k, v in updates.items() if v is not None})
    return parse_config(data)
