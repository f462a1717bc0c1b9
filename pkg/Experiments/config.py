import json
import os
from typing import Any, Dict, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from MBQC_Engine.MBQC_Engine import GraphSpec, MeasurementPattern
from MBQC_Engine.compiler import wire_pattern
from Utils.helpers import ConfigError, fresh_seed, log_message, short_hash

# ---- Load .env ----
load_dotenv()

Command = Literal["run", "bound-sweep", "certify"]
Suite = Literal["correctness", "blindness", "security", "composition", "nosignaling", "all"]
SUITES = ("correctness", "blindness", "security", "composition", "nosignaling")


class ExperimentConfig(BaseModel):
    """One CLI invocation. For verify runs N counts positions; for noverify it counts resource sites."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Command = "run"
    variant: Literal["noverify", "verify"] = "verify"
    N: int = 3
    d: Tuple[int, ...] = (1,)
    graph: Literal["linear"] = "linear"
    angles: Tuple[float, ...] = ()
    bob: str = "honest"
    device: str = "honest"
    suite: Suite = "all"
    strategies: Literal["single", "pair", "none"] = "single"
    trials: Optional[int] = None
    seed: Optional[int] = None
    out: Optional[str] = None
    planted: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.N <= 0:
            raise ConfigError(f"N must be positive, got {self.N}")
        if (self.variant == "verify" or self.command == "bound-sweep") and self.N % 3:
            raise ConfigError(f"N={self.N} is not divisible by 3")
        if any(d < 1 or d % 2 == 0 for d in self.d):
            raise ConfigError(f"Code distances must be odd and positive, got {self.d}")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.angles and len(self.angles) != self.sites - 1:
            raise ConfigError(f"{self.sites}-site wire takes {self.sites - 1} angles, got {len(self.angles)}")
        return self

    @property
    def sites(self) -> int:
        return self.N // 3 if self.variant == "verify" else self.N

    def trials_or(self, default: int) -> int:
        return default if self.trials is None else self.trials

    @property
    def config_hash(self) -> str:
        return short_hash(self.model_dump(mode="json", exclude={"out"}))

    def program(self) -> Tuple[GraphSpec, MeasurementPattern]:
        return wire_pattern(self.angles or (0.0,) * (self.sites - 1))

    def with_seed(self) -> "ExperimentConfig":
        """Fill the seed from the flag, then BLINDSIM_SEED, then fresh entropy (logged)."""
        if self.seed is not None:
            return self
        env = os.getenv("BLINDSIM_SEED")
        if env:
            try:
                return self.model_copy(update={"seed": int(env)})
            except ValueError as exc:
                raise ConfigError(f"BLINDSIM_SEED={env!r} is not an integer") from exc
        seed = fresh_seed()
        log_message("info", f"No seed given; using {seed}")
        return self.model_copy(update={"seed": seed})


def load_config(path: Optional[str], **flags: Any) -> ExperimentConfig:
    """JSON config file first, explicit flags on top."""
    data: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"Cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must hold a JSON object")
    data.update({k: v for k, v in flags.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data).with_seed()
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
