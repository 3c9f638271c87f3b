# core/config.py
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional

from core.codes import ConfigError, EnsqcError, check_probability

# Numerical defaults shared by the engine
DEFAULT_CUTOFF = 3
PRUNE_TOL = 1e-14
UNITARY_TOL = 1e-12
MAX_GROUP = 4096
CLAIM_TRIALS = 100_000

OUTPUT_DIR_ENV = "ENSQC_OUTPUT_DIR"

COMMANDS = ("eme", "ghz", "cz", "grow", "sweep-loss", "verify-claims")
MODES = ("analytic", "sampled")
FORMATS = ("human", "csv", "json")
RATES = ("ideal", "derived")


@dataclass(frozen=True)
class LossModel:
    """Ensemble-coupling efficiency eta_e and detector efficiency eta_d."""
    eta_e: float = 1.0
    eta_d: float = 1.0

    def __post_init__(self):
        check_probability(self.eta_e, "eta_e")
        check_probability(self.eta_d, "eta_d")

    @classmethod
    def ideal(cls) -> "LossModel":
        return cls(1.0, 1.0)

    @classmethod
    def from_eta(cls, eta: float) -> "LossModel":
        # all loss charged to the ensemble side
        return cls(float(eta), 1.0)

    @property
    def eta(self) -> float:
        return self.eta_e * self.eta_d

    @property
    def is_lossless(self) -> bool:
        return self.eta_e == 1.0 and self.eta_d == 1.0

    @property
    def r(self) -> float:
        return 1.0 - 1.0 / (2.0 - self.eta)

    @property
    def gate_factor(self) -> float:
        return self.eta / (2.0 - self.eta)


@dataclass
class RunConfig:
    command: str = "ghz"
    p: float = 0.01
    eta_e: float = 1.0
    eta_d: float = 1.0
    cutoff: int = DEFAULT_CUTOFF
    mode: str = "analytic"
    seed: Optional[int] = None
    trials: int = 1000
    N: int = 50
    output: Optional[str] = None
    fmt: str = "human"  # or 'csv' / 'json'
    eta_grid: str = "0:1:0.05"
    rate: str = "ideal"
    processes: int = 1

    @property
    def loss_model(self) -> LossModel:
        return LossModel(self.eta_e, self.eta_d)

    def validate(self) -> "RunConfig":
        try:
            if self.command not in COMMANDS:
                raise ConfigError(f"unknown command {self.command!r}")
            if self.mode not in MODES:
                raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
            if self.fmt not in FORMATS:
                raise ConfigError(f"format must be one of {FORMATS}, got {self.fmt!r}")
            if self.rate not in RATES:
                raise ConfigError(f"rate must be one of {RATES}, got {self.rate!r}")
            check_probability(self.p, "p", open_low=self.command == "grow", open_high=True)
            check_probability(self.eta_e, "eta_e")
            check_probability(self.eta_d, "eta_d")
            if int(self.cutoff) < 1:
                raise ConfigError(f"cutoff must be >= 1, got {self.cutoff}")
            if int(self.trials) < 1:
                raise ConfigError(f"trials must be >= 1, got {self.trials}")
            if int(self.N) < 1:
                raise ConfigError(f"N must be >= 1, got {self.N}")
            if int(self.processes) < 1:
                raise ConfigError(f"processes must be >= 1, got {self.processes}")
            if self.mode == "sampled" and self.seed is None:
                raise ConfigError("a seed is mandatory in sampled mode")
            if self.seed is not None and int(self.seed) < 0:
                raise ConfigError(f"seed must be non-negative, got {self.seed}")
            parse_grid(self.eta_grid)
        except ConfigError:
            raise
        except EnsqcError as e:
            raise ConfigError(str(e)) from e
        return self

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def output_path(self) -> Optional[Path]:
        if not self.output:
            return None
        out = Path(self.output)
        base = os.environ.get(OUTPUT_DIR_ENV)
        if base and not out.is_absolute():
            out = Path(base) / out
        return out


def parse_grid(text: str):
    """'start:stop:step' (inclusive stop) -> list of floats."""
    try:
        start, stop, step = (float(x) for x in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"grid must look like start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"bad grid {text!r}")
    n = int(round((stop - start) / step))
    values = [round(start + i * step, 12) for i in range(n + 1)]
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"grid value {v} outside [0, 1]")
    return values


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {p} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return data


def resolve_config(command: str, flags: Dict[str, Any], file_values: Dict[str, Any]) -> RunConfig:
    """Flags override the config file, which overrides dataclass defaults."""
    merged: Dict[str, Any] = {}
    merged.update({k: v for k, v in file_values.items() if k != "command"})
    merged.update({k: v for k, v in flags.items() if v is not None})
    merged["command"] = command
    if command == "verify-claims":
        merged.setdefault("trials", CLAIM_TRIALS)
    try:
        cfg = RunConfig(**merged)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    return cfg.validate()
