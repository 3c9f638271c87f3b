# core/codes.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Code:
    id: str
    title: str
    default_severity: str = "error"
    hint: str = ""


# Numerical preconditions
QS001 = Code("QS001", "Matrix is not unitary", "error",
             "Check U†U = I; element matrices must be unitary to 1e-12.")
QS002 = Code("QS002", "Registry mismatch", "error",
             "Both states must be defined over the same mode registry.")
QS003 = Code("QS003", "Parameter out of range", "error",
             "Probabilities, efficiencies and transmissivities live in [0, 1].")
QS004 = Code("QS004", "Duplicate mode", "error",
             "Optical elements need distinct target modes.")
QS005 = Code("QS005", "Unequal efficiencies", "error",
             "Loss can only be commuted to the sources when all source-side and all detector-side efficiencies agree.")
QS006 = Code("QS006", "Correction group too large", "error",
             "Use fewer generators or raise the group bound.")
QS009 = Code("QS009", "Unknown mode", "error",
             "Register the mode before referencing it.")
QS011 = Code("QS011", "Invalid cluster graph", "error",
             "Cluster graphs are simple: no self-loops.")

# Heralding outcomes in SAMPLED mode (restart signals, not crashes)
QS007 = Code("QS007", "EME round failed", "warning",
             "The round saw zero or several clicks; re-prepare the ensembles and retry.")
QS008 = Code("QS008", "Herald failed", "warning",
             "The sampled click pattern is outside the accept set.")

# Front end
QS010 = Code("QS010", "Configuration error", "error",
             "Fix the flag or config file value; see --help.")


class EnsqcError(Exception):
    """Base class; every subclass carries its diagnostic code."""
    code: Code = QS010


class NonUnitary(EnsqcError):
    code = QS001


class RegistryMismatch(EnsqcError):
    code = QS002


class OutOfRange(EnsqcError):
    code = QS003


class DuplicateMode(EnsqcError):
    code = QS004


class UnequalEfficiencies(EnsqcError):
    code = QS005


class GroupTooLarge(EnsqcError):
    code = QS006


class RoundFailed(EnsqcError):
    code = QS007


class HeraldFailed(EnsqcError):
    code = QS008


class UnknownMode(EnsqcError):
    code = QS009


class ConfigError(EnsqcError):
    code = QS010


class InvalidGraph(EnsqcError):
    code = QS011


def lookup_for_exception(exc: BaseException) -> Optional[Code]:
    if isinstance(exc, EnsqcError):
        return exc.code
    name = type(exc).__name__
    if name in ("ValueError", "TypeError"):
        return Code("QS090", name, "error", "Review arguments.")
    return None


def check_probability(value: float, name: str, *, open_low: bool = False, open_high: bool = False) -> float:
    """Validate value ∈ [0, 1] (optionally open at either end) and return it as float."""
    v = float(value)
    low_ok = v > 0.0 if open_low else v >= 0.0
    high_ok = v < 1.0 if open_high else v <= 1.0
    if not (low_ok and high_ok):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise OutOfRange(f"{name}={value!r} outside {lo}0, 1{hi}")
    return v
