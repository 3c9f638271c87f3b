# core/detection.py
"""
Photon-number-resolving detection and heralding.

measure() splits a pure state into one branch per click pattern over the
detector modes; measured modes are reset to vacuum (consumed). herald()
keeps the branches a HeraldRule accepts, either all of them with exact
probabilities (ANALYTIC) or one pattern drawn with an explicit RNG (SAMPLED).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.codes import OutOfRange, check_probability
from core.fock import MixedState, PureState, apply_mode_unitary, branch_patterns, project_pattern, reset_modes
from core.registry import atomic_modes

logger = logging.getLogger(__name__)


class ExecutionMode(Enum):
    ANALYTIC = "analytic"
    SAMPLED = "sampled"


class OutcomeStatus(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    INDETERMINATE = "indeterminate"


# --------------------------------------------------------------------
# Patterns and corrections
# --------------------------------------------------------------------
@dataclass(frozen=True, order=True)
class ClickPattern:
    modes: Tuple[str, ...]
    counts: Tuple[int, ...]

    def __post_init__(self):
        if len(self.modes) != len(self.counts):
            raise ValueError("one count per detector mode")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def count(self, mode: str) -> int:
        return self.counts[self.modes.index(mode)]

    def clicked(self) -> Tuple[str, ...]:
        return tuple(m for m, c in zip(self.modes, self.counts) if c)

    def label(self) -> str:
        return ";".join(f"{m}={c}" for m, c in zip(self.modes, self.counts))

    def __add__(self, other: "ClickPattern") -> "ClickPattern":
        return ClickPattern(self.modes + other.modes, self.counts + other.counts)


PAULI: Dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0),
}


@dataclass(frozen=True)
class Correction:
    """A local mode unitary on qubit ``qubit``'s atomic modes (H_q, V_q)."""
    qubit: str
    name: str
    matrix: Tuple[Tuple[complex, complex], Tuple[complex, complex]]

    @classmethod
    def gate(cls, qubit, name: str, U=None) -> "Correction":
        M = PAULI[name] if U is None else np.asarray(U, dtype=complex)
        return cls(str(qubit), name, tuple(tuple(complex(x) for x in row) for row in M))

    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex)

    def label(self) -> str:
        return f"{self.name}{self.qubit}"


def apply_corrections(state: Union[PureState, MixedState], corrections: Sequence[Correction]):
    if isinstance(state, MixedState):
        return state.map(lambda b: apply_corrections(b, corrections))
    for c in corrections:
        state = apply_mode_unitary(state, atomic_modes(c.qubit), c.array())
    return state


# --------------------------------------------------------------------
# Herald rules and branches
# --------------------------------------------------------------------
@dataclass(frozen=True)
class HeraldRule:
    name: str
    accept: Callable[[ClickPattern], bool]
    corrections: Callable[[ClickPattern], Tuple[Correction, ...]] = lambda _p: ()
    classify: Optional[Callable[[ClickPattern], OutcomeStatus]] = None

    def status(self, pattern: ClickPattern) -> OutcomeStatus:
        if self.accept(pattern):
            return OutcomeStatus.SUCCESS
        if self.classify is not None:
            return self.classify(pattern)
        return OutcomeStatus.FAILURE


REJECT_ALL = HeraldRule("reject-all", lambda _p: False)


@dataclass(frozen=True)
class HeraldedBranch:
    pattern: ClickPattern
    probability: float
    state: MixedState
    corrections: Tuple[Correction, ...] = ()
    status: Optional[OutcomeStatus] = None
    value: Optional[int] = None

    def corrected(self) -> MixedState:
        return apply_corrections(self.state, self.corrections)


@dataclass(frozen=True)
class ProtocolOutcome:
    status: OutcomeStatus
    probability: float
    branches: Tuple[HeraldedBranch, ...]
    rejected: Tuple[HeraldedBranch, ...] = ()
    consumed: Tuple[str, ...] = ()
    mode: ExecutionMode = ExecutionMode.ANALYTIC
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status is OutcomeStatus.SUCCESS

    @property
    def state(self) -> MixedState:
        out = MixedState(())
        for b in self.branches:
            out = out.merge(b.state)
        return out

    @property
    def corrections(self) -> Dict[str, Tuple[Correction, ...]]:
        return {b.pattern.label(): b.corrections for b in self.branches}

    @property
    def pattern(self) -> Optional[ClickPattern]:
        return self.branches[0].pattern if len(self.branches) == 1 else None

    def corrected_state(self) -> MixedState:
        out = MixedState(())
        for b in self.branches:
            out = out.merge(b.corrected())
        return out

    def probability_of(self, status: OutcomeStatus) -> float:
        pool = self.branches + self.rejected
        return float(sum(b.probability for b in pool if b.status is status))

    def record(self) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "success": self.success,
            "probability": self.probability,
            "mode": self.mode.value,
            "consumed": list(self.consumed),
            "branches": [
                {
                    "pattern": b.pattern.label(),
                    "probability": b.probability,
                    "status": b.status.value if b.status else None,
                    "value": b.value,
                    "corrections": [c.label() for c in b.corrections],
                }
                for b in self.branches
            ],
            "details": self.details,
        }


# --------------------------------------------------------------------
# Measurement
# --------------------------------------------------------------------
def measure(state: PureState, detector_modes: Sequence[str]) -> List[Tuple[ClickPattern, float, PureState]]:
    """Complete branch decomposition; probabilities sum to the branch weight."""
    modes = tuple(str(m) for m in detector_modes)
    out: List[Tuple[ClickPattern, float, PureState]] = []
    for counts in branch_patterns(state, modes):
        branch, prob = project_pattern(state, modes, counts)
        if prob <= 0.0:
            continue
        out.append((ClickPattern(modes, counts), state.weight * prob, reset_modes(branch, modes)))
    return out


def _dark_count_spread(pattern: ClickPattern, rate: float, cutoff: int) -> List[Tuple[ClickPattern, float]]:
    if rate == 0.0:
        return [(pattern, 1.0)]
    out: List[Tuple[ClickPattern, float]] = []
    k = len(pattern.modes)
    for fired in itertools.product((0, 1), repeat=k):
        p = float(np.prod([rate if f else 1.0 - rate for f in fired]))
        counts = tuple(min(c + f, cutoff) for c, f in zip(pattern.counts, fired))
        out.append((ClickPattern(pattern.modes, counts), p))
    return out


def measure_ensemble(
    state: Union[PureState, MixedState],
    detector_modes: Sequence[str],
    dark_count: float = 0.0,
) -> List[HeraldedBranch]:
    """Measure every branch and aggregate by observed click pattern."""
    check_probability(dark_count, "dark_count")
    mixed = MixedState.of(state) if isinstance(state, PureState) else state
    agg: Dict[ClickPattern, List[PureState]] = {}
    prob: Dict[ClickPattern, float] = {}
    for b in mixed.branches:
        for pattern, p, post in measure(b, detector_modes):
            for seen, q in _dark_count_spread(pattern, dark_count, b.cutoff):
                w = p * q
                if w <= 0.0:
                    continue
                agg.setdefault(seen, []).append(post.with_weight(w))
                prob[seen] = prob.get(seen, 0.0) + w
    branches = [HeraldedBranch(pat, prob[pat], MixedState(tuple(agg[pat]))) for pat in sorted(agg)]
    logger.debug("measured %d modes: %d click patterns", len(detector_modes), len(branches))
    return branches


def click_distribution(branches: Iterable[HeraldedBranch]) -> Dict[ClickPattern, float]:
    return {b.pattern: b.probability for b in branches}


def distribution_rows(branches: Iterable[HeraldedBranch]) -> List[Dict[str, Any]]:
    return [{"pattern": b.pattern.label(), "probability": b.probability} for b in branches]


def sample_pattern(branches: Sequence[HeraldedBranch], rng: np.random.Generator) -> int:
    """Draw a branch index proportionally to branch probability."""
    probs = np.array([b.probability for b in branches], dtype=float)
    total = probs.sum()
    if total <= 0.0:
        raise OutOfRange("cannot sample from an empty distribution")
    return int(rng.choice(len(branches), p=probs / total))


def _coerce(branches) -> List[HeraldedBranch]:
    out: List[HeraldedBranch] = []
    for b in branches:
        if isinstance(b, HeraldedBranch):
            out.append(b)
        else:
            pattern, p, st = b
            mixed = st if isinstance(st, MixedState) else MixedState((st.with_weight(p),))
            out.append(HeraldedBranch(pattern, p, mixed))
    return out


def herald(
    branches,
    rule: HeraldRule,
    mode: ExecutionMode = ExecutionMode.ANALYTIC,
    rng: Optional[np.random.Generator] = None,
    consumed: Sequence[str] = (),
) -> ProtocolOutcome:
    """
    ANALYTIC: keep every accepted branch; probability is their total.
    SAMPLED: draw one pattern with ``rng`` (advanced in place); success iff
    the drawn pattern is accepted.
    """
    items = _coerce(branches)
    labelled = [replace(b, corrections=rule.corrections(b.pattern) if rule.accept(b.pattern) else (),
                        status=rule.status(b.pattern)) for b in items]
    accepted = tuple(b for b in labelled if b.status is OutcomeStatus.SUCCESS and b.probability > 0.0)
    rejected = tuple(b for b in labelled if b.status is not OutcomeStatus.SUCCESS)

    if mode is ExecutionMode.ANALYTIC:
        p = float(sum(b.probability for b in accepted))
        status = OutcomeStatus.SUCCESS if p > 0.0 else OutcomeStatus.FAILURE
        logger.info("herald %s: accepted %d/%d patterns, p=%.6g", rule.name, len(accepted), len(labelled), p)
        return ProtocolOutcome(status, p, accepted, rejected, tuple(consumed), mode)

    if rng is None:
        raise OutOfRange("sampled mode needs an explicit random generator")
    if not labelled:
        return ProtocolOutcome(OutcomeStatus.FAILURE, 0.0, (), (), tuple(consumed), mode)
    drawn = labelled[sample_pattern(labelled, rng)]
    if drawn.status is OutcomeStatus.SUCCESS:
        return ProtocolOutcome(OutcomeStatus.SUCCESS, drawn.probability, (drawn,), (), tuple(consumed), mode)
    return ProtocolOutcome(drawn.status, drawn.probability, (), (drawn,), tuple(consumed), mode)
