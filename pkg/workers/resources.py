# workers/resources.py
"""
Pulse-count ledger and Monte Carlo of the incremental growth strategy.

Stage model (per successful unit):
  EME          two heralded rounds, one pulse per round attempt (ideal rate p)
  3-cluster    Bernoulli(1/32), three EMEs per attempt
  4-cluster    Bernoulli(1/2), two 3-clusters per attempt
  seed         one 4-cluster starts the main cluster (size 4)
  bonding      one 4-cluster per attempt; +2 qubits on success, -1 on failure
N counts qubits added to the seed.
Failed-fusion fragments are not recycled.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.linalg import solve

from core.codes import OutOfRange, check_probability
from core.config import DEFAULT_CUTOFF
from workers.pool import map_ordered
from workers.protocols import eme_round_success_probability

logger = logging.getLogger(__name__)

THREE_CLUSTER_SUCCESS = 1.0 / 32.0
FOUR_CLUSTER_SUCCESS = 0.5
BONDING_SUCCESS = 0.5
SEED_SIZE = 4


@dataclass(frozen=True)
class CostLedger:
    p: float
    eme_cost: float
    three_cluster_cost: float
    four_cluster_cost: float
    per_qubit_cost: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "p": self.p,
            "eme_cost": self.eme_cost,
            "three_cluster_cost": self.three_cluster_cost,
            "four_cluster_cost": self.four_cluster_cost,
            "per_qubit_cost": self.per_qubit_cost,
        }


def expected_costs(p: float) -> CostLedger:
    check_probability(p, "p", open_low=True)
    eme = 2.0 / p
    three = 3 * 32 * eme
    four = 2 * 2 * three
    return CostLedger(float(p), eme, three, four, 2 * four)


def bonding_success_probability(eta: float = 1.0) -> float:
    """Both heralding photons must survive: (1/2)·g², g = eta/(2 - eta)."""
    check_probability(eta, "eta", open_low=True)
    g = eta / (2.0 - eta)
    return 0.5 * g * g


def expected_bonding_attempts(N: int, success: float = BONDING_SUCCESS, gain: int = 2, setback: int = 1,
                              start: int = 0) -> float:
    """Exact mean attempts for the floored walk to grow from ``start`` to size >= start + N."""
    if N < 1:
        raise OutOfRange(f"N must be >= 1, got {N}")
    if start < 0:
        raise OutOfRange(f"start must be >= 0, got {start}")
    check_probability(success, "success", open_low=True)
    target = start + N
    A = np.eye(target)
    b = np.ones(target)
    for x in range(target):
        up = x + gain
        if up < target:
            A[x, up] -= success
        A[x, max(x - setback, 0)] -= 1.0 - success
    return float(solve(A, b)[start])


# --------------------------------------------------------------------
# Trial records
# --------------------------------------------------------------------
@dataclass(frozen=True)
class GrowthTrialRecord:
    N: int
    pulses: int
    attempts: int
    trajectory: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.pulses < 0 or any(s < 0 for s in self.trajectory):
            raise OutOfRange("pulses and trajectory sizes must be non-negative")


@dataclass
class GrowthStats:
    N: int
    p: float
    eta: float
    trials: int
    mean_pulses: float
    stderr: float
    mean_attempts: float
    records: List[GrowthTrialRecord] = field(default_factory=list)

    @property
    def attempts_per_qubit(self) -> float:
        return self.mean_attempts / self.N

    def row(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "p": self.p,
            "eta": self.eta,
            "trials": self.trials,
            "mean_pulses": self.mean_pulses,
            "stderr": self.stderr,
            "mean_attempts": self.mean_attempts,
        }


@dataclass(frozen=True)
class ComponentStats:
    p: float
    trials: int
    mean_eme_pulses: float
    mean_three_cluster_pulses: float
    mean_four_cluster_pulses: float

    def row(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "trials": self.trials,
            "mean_eme_pulses": self.mean_eme_pulses,
            "mean_three_cluster_pulses": self.mean_three_cluster_pulses,
            "mean_four_cluster_pulses": self.mean_four_cluster_pulses,
        }


# --------------------------------------------------------------------
# Sampling primitives
# --------------------------------------------------------------------
def _round_rate(p: float, rate: str, cutoff: int) -> Tuple[float, int]:
    """(success probability per round attempt, pulses per attempt)."""
    if rate == "ideal":
        return p, 1
    if rate == "derived":
        # one write pulse on each ensemble per attempt
        return eme_round_success_probability(p, 1.0, cutoff), 2
    raise OutOfRange(f"unknown EME rate model {rate!r}")


def _attempts_for(rng: np.random.Generator, successes: int, prob: float) -> int:
    """Bernoulli(prob) attempts needed for ``successes`` successes."""
    if successes <= 0:
        return 0
    if prob >= 1.0:
        return successes
    return successes + int(rng.negative_binomial(successes, prob))


def eme_pulses(rng: np.random.Generator, n_eme: int, q: float, pulses_per_attempt: int = 1) -> int:
    return pulses_per_attempt * _attempts_for(rng, 2 * n_eme, q)


def three_cluster_pulses(rng: np.random.Generator, n_three: int, q: float, pulses_per_attempt: int = 1) -> int:
    a3 = _attempts_for(rng, n_three, THREE_CLUSTER_SUCCESS)
    return eme_pulses(rng, 3 * a3, q, pulses_per_attempt)


def four_cluster_pulses(rng: np.random.Generator, n_four: int, q: float, pulses_per_attempt: int = 1) -> int:
    a4 = _attempts_for(rng, n_four, FOUR_CLUSTER_SUCCESS)
    return three_cluster_pulses(rng, 2 * a4, q, pulses_per_attempt)


def bonding_steps(rng: np.random.Generator, n: int, success: float = BONDING_SUCCESS) -> np.ndarray:
    """Unfloored walk increments: +2 with probability ``success``, else -1."""
    return np.where(rng.random(n) < success, 2, -1)


def grow_walk(rng: np.random.Generator, N: int, success: float = BONDING_SUCCESS,
              keep_trajectory: bool = False, start: int = 0) -> Tuple[int, Tuple[int, ...]]:
    """
    Floored walk from size ``start`` until size >= start + N. Returns
    (attempts, trajectory). A chunk of increments is reflected at 0 in one
    pass: S_k = C_k - min(0, min_{j<=k} C_j).
    """
    size, attempts = start, 0
    target = start + N
    chunk = max(64, 4 * N)
    path: List[int] = [start] if keep_trajectory else []
    while True:
        C = size + np.cumsum(bonding_steps(rng, chunk, success))
        S = C - np.minimum(np.minimum.accumulate(C), 0)
        hit = np.flatnonzero(S >= target)
        if hit.size:
            k = int(hit[0])
            attempts += k + 1
            if keep_trajectory:
                path.extend(int(x) for x in S[:k + 1])
            return attempts, tuple(path)
        attempts += chunk
        size = int(S[-1])
        if keep_trajectory:
            path.extend(int(x) for x in S)


# --------------------------------------------------------------------
# Monte Carlo drivers
# --------------------------------------------------------------------
def _growth_trial(trial: int, N: int, p: float, seed: int, success: float, rate: str, cutoff: int,
                  keep_trajectory: bool) -> GrowthTrialRecord:
    rng = np.random.default_rng([seed, trial])
    q, per_attempt = _round_rate(p, rate, cutoff)
    attempts, path = grow_walk(rng, N, success, keep_trajectory, start=SEED_SIZE)
    pulses = four_cluster_pulses(rng, attempts + 1, q, per_attempt)
    return GrowthTrialRecord(N, pulses, attempts, path)


def _summarize(records: List[GrowthTrialRecord], N: int, p: float, eta: float, keep: bool) -> GrowthStats:
    pulses = np.array([r.pulses for r in records], dtype=float)
    attempts = np.array([r.attempts for r in records], dtype=float)
    stderr = float(pulses.std(ddof=1) / np.sqrt(len(pulses))) if len(pulses) > 1 else 0.0
    stats = GrowthStats(N, float(p), float(eta), len(records), float(pulses.mean()), stderr,
                        float(attempts.mean()), records if keep else [])
    logger.info("growth N=%d p=%g eta=%g: %d trials, mean pulses %.6g ± %.3g, mean attempts %.4g",
                N, p, eta, stats.trials, stats.mean_pulses, stats.stderr, stats.mean_attempts)
    return stats


def _run_growth(N: int, p: float, trials: int, seed: int, success: float, eta: float, rate: str,
                cutoff: int, processes: int, keep_records: bool) -> GrowthStats:
    if N < 1:
        raise OutOfRange(f"N must be >= 1, got {N}")
    if trials < 1:
        raise OutOfRange(f"trials must be >= 1, got {trials}")
    check_probability(p, "p", open_low=True)
    fn = functools.partial(_growth_trial, N=N, p=p, seed=seed, success=success, rate=rate, cutoff=cutoff,
                           keep_trajectory=keep_records)
    records = map_ordered(fn, range(trials), processes, chunksize=max(1, trials // (4 * max(processes, 1))))
    return _summarize(records, N, p, eta, keep_records)


def simulate_growth(N: int, p: float, trials: int, seed: int, rate: str = "ideal",
                    cutoff: int = DEFAULT_CUTOFF, processes: int = 1, keep_records: bool = False) -> GrowthStats:
    """Grow the seed cluster by N qubits; trial t draws from default_rng([seed, t])."""
    return _run_growth(N, p, trials, seed, BONDING_SUCCESS, 1.0, rate, cutoff, processes, keep_records)


def simulate_growth_lossy(N: int, p: float, eta: float, trials: int, seed: int, rate: str = "ideal",
                          cutoff: int = DEFAULT_CUTOFF, processes: int = 1,
                          keep_records: bool = False) -> GrowthStats:
    """
    Same walk with bonding success (1/2)·g². Growth needs positive drift
    3s - 1; below that (eta under roughly 0.9) the call raises OutOfRange.
    Tree-encoding overhead near the 2/3 threshold is not modelled.
    """
    s = bonding_success_probability(eta)
    if 3.0 * s - 1.0 <= 0.0:
        raise OutOfRange(f"bonding success {s:.4f} at eta={eta:g} gives non-positive drift; the cluster cannot grow")
    return _run_growth(N, p, trials, seed, s, eta, rate, cutoff, processes, keep_records)


def _component_trial(trial: int, p: float, seed: int, rate: str, cutoff: int) -> Tuple[int, int, int]:
    rng = np.random.default_rng([seed, trial])
    q, per_attempt = _round_rate(p, rate, cutoff)
    return (eme_pulses(rng, 1, q, per_attempt),
            three_cluster_pulses(rng, 1, q, per_attempt),
            four_cluster_pulses(rng, 1, q, per_attempt))


def simulate_components(p: float, trials: int, seed: int, rate: str = "ideal", cutoff: int = DEFAULT_CUTOFF,
                        processes: int = 1) -> ComponentStats:
    """Mean pulses for one EME, one 3-cluster and one 4-cluster."""
    check_probability(p, "p", open_low=True)
    if trials < 1:
        raise OutOfRange(f"trials must be >= 1, got {trials}")
    fn = functools.partial(_component_trial, p=p, seed=seed, rate=rate, cutoff=cutoff)
    rows = np.array(map_ordered(fn, range(trials), processes), dtype=float)
    means = rows.mean(axis=0)
    return ComponentStats(float(p), trials, float(means[0]), float(means[1]), float(means[2]))
