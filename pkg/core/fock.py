# core/fock.py
"""
Sparse multimode Fock states.

A PureState maps occupation tuples (one entry per registered mode, each in
[0, cutoff]) to complex amplitudes. Collective atomic excitations are
treated as bosonic modes, which holds while the excitation number is much
smaller than the number of atoms in an ensemble.

Terms pushed above the cutoff are dropped; their norm² is accumulated in
``PureState.truncated`` and their number in ``PureState.truncations``.
Projection probabilities are taken relative to the nominal norm
(retained norm² + truncated mass).
"""
from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import factorial

from core.codes import DuplicateMode, NonUnitary, OutOfRange, RegistryMismatch
from core.config import DEFAULT_CUTOFF, PRUNE_TOL, UNITARY_TOL
from core.registry import ModeRef, ModeRegistry

logger = logging.getLogger(__name__)

Occupation = Tuple[int, ...]
Amplitudes = Dict[Occupation, complex]


# --------------------------------------------------------------------
# State types
# --------------------------------------------------------------------
@dataclass(frozen=True)
class PureState:
    registry: ModeRegistry
    amplitudes: Amplitudes
    cutoff: int = DEFAULT_CUTOFF
    weight: float = 1.0
    truncated: float = 0.0
    truncations: int = 0

    def __post_init__(self):
        if self.cutoff < 1:
            raise OutOfRange(f"cutoff must be >= 1, got {self.cutoff}")

    def __len__(self) -> int:
        return len(self.amplitudes)

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(occupation), 0j)

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def nominal_norm2(self) -> float:
        return self.norm2() + self.truncated

    def normalized(self) -> "PureState":
        n2 = self.norm2()
        if n2 == 0.0:
            return self
        s = 1.0 / np.sqrt(n2)
        return replace(self, amplitudes={k: a * s for k, a in self.amplitudes.items()}, truncated=0.0)

    def with_weight(self, weight: float) -> "PureState":
        return replace(self, weight=float(weight))

    def occupations(self, mode: ModeRef) -> Dict[int, float]:
        """Marginal number distribution of one mode (unnormalized norm² per n)."""
        k = self.registry.index_of(mode)
        out: Dict[int, float] = {}
        for key, a in self.amplitudes.items():
            out[key[k]] = out.get(key[k], 0.0) + abs(a) ** 2
        return out

    def photon_numbers(self) -> Tuple[int, ...]:
        return tuple(sorted({sum(k) for k in self.amplitudes}))

    def max_occupation(self, modes: Optional[Sequence[ModeRef]] = None) -> int:
        idx = self.registry.indices(modes) if modes is not None else range(len(self.registry))
        best = 0
        for key in self.amplitudes:
            best = max(best, sum(key[i] for i in idx))
        return best

    def describe(self, limit: int = 8) -> str:
        names = self.registry.names
        parts = []
        for key, a in sorted(self.amplitudes.items(), key=lambda kv: -abs(kv[1]))[:limit]:
            occ = " ".join(f"{names[i]}^{n}" if n > 1 else names[i] for i, n in enumerate(key) if n)
            parts.append(f"({a.real:+.4f}{a.imag:+.4f}j)|{occ or 'vac'}>")
        more = "" if len(self.amplitudes) <= limit else f" + {len(self.amplitudes) - limit} more"
        return " + ".join(parts) + more


@dataclass(frozen=True)
class MixedState:
    """Finite weighted ensemble of normalized PureState branches."""
    branches: Tuple[PureState, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.branches:
            reg = self.branches[0].registry
            for b in self.branches[1:]:
                if b.registry != reg:
                    raise RegistryMismatch("branches of a MixedState must share one registry")

    @classmethod
    def of(cls, state: Union["MixedState", PureState]) -> "MixedState":
        if isinstance(state, MixedState):
            return state
        n2 = state.norm2()
        if n2 == 0.0:
            return cls(())
        return cls((state.normalized().with_weight(state.weight * n2 / (n2 + state.truncated)),))

    def __len__(self) -> int:
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)

    @property
    def registry(self) -> ModeRegistry:
        if not self.branches:
            raise RegistryMismatch("empty MixedState has no registry")
        return self.branches[0].registry

    @property
    def cutoff(self) -> int:
        return max((b.cutoff for b in self.branches), default=DEFAULT_CUTOFF)

    def total_weight(self) -> float:
        return float(sum(b.weight for b in self.branches))

    def map(self, fn: Callable[[PureState], Union[PureState, "MixedState"]]) -> "MixedState":
        out: List[PureState] = []
        for b in self.branches:
            r = fn(b)
            if isinstance(r, MixedState):
                out.extend(r.branches)
            else:
                out.append(r)
        return MixedState(tuple(out))

    def normalized(self) -> "MixedState":
        total = self.total_weight()
        if total == 0.0:
            return self
        return MixedState(tuple(b.with_weight(b.weight / total) for b in self.branches))

    def scaled(self, factor: float) -> "MixedState":
        return MixedState(tuple(b.with_weight(b.weight * factor) for b in self.branches))

    def merge(self, other: "MixedState") -> "MixedState":
        return MixedState(self.branches + other.branches)


# --------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------
def _validate_cutoff(cutoff: int) -> int:
    if int(cutoff) < 1:
        raise OutOfRange(f"cutoff must be >= 1, got {cutoff}")
    return int(cutoff)


def vacuum(registry: ModeRegistry, cutoff: int = DEFAULT_CUTOFF) -> PureState:
    if len(registry) == 0:
        raise OutOfRange("registry must not be empty")
    cutoff = _validate_cutoff(cutoff)
    return PureState(registry, {(0,) * len(registry): 1.0 + 0j}, cutoff)


def basis_state(
    registry: ModeRegistry,
    occupations: Mapping[ModeRef, int],
    cutoff: int = DEFAULT_CUTOFF,
    amplitude: complex = 1.0,
) -> PureState:
    key = [0] * len(registry)
    for mode, n in occupations.items():
        if not 0 <= int(n) <= cutoff:
            raise OutOfRange(f"occupation {n} of {mode} outside [0, {cutoff}]")
        key[registry.index_of(mode)] = int(n)
    return PureState(registry, {tuple(key): complex(amplitude)}, _validate_cutoff(cutoff))


def from_amplitudes(
    registry: ModeRegistry,
    amplitudes: Mapping[Occupation, complex],
    cutoff: int = DEFAULT_CUTOFF,
    normalize: bool = True,
) -> PureState:
    amps: Amplitudes = {}
    for key, a in amplitudes.items():
        key = tuple(int(x) for x in key)
        if len(key) != len(registry):
            raise RegistryMismatch(f"occupation {key} does not match registry size {len(registry)}")
        if any(x < 0 or x > cutoff for x in key):
            raise OutOfRange(f"occupation {key} outside [0, {cutoff}]")
        amps[key] = amps.get(key, 0j) + complex(a)
    state = _finish(PureState(registry, {}, _validate_cutoff(cutoff)), amps)
    return state.normalized() if normalize else state


# --------------------------------------------------------------------
# Internal helpers
# --------------------------------------------------------------------
def _finish(base: PureState, amps: Amplitudes, dropped: float = 0.0, dropped_terms: int = 0) -> PureState:
    """Prune small amplitudes and attach truncation bookkeeping."""
    pruned = {k: a for k, a in amps.items() if abs(a) >= PRUNE_TOL}
    if dropped_terms:
        logger.debug("dropped %d terms above cutoff %d (mass %.3e)", dropped_terms, base.cutoff, dropped)
    return replace(
        base,
        amplitudes=pruned,
        truncated=base.truncated + dropped,
        truncations=base.truncations + dropped_terms,
    )


def _split_cutoff(amps: Amplitudes, cutoff: int) -> Tuple[Amplitudes, float, int]:
    kept: Amplitudes = {}
    dropped = 0.0
    count = 0
    for k, a in amps.items():
        if max(k) > cutoff:
            if abs(a) >= PRUNE_TOL:
                dropped += abs(a) ** 2
                count += 1
        else:
            kept[k] = a
    return kept, dropped, count


def _same_registry(a: PureState, b: PureState) -> None:
    if a.registry != b.registry:
        raise RegistryMismatch("states are defined over different registries")


# --------------------------------------------------------------------
# Ladder operators
# --------------------------------------------------------------------
def create(state: PureState, mode: ModeRef) -> PureState:
    k = state.registry.index_of(mode)
    out: Amplitudes = {}
    dropped = 0.0
    count = 0
    for key, a in state.amplitudes.items():
        n = key[k]
        amp = a * np.sqrt(n + 1)
        if n + 1 > state.cutoff:
            dropped += abs(amp) ** 2
            count += 1
            continue
        new = key[:k] + (n + 1,) + key[k + 1:]
        out[new] = amp
    return _finish(state, out, dropped, count)


def annihilate(state: PureState, mode: ModeRef) -> PureState:
    k = state.registry.index_of(mode)
    out: Amplitudes = {}
    for key, a in state.amplitudes.items():
        n = key[k]
        if n == 0:
            continue
        out[key[:k] + (n - 1,) + key[k + 1:]] = a * np.sqrt(n)
    return _finish(state, out)


def number_expectation(state: PureState, mode: ModeRef) -> float:
    k = state.registry.index_of(mode)
    return float(sum(key[k] * abs(a) ** 2 for key, a in state.amplitudes.items()))


# --------------------------------------------------------------------
# Passive linear optics
# --------------------------------------------------------------------
def check_unitary(U, tol: float = UNITARY_TOL) -> np.ndarray:
    M = np.asarray(U, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonUnitary(f"expected a square matrix, got shape {M.shape}")
    dev = np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0])))
    if dev > tol:
        raise NonUnitary(f"U†U deviates from identity by {dev:.3e} (tolerance {tol:g})")
    return M


def _sqrt_factorial(n: int) -> float:
    return float(np.sqrt(float(factorial(n, exact=True))))


def _power_expansion(column: Sequence[Tuple[int, complex]], n: int) -> List[Tuple[Dict[int, int], complex]]:
    """(Σ_j U_jk a_j†)^n as a list of ({j: m_j}, n!/Πm_j! · Π U_jk^m_j)."""
    out: List[Tuple[Dict[int, int], complex]] = []
    rows = [j for j, _ in column]
    coeff = dict(column)
    n_fact = factorial(n, exact=True)
    for combo in itertools.combinations_with_replacement(rows, n):
        counts = Counter(combo)
        c = complex(n_fact)
        for j, m in counts.items():
            c *= coeff[j] ** m / factorial(m, exact=True)
        out.append((dict(counts), c))
    return out


def apply_mode_unitary(state: PureState, modes: Sequence[ModeRef], U, tol: float = UNITARY_TOL) -> PureState:
    """
    Substitute a_k† -> Σ_j U_jk a_j† on the listed modes (k, j index into
    ``modes``) and re-expand every basis term with multinomial coefficients.
    Expansions are cached per sub-occupation; zero matrix entries are skipped.
    """
    M = check_unitary(U, tol)
    idx = state.registry.indices(modes)
    if len(idx) != M.shape[0]:
        raise NonUnitary(f"{len(idx)} modes given for a {M.shape[0]}x{M.shape[0]} matrix")
    if len(set(idx)) != len(idx):
        raise DuplicateMode(f"duplicate modes in {list(modes)}")
    d = len(idx)
    columns = [[(j, M[j, k]) for j in range(d) if abs(M[j, k]) > 0.0] for k in range(d)]
    cache: Dict[Occupation, Dict[Occupation, complex]] = {}

    def expand(sub: Occupation) -> Dict[Occupation, complex]:
        if sub in cache:
            return cache[sub]
        partial: Dict[Occupation, complex] = {(0,) * d: 1.0 + 0j}
        norm_in = 1.0
        for k, n in enumerate(sub):
            if n == 0:
                continue
            norm_in *= _sqrt_factorial(n)
            nxt: Dict[Occupation, complex] = {}
            for counts, c in _power_expansion(columns[k], n):
                for occ, c0 in partial.items():
                    new = list(occ)
                    for j, m in counts.items():
                        new[j] += m
                    t = tuple(new)
                    nxt[t] = nxt.get(t, 0j) + c0 * c
            partial = nxt
        result: Dict[Occupation, complex] = {}
        for occ, c in partial.items():
            if abs(c) < PRUNE_TOL:
                continue
            norm_out = 1.0
            for m in occ:
                norm_out *= _sqrt_factorial(m)
            result[occ] = c * norm_out / norm_in
        cache[sub] = result
        return result

    out: Amplitudes = {}
    for key, a in state.amplitudes.items():
        sub = tuple(key[i] for i in idx)
        if not any(sub):
            out[key] = out.get(key, 0j) + a
            continue
        base = list(key)
        for occ, c in expand(sub).items():
            for i, m in zip(idx, occ):
                base[i] = m
            t = tuple(base)
            out[t] = out.get(t, 0j) + a * c
    kept, dropped, count = _split_cutoff(out, state.cutoff)
    return _finish(state, kept, dropped, count)


# --------------------------------------------------------------------
# Projection, tracing, consumption
# --------------------------------------------------------------------
def project_pattern(state: PureState, modes: Sequence[ModeRef], counts: Sequence[int]) -> Tuple[PureState, float]:
    """Project several modes onto a joint occupation pattern (modes kept, not reset)."""
    idx = state.registry.indices(modes)
    want = tuple(int(c) for c in counts)
    matched = {k: a for k, a in state.amplitudes.items() if tuple(k[i] for i in idx) == want}
    nominal = state.nominal_norm2()
    m2 = float(sum(abs(a) ** 2 for a in matched.values()))
    prob = m2 / nominal if nominal > 0 else 0.0
    branch = replace(state, amplitudes=matched, truncated=0.0, truncations=state.truncations)
    if m2 > 0:
        branch = branch.normalized()
    return branch.with_weight(state.weight * prob), prob


def project_occupation(state: PureState, mode: ModeRef, n: int) -> Tuple[PureState, float]:
    if not 0 <= int(n) <= state.cutoff:
        raise OutOfRange(f"n={n} outside [0, {state.cutoff}]")
    return project_pattern(state, [mode], [n])


def reset_modes(state: PureState, modes: Sequence[ModeRef]) -> PureState:
    """Set measured/traced modes back to vacuum. Terms must agree on those modes."""
    idx = set(state.registry.indices(modes))
    out: Amplitudes = {}
    for key, a in state.amplitudes.items():
        new = tuple(0 if i in idx else n for i, n in enumerate(key))
        out[new] = out.get(new, 0j) + a
    return replace(state, amplitudes=out)


def branch_patterns(state: PureState, modes: Sequence[ModeRef]) -> List[Tuple[int, ...]]:
    idx = state.registry.indices(modes)
    return sorted({tuple(k[i] for i in idx) for k in state.amplitudes})


def trace_modes(state: Union[PureState, MixedState], modes: Sequence[ModeRef]) -> MixedState:
    """
    Trace out modes that are never revisited: one branch per joint occupation
    pattern of the traced modes, those modes reset to vacuum.
    """
    if isinstance(state, MixedState):
        return state.map(lambda b: trace_modes(b, modes))
    modes = list(modes)
    if not modes:
        return MixedState.of(state)
    branches: List[PureState] = []
    for pattern in branch_patterns(state, modes):
        branch, prob = project_pattern(state, modes, pattern)
        if prob <= 0.0:
            continue
        branches.append(reset_modes(branch, modes))
    logger.debug("traced %d modes into %d branches", len(modes), len(branches))
    return MixedState(tuple(branches))


# --------------------------------------------------------------------
# Overlaps
# --------------------------------------------------------------------
def inner_product(a: PureState, b: PureState) -> complex:
    _same_registry(a, b)
    total = 0j
    for k, x in a.amplitudes.items():
        y = b.amplitudes.get(k)
        if y is not None:
            total += np.conj(x) * y
    return complex(total)


def fidelity(state: Union[PureState, MixedState], reference: PureState) -> float:
    """Σ_b w_b |<ref|b>|² / Σ_b w_b with normalized branches and reference."""
    mixed = MixedState.of(state)
    total = mixed.total_weight()
    if total == 0.0:
        return 0.0
    ref_n2 = reference.norm2()
    if ref_n2 == 0.0:
        return 0.0
    acc = 0.0
    for b in mixed.branches:
        ov = inner_product(reference, b)
        acc += b.weight * abs(ov) ** 2 / (ref_n2 * b.norm2())
    return float(min(max(acc / total, 0.0), 1.0))


# --------------------------------------------------------------------
# Registry manipulation
# --------------------------------------------------------------------
def _reframe(state: PureState, registry: ModeRegistry, strict_target: bool) -> PureState:
    src = state.registry
    mapping = []
    for m in registry.modes:
        if m.name in src:
            mapping.append(src.index_of(m.name))
        elif strict_target:
            raise RegistryMismatch(f"mode {m.name} missing from source registry")
        else:
            mapping.append(None)
    kept = {i for i in mapping if i is not None}
    dropped = [i for i in range(len(src)) if i not in kept]
    out: Amplitudes = {}
    for key, a in state.amplitudes.items():
        for i in dropped:
            if key[i] != 0:
                raise RegistryMismatch(f"mode {src.modes[i].name} is occupied and cannot be dropped")
        new = tuple(key[i] if i is not None else 0 for i in mapping)
        out[new] = out.get(new, 0j) + a
    return replace(state, registry=registry, amplitudes=out)


def embed(state: PureState, registry: ModeRegistry) -> PureState:
    """Place a state into a larger registry; new modes start in vacuum."""
    for m in state.registry.modes:
        if m.name not in registry:
            raise RegistryMismatch(f"target registry lacks mode {m.name}")
    return _reframe(state, registry, strict_target=False)


def restrict(state: Union[PureState, MixedState], registry: ModeRegistry):
    """Drop modes absent from ``registry``; they must be in vacuum."""
    if isinstance(state, MixedState):
        return state.map(lambda b: restrict(b, registry))
    return _reframe(state, registry, strict_target=False)


def tensor(a: PureState, b: PureState) -> PureState:
    overlap = set(a.registry.names) & set(b.registry.names)
    if overlap:
        raise RegistryMismatch(f"registries overlap on {sorted(overlap)}")
    registry = a.registry.union(b.registry)
    out: Amplitudes = {}
    for ka, xa in a.amplitudes.items():
        for kb, xb in b.amplitudes.items():
            out[ka + kb] = xa * xb
    return PureState(
        registry, out, max(a.cutoff, b.cutoff), a.weight * b.weight,
        a.truncated + b.truncated, a.truncations + b.truncations,
    )


def tensor_mixed(a: Union[PureState, MixedState], b: Union[PureState, MixedState]) -> MixedState:
    ma, mb = MixedState.of(a), MixedState.of(b)
    return MixedState(tuple(tensor(x, y) for x in ma.branches for y in mb.branches))


def raise_cutoff(state: PureState, cutoff: int) -> PureState:
    if cutoff <= state.cutoff:
        return state
    return replace(state, cutoff=int(cutoff))


def ensure_modes(state: PureState, names: Iterable[str]) -> PureState:
    """Register missing loss ancillas (in vacuum)."""
    missing = [n for n in names if n not in state.registry]
    if not missing:
        return state
    return embed(state, state.registry.with_loss_modes(missing))
