# core/registry.py
"""
Mode bookkeeping for ensemble qubits.

Every logical qubit q owns four bosonic modes:
  H_q, V_q   collective atomic excitations (|0>_L = H_q†|G>, |1>_L = V_q†|G>)
  h_q, v_q   the anti-Stokes / Stokes optical modes they couple to
Loss ancillas are registered on demand and are never reused.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from core.codes import DuplicateMode, UnknownMode


class ModeKind(Enum):
    ATOMIC_H = "H"
    ATOMIC_V = "V"
    OPTICAL_H = "h"
    OPTICAL_V = "v"
    LOSS = "loss"


ATOMIC_KINDS = (ModeKind.ATOMIC_H, ModeKind.ATOMIC_V)
OPTICAL_KINDS = (ModeKind.OPTICAL_H, ModeKind.OPTICAL_V)


@dataclass(frozen=True)
class ModeId:
    index: int
    kind: ModeKind
    owner: str

    @property
    def name(self) -> str:
        if self.kind is ModeKind.LOSS:
            return self.owner
        return f"{self.kind.value}_{self.owner}"


ModeRef = Union[str, int, ModeId]


def atomic_modes(qubit) -> Tuple[str, str]:
    q = str(qubit)
    return (f"H_{q}", f"V_{q}")


def optical_modes(qubit) -> Tuple[str, str]:
    q = str(qubit)
    return (f"h_{q}", f"v_{q}")


@dataclass(frozen=True)
class ModeRegistry:
    modes: Tuple[ModeId, ...]
    _lookup: Dict[str, int] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        lookup: Dict[str, int] = {}
        for i, m in enumerate(self.modes):
            if m.index != i:
                raise ValueError(f"mode {m.name} has index {m.index}, expected {i}")
            if m.name in lookup:
                raise DuplicateMode(f"mode {m.name} registered twice")
            lookup[m.name] = i
        object.__setattr__(self, "_lookup", lookup)

    # ---------------- construction ----------------
    @classmethod
    def for_qubits(cls, qubits: Iterable) -> "ModeRegistry":
        modes: List[ModeId] = []
        for q in qubits:
            for kind in (ModeKind.ATOMIC_H, ModeKind.ATOMIC_V, ModeKind.OPTICAL_H, ModeKind.OPTICAL_V):
                modes.append(ModeId(len(modes), kind, str(q)))
        return cls(tuple(modes))

    def with_qubits(self, qubits: Iterable) -> "ModeRegistry":
        return self.union(ModeRegistry.for_qubits(qubits))

    def with_loss_modes(self, names: Iterable[str]) -> "ModeRegistry":
        modes = list(self.modes)
        for n in names:
            if n in self._lookup:
                continue
            modes.append(ModeId(len(modes), ModeKind.LOSS, n))
        return ModeRegistry(tuple(modes))

    def union(self, other: "ModeRegistry") -> "ModeRegistry":
        """Self's modes first, then other's modes not already present (by name)."""
        modes = list(self.modes)
        for m in other.modes:
            if m.name in self._lookup:
                continue
            modes.append(ModeId(len(modes), m.kind, m.owner))
        return ModeRegistry(tuple(modes))

    def without(self, names: Iterable[str]) -> "ModeRegistry":
        drop = set(names)
        kept = [m for m in self.modes if m.name not in drop]
        return ModeRegistry(tuple(ModeId(i, m.kind, m.owner) for i, m in enumerate(kept)))

    # ---------------- lookup ----------------
    def __len__(self) -> int:
        return len(self.modes)

    def __contains__(self, ref) -> bool:
        if isinstance(ref, ModeId):
            return ref.name in self._lookup
        if isinstance(ref, int):
            return 0 <= ref < len(self.modes)
        return str(ref) in self._lookup

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(m.name for m in self.modes)

    def index_of(self, ref: ModeRef) -> int:
        if isinstance(ref, ModeId):
            ref = ref.name
        if isinstance(ref, (int,)) and not isinstance(ref, bool):
            if 0 <= ref < len(self.modes):
                return ref
            raise UnknownMode(f"mode index {ref} not in registry of size {len(self.modes)}")
        try:
            return self._lookup[str(ref)]
        except KeyError:
            raise UnknownMode(f"mode {ref!r} is not registered") from None

    def indices(self, refs: Sequence[ModeRef]) -> Tuple[int, ...]:
        return tuple(self.index_of(r) for r in refs)

    def mode(self, ref: ModeRef) -> ModeId:
        return self.modes[self.index_of(ref)]

    def qubits(self) -> Tuple[str, ...]:
        seen: List[str] = []
        for m in self.modes:
            if m.kind in ATOMIC_KINDS and m.owner not in seen:
                seen.append(m.owner)
        return tuple(seen)

    def atomic(self, qubit) -> Tuple[int, int]:
        return self.indices(atomic_modes(qubit))

    def optical(self, qubit) -> Tuple[int, int]:
        return self.indices(optical_modes(qubit))

    def loss_indices(self) -> Tuple[int, ...]:
        return tuple(m.index for m in self.modes if m.kind is ModeKind.LOSS)
