# core/optics.py
"""
Passive optical elements as mode unitaries, networks of them, and loss
insertion via beamsplitters routed to dedicated loss modes.

Matrix convention: an element with matrix U on modes (m_0, .., m_{d-1})
maps m_k† -> Σ_j U_jk m_j†.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.codes import DuplicateMode, OutOfRange, RegistryMismatch, UnequalEfficiencies, check_probability
from core.config import LossModel, UNITARY_TOL
from core.fock import PureState, apply_mode_unitary, check_unitary, ensure_modes, raise_cutoff

logger = logging.getLogger(__name__)


class ElementKind(Enum):
    BEAMSPLITTER = "beamsplitter"
    POL_ROTATOR = "pol_rotator"
    HADAMARD = "hadamard"
    PBS = "pbs"
    SWAP = "swap"
    PHASE = "phase"
    UNITARY = "unitary"


class LossRole(Enum):
    NONE = "none"
    SOURCE = "source"
    DETECTOR = "detector"


# --------------------------------------------------------------------
# Matrices
# --------------------------------------------------------------------
def beamsplitter_matrix(t: float) -> np.ndarray:
    t = check_probability(t, "transmissivity")
    a, b = np.sqrt(t), np.sqrt(1.0 - t)
    return np.array([[a, b], [b, -a]], dtype=complex)


def rotator_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def hadamard_matrix() -> np.ndarray:
    return np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


def phase_matrix(phi: float) -> np.ndarray:
    return np.array([[np.exp(1j * phi)]], dtype=complex)


def swap_matrix() -> np.ndarray:
    return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def pbs_matrix() -> np.ndarray:
    # modes (h_a, v_a, h_b, v_b): h transmitted, v_a <-> v_b
    P = np.zeros((4, 4), dtype=complex)
    P[0, 0] = P[2, 2] = 1.0
    P[3, 1] = P[1, 3] = 1.0
    return P


# --------------------------------------------------------------------
# Elements
# --------------------------------------------------------------------
@dataclass(frozen=True)
class Element:
    kind: ElementKind
    modes: Tuple[str, ...]
    param: Optional[float] = None
    custom: Optional[Tuple[Tuple[complex, ...], ...]] = None
    role: LossRole = LossRole.NONE

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(str(m) for m in self.modes))
        if len(set(self.modes)) != len(self.modes):
            raise DuplicateMode(f"{self.kind.value} needs distinct modes, got {list(self.modes)}")
        check_unitary(self.matrix(), UNITARY_TOL)

    def matrix(self) -> np.ndarray:
        k = self.kind
        if k is ElementKind.BEAMSPLITTER:
            return beamsplitter_matrix(self.param)
        if k is ElementKind.POL_ROTATOR:
            return rotator_matrix(self.param)
        if k is ElementKind.HADAMARD:
            return hadamard_matrix()
        if k is ElementKind.PBS:
            return pbs_matrix()
        if k is ElementKind.SWAP:
            return swap_matrix()
        if k is ElementKind.PHASE:
            return phase_matrix(self.param)
        return np.array(self.custom, dtype=complex)

    def as_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"kind": self.kind.value, "modes": list(self.modes)}
        if self.param is not None:
            d["param"] = self.param
        if self.custom is not None:
            d["matrix"] = [[[c.real, c.imag] for c in row] for row in self.custom]
        if self.role is not LossRole.NONE:
            d["role"] = self.role.value
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Element":
        custom = None
        if "matrix" in d:
            custom = tuple(tuple(complex(re, im) for re, im in row) for row in d["matrix"])
        return cls(ElementKind(d["kind"]), tuple(d["modes"]), d.get("param"), custom,
                   LossRole(d.get("role", "none")))


def beamsplitter(a: str, b: str, t: float, role: LossRole = LossRole.NONE) -> Element:
    check_probability(t, "transmissivity")
    return Element(ElementKind.BEAMSPLITTER, (a, b), float(t), role=role)


def pol_rotator(h: str, v: str, theta: float = np.pi / 4) -> Element:
    return Element(ElementKind.POL_ROTATOR, (h, v), float(theta))


def hadamard_gate(h: str, v: str) -> Element:
    return Element(ElementKind.HADAMARD, (h, v))


def pbs(h_a: str, v_a: str, h_b: str, v_b: str) -> Element:
    return Element(ElementKind.PBS, (h_a, v_a, h_b, v_b))


def swap(a: str, b: str) -> Element:
    return Element(ElementKind.SWAP, (a, b))


def phase_shift(mode: str, phi: float) -> Element:
    return Element(ElementKind.PHASE, (mode,), float(phi))


def mode_unitary(modes: Sequence[str], U) -> Element:
    M = check_unitary(U, UNITARY_TOL)
    return Element(ElementKind.UNITARY, tuple(modes), custom=tuple(tuple(complex(x) for x in row) for row in M))


# --------------------------------------------------------------------
# Networks
# --------------------------------------------------------------------
@dataclass(frozen=True)
class Network:
    elements: Tuple[Element, ...]
    inputs: Tuple[str, ...]
    detectors: Tuple[str, ...]
    name: str = "network"

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "detectors", tuple(self.detectors))

    def modes(self) -> Tuple[str, ...]:
        seen: List[str] = []
        for m in list(self.inputs) + [m for e in self.elements for m in e.modes] + list(self.detectors):
            if m not in seen:
                seen.append(m)
        return tuple(seen)

    def loss_modes(self) -> Tuple[str, ...]:
        return tuple(e.modes[1] for e in self.elements if e.role is not LossRole.NONE)

    def passive_elements(self) -> Tuple[Element, ...]:
        return tuple(e for e in self.elements if e.role is LossRole.NONE)

    def layers(self) -> List[Tuple[Tuple[str, ...], np.ndarray]]:
        """Group consecutive elements on disjoint modes into block-diagonal transforms."""
        out: List[Tuple[Tuple[str, ...], np.ndarray]] = []
        block: List[Element] = []
        used: set = set()

        def flush():
            if not block:
                return
            modes: List[str] = [m for e in block for m in e.modes]
            M = np.zeros((len(modes), len(modes)), dtype=complex)
            at = 0
            for e in block:
                d = len(e.modes)
                M[at:at + d, at:at + d] = e.matrix()
                at += d
            out.append((tuple(modes), M))

        for e in self.elements:
            if used.intersection(e.modes):
                flush()
                block, used = [], set()
            block.append(e)
            used.update(e.modes)
        flush()
        return out

    def run(self, state: PureState) -> PureState:
        """Apply the network; loss modes are registered on demand and the
        cutoff is lifted so the optics never truncate the photons they carry."""
        state = ensure_modes(state, self.loss_modes())
        photons = state.max_occupation(self.modes())
        state = raise_cutoff(state, photons)
        for modes, M in self.layers():
            state = apply_mode_unitary(state, modes, M)
        logger.debug("%s: %d layers, %d terms out", self.name, len(self.layers()), len(state))
        return state

    # ---------------- serialization ----------------
    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "inputs": list(self.inputs),
            "detectors": list(self.detectors),
            "elements": [e.as_dict() for e in self.elements],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Network":
        d = json.loads(text)
        return cls(tuple(Element.from_dict(e) for e in d["elements"]),
                   tuple(d["inputs"]), tuple(d["detectors"]), d.get("name", "network"))


# --------------------------------------------------------------------
# Loss
# --------------------------------------------------------------------
def loss_mode_name(tag: str, role: LossRole, mode: str) -> str:
    short = "src" if role is LossRole.SOURCE else "det"
    return f"loss:{tag}:{short}:{mode}"


def insert_loss(network: Network, loss_model: LossModel, tag: Optional[str] = None) -> Network:
    """Beamsplitter(eta_e) after each input, Beamsplitter(eta_d) before each detector."""
    tag = tag or network.name
    pre = tuple(beamsplitter(m, loss_mode_name(tag, LossRole.SOURCE, m), loss_model.eta_e, LossRole.SOURCE)
                for m in network.inputs)
    post = tuple(beamsplitter(m, loss_mode_name(tag, LossRole.DETECTOR, m), loss_model.eta_d, LossRole.DETECTOR)
                 for m in network.detectors)
    return replace(network, elements=pre + network.elements + post)


def source_loss(network: Network, eta: float, tag: Optional[str] = None) -> Network:
    """Strip loss elements and put a single Beamsplitter(eta) on every input."""
    tag = tag or network.name
    passive = network.passive_elements()
    pre = tuple(beamsplitter(m, loss_mode_name(tag, LossRole.SOURCE, m), eta, LossRole.SOURCE)
                for m in network.inputs)
    return replace(network, elements=pre + passive)


def commute_loss_to_sources(network: Network) -> Network:
    """
    Replace detector-side Beamsplitter(eta_d) elements by folding eta_d into
    the source-side ones. Valid when every source and every detector carries
    the same efficiency and the passive part only touches the declared inputs.
    """
    src = {e.param for e in network.elements if e.role is LossRole.SOURCE}
    det = {e.param for e in network.elements if e.role is LossRole.DETECTOR}
    if len(src) > 1 or len(det) > 1:
        raise UnequalEfficiencies(f"source efficiencies {sorted(src)}, detector efficiencies {sorted(det)}")
    touched = {m for e in network.passive_elements() for m in e.modes}
    stray = touched - set(network.inputs)
    if stray:
        raise RegistryMismatch(f"passive elements touch undeclared input modes {sorted(stray)}")
    n_src = sum(1 for e in network.elements if e.role is LossRole.SOURCE)
    n_det = sum(1 for e in network.elements if e.role is LossRole.DETECTOR)
    if (src and n_src != len(network.inputs)) or (det and n_det != len(network.detectors)):
        raise UnequalEfficiencies("loss must sit on every input and every detector to commute")
    eta_e = src.pop() if src else 1.0
    eta_d = det.pop() if det else 1.0
    if not det and not src:
        return network
    return source_loss(network, eta_e * eta_d)
