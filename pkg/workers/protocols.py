# workers/protocols.py
"""
Heralded ensemble protocols.

  excite / readout           write and read pulses on one ensemble qubit
  prepare_eme                two heralded rounds (h then v) -> EME pair
  prepare_three_cluster      three EME pairs -> 3-qubit linear cluster (p = 1/32)
  cz_fuse                    destructive CZ between two cluster qubits (p = 1/2)
  encode_cluster             ideal reference cluster states
  measure_qubit              readout + polarization rotation + h/v detection
  defer_unitary_check        local unitaries commute through the readout pulse

Logical encoding: |0>_L = H_q†|G>, |1>_L = V_q†|G>.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy.special import factorial

from core.codes import HeraldFailed, InvalidGraph, OutOfRange, RoundFailed, check_probability
from core.config import DEFAULT_CUTOFF, LossModel
from core.detection import (
    PAULI,
    ClickPattern,
    Correction,
    ExecutionMode,
    HeraldedBranch,
    HeraldRule,
    OutcomeStatus,
    ProtocolOutcome,
    apply_corrections,
    herald,
    measure_ensemble,
)
from core.fock import (
    MixedState,
    PureState,
    apply_mode_unitary,
    check_unitary,
    from_amplitudes,
    tensor_mixed,
    trace_modes,
    vacuum,
    _finish,
)
from core.optics import (
    LossRole,
    Network,
    beamsplitter,
    commute_loss_to_sources,
    hadamard_gate,
    insert_loss,
    loss_mode_name,
    mode_unitary,
    pbs,
    pol_rotator,
    swap,
)
from core.registry import ModeRegistry, atomic_modes, optical_modes

logger = logging.getLogger(__name__)

StateLike = Union[PureState, MixedState]


# --------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------
@dataclass(frozen=True)
class ExcitationParams:
    p: float
    n_max: Optional[int] = None  # None: up to the state's cutoff

    def __post_init__(self):
        check_probability(self.p, "p", open_high=True)
        if self.n_max is not None and self.n_max < 0:
            raise OutOfRange(f"n_max must be >= 0, got {self.n_max}")


class Encoding(Enum):
    INTERNAL_STATE = "internal-state"
    DUAL_RAIL = "dual-rail"


@dataclass(frozen=True)
class LogicalQubit:
    label: str
    encoding: Encoding = Encoding.INTERNAL_STATE

    @property
    def atomic(self) -> Tuple[str, str]:
        return atomic_modes(self.label)

    @property
    def optical(self) -> Tuple[str, str]:
        return optical_modes(self.label)


class ClusterGraph:
    """Simple undirected graph of qubit labels (no self-loops)."""

    def __init__(self, vertices: Iterable = (), edges: Iterable[Tuple] = ()):
        g = nx.Graph()
        g.add_nodes_from(str(v) for v in vertices)
        for u, v in edges:
            u, v = str(u), str(v)
            if u == v:
                raise InvalidGraph(f"self-loop on {u}")
            g.add_edge(u, v)
        self._g = g

    @classmethod
    def line(cls, labels: Sequence) -> "ClusterGraph":
        labels = [str(x) for x in labels]
        return cls(labels, zip(labels, labels[1:]))

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> "ClusterGraph":
        return cls(g.nodes, g.edges)

    @property
    def graph(self) -> nx.Graph:
        return self._g.copy()

    @property
    def vertices(self) -> Tuple[str, ...]:
        return tuple(self._g.nodes)

    @property
    def edges(self) -> Tuple[Tuple[str, str], ...]:
        return tuple((u, v) for u, v in self._g.edges)

    def __len__(self) -> int:
        return self._g.number_of_nodes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClusterGraph):
            return NotImplemented
        return set(self.vertices) == set(other.vertices) and \
            {frozenset(e) for e in self.edges} == {frozenset(e) for e in other.edges}

    def __repr__(self) -> str:
        return f"ClusterGraph(vertices={list(self.vertices)}, edges={list(self.edges)})"

    def neighbors(self, v) -> Tuple[str, ...]:
        return tuple(self._g.neighbors(str(v)))

    def without(self, vertices: Iterable) -> "ClusterGraph":
        g = self._g.copy()
        g.remove_nodes_from(str(v) for v in vertices)
        return ClusterGraph.from_networkx(g)

    def disjoint_union(self, other: "ClusterGraph") -> "ClusterGraph":
        shared = set(self.vertices) & set(other.vertices)
        if shared:
            raise InvalidGraph(f"graphs share vertices {sorted(shared)}")
        return ClusterGraph.from_networkx(nx.union(self._g, other._g))

    def fused(self, link: Tuple, targets: Tuple) -> "ClusterGraph":
        """Graph after a successful CZ fusion: link qubits removed, target edge toggled."""
        g = self._g.copy()
        g.remove_nodes_from(str(v) for v in link)
        a, b = (str(t) for t in targets)
        if g.has_edge(a, b):
            g.remove_edge(a, b)
        else:
            g.add_edge(a, b)
        return ClusterGraph.from_networkx(g)


def fuse_graphs(g1: ClusterGraph, g2: ClusterGraph, link: Tuple, targets: Tuple) -> ClusterGraph:
    """n-cluster + m-cluster -> (n+m-2)-cluster."""
    return g1.disjoint_union(g2).fused(link, targets)


def _as_mixed(state) -> MixedState:
    if isinstance(state, ProtocolOutcome):
        return state.corrected_state()
    return MixedState.of(state)


# --------------------------------------------------------------------
# Excitation and readout pulses
# --------------------------------------------------------------------
def excitation_coefficients(p: float, n_max: int) -> np.ndarray:
    """Series coefficients p^{n/2}/n! of (S† s†)^n, n = 0..n_max."""
    n = np.arange(n_max + 1)
    return np.power(float(p), n / 2.0) / factorial(n)


def excite(state: PureState, qubit, polarization: str, params: ExcitationParams) -> PureState:
    """Write pulse: multiply by Σ_n p^{n/2}/n! (S† s†)^n and renormalize."""
    if polarization not in ("h", "v"):
        raise OutOfRange(f"polarization must be 'h' or 'v', got {polarization!r}")
    H, V = atomic_modes(qubit)
    h, v = optical_modes(qubit)
    S, s = (H, h) if polarization == "h" else (V, v)
    kS, ks = state.registry.index_of(S), state.registry.index_of(s)
    n_max = state.cutoff if params.n_max is None else params.n_max
    coeffs = excitation_coefficients(params.p, n_max)

    out: Dict[Tuple[int, ...], complex] = {}
    dropped, count = 0.0, 0
    for key, a in state.amplitudes.items():
        for n, c in enumerate(coeffs):
            if c == 0.0:
                continue
            nS, ns = key[kS] + n, key[ks] + n
            amp = a * c * np.sqrt(factorial(nS) / factorial(key[kS])) * np.sqrt(factorial(ns) / factorial(key[ks]))
            if max(nS, ns) > state.cutoff:
                dropped += abs(amp) ** 2
                count += 1
                continue
            new = list(key)
            new[kS], new[ks] = nS, ns
            t = tuple(new)
            out[t] = out.get(t, 0j) + amp

    kept = sum(abs(a) ** 2 for a in out.values())
    total = kept + dropped + state.truncated
    f = state.nominal_norm2() / total if total > 0 else 1.0
    scaled = {k: a * np.sqrt(f) for k, a in out.items()}
    base = replace(state, truncated=state.truncated * f)
    return _finish(base, scaled, dropped * f, count)


def readout(state: PureState, qubit, loss_model: Optional[LossModel] = None, tag: str = "readout") -> PureState:
    """Read pulse: H_q† -> h_q†, V_q† -> v_q†, then Beamsplitter(eta_e) per output if lossy."""
    H, V = atomic_modes(qubit)
    h, v = optical_modes(qubit)
    elements = [swap(H, h), swap(V, v)]
    if loss_model is not None and loss_model.eta_e < 1.0:
        for m in (h, v):
            elements.append(beamsplitter(m, loss_mode_name(f"{tag}-{qubit}", LossRole.SOURCE, m),
                                         loss_model.eta_e, LossRole.SOURCE))
    return Network(tuple(elements), (h, v), (h, v), name=f"readout-{qubit}").run(state)


def apply_local(state: StateLike, qubit, U, stage: str = "atomic") -> StateLike:
    """Apply a 2x2 unitary to a qubit's atomic (H,V) or optical (h,v) modes."""
    modes = atomic_modes(qubit) if stage == "atomic" else optical_modes(qubit)
    if isinstance(state, MixedState):
        return state.map(lambda b: apply_mode_unitary(b, modes, U))
    return apply_mode_unitary(state, modes, U)


def _with_loss(network: Network, loss_model: Optional[LossModel], commute: bool, tag: str) -> Network:
    if loss_model is None:
        return network
    lossy = insert_loss(network, loss_model, tag)
    return commute_loss_to_sources(lossy) if commute else lossy


def _detect(state: MixedState, network: Network, dark_count: float = 0.0) -> List[HeraldedBranch]:
    ran = state.map(network.run)
    traced = trace_modes(ran, network.loss_modes()) if network.loss_modes() else ran
    return measure_ensemble(traced, network.detectors, dark_count)


# --------------------------------------------------------------------
# EME preparation
# --------------------------------------------------------------------
def eme_network(qubit_i, qubit_j, polarization: str) -> Network:
    s = 0 if polarization == "h" else 1
    a, b = optical_modes(qubit_i)[s], optical_modes(qubit_j)[s]
    return Network((beamsplitter(a, b, 0.5),), (a, b), (a, b), name=f"eme-{polarization}-{qubit_i}-{qubit_j}")


def eme_round_success_probability(p: float, eta: float = 1.0, cutoff: int = DEFAULT_CUTOFF) -> float:
    """
    Probability that one round registers exactly one click in total, for two
    ensembles excited with the series truncated at ``cutoff`` and every
    photon surviving with probability eta. At eta = 1 this is 2p/Z², Z = Σ p^n.
    """
    check_probability(p, "p", open_high=True)
    check_probability(eta, "eta")
    n = np.arange(cutoff + 1)
    pn = np.power(float(p), n)
    pn = pn / pn.sum()
    lost = 1.0 - eta
    p_one = float(np.sum(pn * n * eta * np.power(lost, np.maximum(n - 1, 0))))
    p_zero = float(np.sum(pn * np.power(lost, n)))
    return 2.0 * p_one * p_zero


def ideal_eme(qubit_i, qubit_j, registry: Optional[ModeRegistry] = None, cutoff: int = DEFAULT_CUTOFF) -> PureState:
    """(H_i† + V_j†)(V_i† + H_j†)|G> / 2."""
    reg = registry or ModeRegistry.for_qubits([qubit_i, qubit_j])
    Hi, Vi = atomic_modes(qubit_i)
    Hj, Vj = atomic_modes(qubit_j)
    terms = [(Hi, Vi), (Hi, Hj), (Vj, Vi), (Vj, Hj)]
    amps = {}
    for pair in terms:
        key = [0] * len(reg)
        for m in pair:
            key[reg.index_of(m)] += 1
        amps[tuple(key)] = 0.5
    return from_amplitudes(reg, amps, cutoff)


def eme_correction(qubit_j, sign_h: int, sign_v: int) -> Correction:
    """X·diag(s_h, s_v) on qubit j maps (H_i ± H_j)(V_i ± V_j)|G> to EME form."""
    M = PAULI["X"] @ np.diag([float(sign_h), float(sign_v)])
    name = "X" if (sign_h, sign_v) == (1, 1) else f"X·diag({sign_h:+d},{sign_v:+d})"
    return Correction.gate(qubit_j, name, M)


def _round_sign(pattern: ClickPattern) -> int:
    # first detector -> H_i + H_j, second -> H_i - H_j
    return 1 if pattern.counts[0] == 1 else -1


def _single_click(pattern: ClickPattern) -> bool:
    return pattern.total == 1


def _eme_round(state: MixedState, qubit_i, qubit_j, polarization: str, params: ExcitationParams,
               loss_model: Optional[LossModel], commute: bool) -> List[HeraldedBranch]:
    net = _with_loss(eme_network(qubit_i, qubit_j, polarization), loss_model, commute,
                     tag=f"eme-{polarization}-{qubit_i}-{qubit_j}")
    excited = state.map(lambda b: excite(excite(b, qubit_i, polarization, params), qubit_j, polarization, params))
    return _detect(excited, net)


ROUND_RULE = HeraldRule("eme-round", _single_click)


def prepare_eme(
    qubit_i,
    qubit_j,
    params: ExcitationParams,
    loss_model: Optional[LossModel] = None,
    mode: ExecutionMode = ExecutionMode.ANALYTIC,
    rng: Optional[np.random.Generator] = None,
    cutoff: int = DEFAULT_CUTOFF,
    commute_loss: bool = False,
    max_attempts: int = 1,
) -> ProtocolOutcome:
    """
    h round then v round, each heralded by exactly one click behind a 50/50
    beamsplitter. The recorded correction X·diag(s_h, s_v) on qubit j turns
    the heralded state into (H_i† + V_j†)(V_i† + H_j†)|G>.

    SAMPLED mode retries a failed round up to ``max_attempts`` times from the
    state before that round, then raises RoundFailed.
    """
    i, j = str(qubit_i), str(qubit_j)
    if params.n_max is None:
        params = replace(params, n_max=cutoff)
    start = MixedState.of(vacuum(ModeRegistry.for_qubits([i, j]), cutoff))
    eta = loss_model.eta if loss_model is not None else 1.0
    details = {"p": params.p, "eta": eta, "analytic_round_probability": eme_round_success_probability(
        params.p, eta, params.n_max if params.n_max is not None else cutoff)}

    if mode is ExecutionMode.ANALYTIC:
        first = herald(_eme_round(start, i, j, "h", params, loss_model, commute_loss), ROUND_RULE)
        accepted: List[HeraldedBranch] = []
        rejected: List[HeraldedBranch] = list(first.rejected)
        for b1 in first.branches:
            second = herald(_eme_round(b1.state.normalized(), i, j, "v", params, loss_model, commute_loss), ROUND_RULE)
            for b2 in second.branches:
                accepted.append(HeraldedBranch(
                    b1.pattern + b2.pattern,
                    b1.probability * b2.probability,
                    b2.state.scaled(b1.probability),
                    (eme_correction(j, _round_sign(b1.pattern), _round_sign(b2.pattern)),),
                    OutcomeStatus.SUCCESS,
                ))
            rejected.extend(replace(r, probability=r.probability * b1.probability) for r in second.rejected)
        total = float(sum(b.probability for b in accepted))
        p_h = first.probability
        details["round_probabilities"] = {"h": p_h, "v": total / p_h if p_h > 0 else 0.0}
        status = OutcomeStatus.SUCCESS if total > 0 else OutcomeStatus.FAILURE
        logger.info("EME(%s,%s) analytic: p_h=%.6g p_v=%.6g", i, j, p_h, details["round_probabilities"]["v"])
        return ProtocolOutcome(status, total, tuple(accepted), tuple(rejected), (), mode, details)

    if rng is None:
        raise OutOfRange("sampled mode needs an explicit random generator")
    state = start
    drawn: List[HeraldedBranch] = []
    attempts: Dict[str, int] = {}
    for pol in ("h", "v"):
        for attempt in range(1, max_attempts + 1):
            outcome = herald(_eme_round(state, i, j, pol, params, loss_model, commute_loss),
                             ROUND_RULE, ExecutionMode.SAMPLED, rng)
            attempts[pol] = attempt
            if outcome.success:
                drawn.append(outcome.branches[0])
                state = outcome.branches[0].state.normalized()
                break
            logger.debug("EME %s round failed on attempt %d (%s)", pol, attempt, outcome.rejected[0].pattern.label())
        else:
            raise RoundFailed(f"{pol} round on ({i},{j}) failed {max_attempts} time(s)")
    b1, b2 = drawn
    details["attempts"] = attempts
    branch = HeraldedBranch(b1.pattern + b2.pattern, b1.probability * b2.probability, state,
                            (eme_correction(j, _round_sign(b1.pattern), _round_sign(b2.pattern)),),
                            OutcomeStatus.SUCCESS)
    return ProtocolOutcome(OutcomeStatus.SUCCESS, branch.probability, (branch,), (), (), mode, details)


# --------------------------------------------------------------------
# Three-qubit cluster from three EME pairs
# --------------------------------------------------------------------
DEFAULT_PAIRS = (("1", "2"), ("3", "4"), ("5", "6"))


def ghz_network(sources: Sequence = ("1", "3", "5"), theta: float = np.pi / 4) -> Network:
    """
    Rotators on each source port, PBS between ports (1,3) then (3,5), a
    second rotator per port, and polarization-resolving detection.
    Port a ends with {h_1, v_3}, port c with {h_3, v_5}, port d with {h_5, v_1}.
    """
    a, c, d = (str(s) for s in sources)
    ports = [optical_modes(q) for q in (a, c, d)]
    elements = [pol_rotator(h, v, theta) for h, v in ports]
    elements.append(pbs(*optical_modes(a), *optical_modes(c)))
    elements.append(pbs(*optical_modes(c), *optical_modes(d)))
    elements.extend(pol_rotator(h, v, theta) for h, v in ports)
    modes = tuple(m for port in ports for m in port)
    return Network(tuple(elements), modes, modes, name="ghz")


def _one_per_port(pattern: ClickPattern) -> bool:
    c = pattern.counts
    return len(c) == 6 and all(c[k] + c[k + 1] == 1 for k in (0, 2, 4))


def _h_clicks(pattern: ClickPattern) -> int:
    return sum(pattern.counts[k] for k in (0, 2, 4))


def three_cluster_rule(pairs: Sequence[Tuple[str, str]] = DEFAULT_PAIRS) -> HeraldRule:
    first_kept, middle_kept = pairs[0][1], pairs[1][1]

    def corrections(pattern: ClickPattern) -> Tuple[Correction, ...]:
        out = []
        if _h_clicks(pattern) % 2:
            out.append(Correction.gate(first_kept, "X"))
        out.append(Correction.gate(middle_kept, "H"))
        return tuple(out)

    return HeraldRule("three-cluster", _one_per_port, corrections)


def prepare_three_cluster(
    eme_inputs: Optional[Sequence] = None,
    loss_model: Optional[LossModel] = None,
    mode: ExecutionMode = ExecutionMode.ANALYTIC,
    rng: Optional[np.random.Generator] = None,
    cutoff: int = DEFAULT_CUTOFF,
    pairs: Sequence[Tuple] = DEFAULT_PAIRS,
    commute_loss: bool = False,
) -> ProtocolOutcome:
    """
    Read out the first qubit of each EME pair, send the photons through the
    rotator/PBS network and accept exactly one photon per output port.
    Success leaves the kept qubits in the linear cluster kept[0]-kept[1]-kept[2]
    after the recorded corrections (X on kept[0] for an odd number of h
    clicks, H on kept[1]); ideal success probability 1/32.
    """
    pairs = tuple((str(a), str(b)) for a, b in pairs)
    if eme_inputs is None:
        eme_inputs = [ideal_eme(a, b, cutoff=cutoff) for a, b in pairs]
    if len(eme_inputs) != 3:
        raise OutOfRange(f"three EME inputs expected, got {len(eme_inputs)}")
    state = _as_mixed(eme_inputs[0])
    for other in eme_inputs[1:]:
        state = tensor_mixed(state, _as_mixed(other))

    sources = tuple(a for a, _ in pairs)
    for q in sources:
        state = state.map(lambda b, q=q: readout(b, q))
    net = _with_loss(ghz_network(sources), loss_model, commute_loss, tag="ghz")
    branches = _detect(state, net)
    rule = three_cluster_rule(pairs)
    outcome = herald(branches, rule, mode, rng, consumed=sources)
    outcome = replace(outcome,
                      branches=tuple(replace(b, value=_h_clicks(b.pattern)) for b in outcome.branches),
                      details={"kept": [b for _, b in pairs], "eta": loss_model.eta if loss_model else 1.0})
    if mode is ExecutionMode.SAMPLED and not outcome.success:
        raise HeraldFailed(f"three-cluster herald failed on pattern {outcome.rejected[0].pattern.label()}")
    logger.info("three-cluster: p=%.8g over %d accepted patterns", outcome.probability, len(outcome.branches))
    return outcome


# --------------------------------------------------------------------
# Destructive CZ fusion
# --------------------------------------------------------------------
def cz_network(link: Tuple = ("1", "2")) -> Network:
    """Hadamard on the first link photon, then a 50/50 beamsplitter per polarization.
    Output port a is the first link's spatial mode, b the second's."""
    h1, v1 = optical_modes(link[0])
    h2, v2 = optical_modes(link[1])
    elements = (hadamard_gate(h1, v1), beamsplitter(h1, h2, 0.5), beamsplitter(v1, v2, 0.5))
    modes = (h1, v1, h2, v2)
    return Network(elements, modes, modes, name=f"cz-{link[0]}-{link[1]}")


def _cz_counts(pattern: ClickPattern) -> Tuple[int, int, int, int]:
    h_a, v_a, h_b, v_b = pattern.counts
    return h_a, v_a, h_b, v_b


def _cz_status(pattern: ClickPattern) -> OutcomeStatus:
    h_a, v_a, h_b, v_b = _cz_counts(pattern)
    if pattern.total < 2:
        return OutcomeStatus.INDETERMINATE
    if pattern.total == 2 and h_a + h_b == 1 and v_a + v_b == 1:
        return OutcomeStatus.SUCCESS
    return OutcomeStatus.FAILURE


def cz_rule(targets: Tuple) -> HeraldRule:
    t3, t4 = (str(t) for t in targets)

    def corrections(pattern: ClickPattern) -> Tuple[Correction, ...]:
        h_a, v_a, h_b, v_b = _cz_counts(pattern)
        if (h_a and v_a) or (h_b and v_b):
            return (Correction.gate(t4, "Z"),)
        return (Correction.gate(t3, "Z"), Correction.gate(t4, "Z"))

    return HeraldRule("cz-fuse", lambda p: _cz_status(p) is OutcomeStatus.SUCCESS, corrections, _cz_status)


def _failure_corrections(pattern: ClickPattern, link: Tuple, targets: Tuple,
                         graph: Optional[ClusterGraph]) -> Tuple[Tuple[Correction, ...], Optional[int]]:
    """Same-polarization pair: target 3 lands in |0>_L (h h) or |1>_L (v v)."""
    h_a, v_a, h_b, v_b = _cz_counts(pattern)
    t3, t4 = (str(t) for t in targets)
    if h_a + h_b == 2:
        return (), 0
    if v_a + v_b == 2:
        flips = {t4: 1}
        if graph is not None:
            for n in graph.neighbors(t3):
                if n not in {str(x) for x in link}:
                    flips[n] = flips.get(n, 0) + 1
        return tuple(Correction.gate(q, "Z") for q, k in sorted(flips.items()) if k % 2), 1
    return (), None


def cz_fuse(
    state,
    link_qubits: Tuple = ("1", "2"),
    target_qubits: Tuple = ("3", "4"),
    loss_model: Optional[LossModel] = None,
    mode: ExecutionMode = ExecutionMode.ANALYTIC,
    rng: Optional[np.random.Generator] = None,
    graph: Optional[ClusterGraph] = None,
    commute_loss: bool = False,
) -> ProtocolOutcome:
    """
    Input (H_1† + V_1† Z_3)(H_2† + V_2† Z_4)|Φ'>. Opposite polarizations
    herald CZ_34|Φ'> up to Z_4 (same port) or Z_3 Z_4 (different ports).
    Equal polarizations project target 3 onto a Z eigenstate (failure).
    Fewer than two clicks is INDETERMINATE; Z measurements on both targets
    are the advised recovery. Pass ``graph`` to get the Z corrections on
    target 3's remaining neighbours for the |1>_L failure branch.

    Under loss both heralding photons must arrive, so on inputs degraded at
    r(eta) the success probability is (1/2)·g², g = eta/(2 - eta), not g/2
    (see ``workers.resources.bonding_success_probability``).
    """
    link = tuple(str(x) for x in link_qubits)
    targets = tuple(str(x) for x in target_qubits)
    mixed = _as_mixed(state)
    for q in link:
        mixed = mixed.map(lambda b, q=q: readout(b, q))
    net = _with_loss(cz_network(link), loss_model, commute_loss, tag=f"cz-{link[0]}-{link[1]}")
    branches = _detect(mixed, net)
    outcome = herald(branches, cz_rule(targets), mode, rng, consumed=link)

    rejected = []
    for b in outcome.rejected:
        if b.status is OutcomeStatus.FAILURE:
            corr, value = _failure_corrections(b.pattern, link, targets, graph)
            b = replace(b, corrections=corr, value=value)
        rejected.append(b)
    p_success = float(sum(b.probability for b in outcome.branches))
    p_fail = float(sum(b.probability for b in rejected if b.status is OutcomeStatus.FAILURE))
    p_ind = float(sum(b.probability for b in rejected if b.status is OutcomeStatus.INDETERMINATE))
    details = {
        "probabilities": {"success": p_success, "failure": p_fail, "indeterminate": p_ind},
        "targets": list(targets),
    }
    if p_ind > 0.0:
        details["recovery"] = [f"measure Z on {t}" for t in targets]
    consumed = link
    if mode is ExecutionMode.SAMPLED and outcome.status is OutcomeStatus.FAILURE:
        consumed = link + (targets[0],)
    logger.info("cz(%s,%s): success=%.6g failure=%.6g indeterminate=%.6g", *targets, p_success, p_fail, p_ind)
    return replace(outcome, rejected=tuple(rejected), consumed=consumed, details=details)


# --------------------------------------------------------------------
# Reference cluster states and logical views
# --------------------------------------------------------------------
def encode_cluster(graph: ClusterGraph, registry: Optional[ModeRegistry] = None,
                   cutoff: int = DEFAULT_CUTOFF) -> PureState:
    """Π_edges CZ |+>_L^n with |+>_L = (H† + V†)|G>/√2, phases applied in the logical basis."""
    qubits = graph.vertices
    reg = registry or ModeRegistry.for_qubits(qubits)
    n = len(qubits)
    pos = {q: k for k, q in enumerate(qubits)}
    H_idx = [reg.index_of(atomic_modes(q)[0]) for q in qubits]
    V_idx = [reg.index_of(atomic_modes(q)[1]) for q in qubits]
    amps = {}
    scale = 2.0 ** (-n / 2.0)
    for bits in np.ndindex(*([2] * n)):
        sign = 1.0
        for u, v in graph.edges:
            if bits[pos[u]] and bits[pos[v]]:
                sign = -sign
        key = [0] * len(reg)
        for k, b in enumerate(bits):
            key[V_idx[k] if b else H_idx[k]] = 1
        amps[tuple(key)] = sign * scale
    return from_amplitudes(reg, amps, cutoff)


def logical_state(amplitudes: Sequence[complex], qubits: Sequence, registry: Optional[ModeRegistry] = None,
                  cutoff: int = DEFAULT_CUTOFF) -> PureState:
    """Ensemble encoding of a logical state given on bitstrings (first qubit most significant)."""
    qubits = [str(q) for q in qubits]
    reg = registry or ModeRegistry.for_qubits(qubits)
    amps = {}
    for idx, bits in enumerate(np.ndindex(*([2] * len(qubits)))):
        a = complex(amplitudes[idx])
        if a == 0:
            continue
        key = [0] * len(reg)
        for q, b in zip(qubits, bits):
            key[reg.index_of(atomic_modes(q)[b])] = 1
        amps[tuple(key)] = a
    return from_amplitudes(reg, amps, cutoff)


def logical_amplitudes(state: PureState, qubits: Sequence) -> np.ndarray:
    """Amplitudes on the 2^n computational basis (other modes must be empty)."""
    qubits = [str(q) for q in qubits]
    reg = state.registry
    out = np.zeros(2 ** len(qubits), dtype=complex)
    for idx, bits in enumerate(np.ndindex(*([2] * len(qubits)))):
        key = [0] * len(reg)
        for q, b in zip(qubits, bits):
            key[reg.index_of(atomic_modes(q)[b])] = 1
        out[idx] = state.amplitude(key)
    return out


def pair_groups(qubits: Sequence) -> List[Tuple[str, ...]]:
    """Consecutive pairs in registry order; an odd qubit out stands alone."""
    qubits = [str(q) for q in qubits]
    return [tuple(qubits[k:k + 2]) for k in range(0, len(qubits), 2)]


def leakage_weight(state: StateLike, groups: Optional[Sequence[Sequence]] = None) -> float:
    """
    Weight outside the computational subspace. Each group of qubits must
    hold exactly len(group) atomic excitations. The default groups are the
    entangled pairs from ``pair_groups``, so an EME pair may carry both of
    its excitations in one ensemble. Pass ``[(q,) for q in qubits]`` for
    cluster states, where every qubit holds one excitation.
    """
    mixed = MixedState.of(state) if isinstance(state, PureState) else state
    if not mixed.branches:
        return 0.0
    reg = mixed.registry
    if groups is None:
        groups = pair_groups(reg.qubits())
    index_groups = [([reg.index_of(m) for q in g for m in atomic_modes(q)], len(g)) for g in groups]
    leaked = 0.0
    for b in mixed.branches:
        n2 = b.norm2()
        bad = sum(abs(a) ** 2 for key, a in b.amplitudes.items()
                  if any(sum(key[i] for i in idx) != want for idx, want in index_groups))
        leaked += b.weight * bad / n2
    return float(leaked / mixed.total_weight())


# --------------------------------------------------------------------
# Single-qubit measurement
# --------------------------------------------------------------------
def measurement_unitary(theta: float) -> np.ndarray:
    """Maps the ±1 eigenvectors of sinθ X + cosθ Y onto h (+1) and v (-1)."""
    phi = np.pi / 2.0 - theta
    e = np.exp(-1j * phi)
    return np.array([[1.0, e], [1.0, -e]], dtype=complex) / np.sqrt(2.0)


def _measure_status(pattern: ClickPattern) -> OutcomeStatus:
    if pattern.total == 0:
        return OutcomeStatus.INDETERMINATE
    return OutcomeStatus.SUCCESS if pattern.total == 1 else OutcomeStatus.FAILURE


def measure_qubit(
    state,
    qubit,
    theta: float,
    loss_model: Optional[LossModel] = None,
    mode: ExecutionMode = ExecutionMode.ANALYTIC,
    rng: Optional[np.random.Generator] = None,
) -> ProtocolOutcome:
    """
    Measure sinθ X + cosθ Y: readout, optical rotation, h/v detection.
    An h click is +1, a v click -1, no click is a heralded loss
    (INDETERMINATE). Readout and detector loss of the measured qubit are
    charged here.
    """
    q = str(qubit)
    h, v = optical_modes(q)
    mixed = _as_mixed(state).map(lambda b: readout(b, q))
    net = Network((mode_unitary((h, v), measurement_unitary(theta)),), (h, v), (h, v), name=f"measure-{q}")
    net = _with_loss(net, loss_model, False, tag=f"measure-{q}")
    branches = _detect(mixed, net)
    rule = HeraldRule(f"measure-{q}", lambda p: _measure_status(p) is OutcomeStatus.SUCCESS, classify=_measure_status)
    outcome = herald(branches, rule, mode, rng, consumed=(q,))
    labelled = tuple(replace(b, value=1 if b.pattern.counts[0] == 1 else -1) for b in outcome.branches)
    p_loss = float(sum(b.probability for b in outcome.rejected if b.status is OutcomeStatus.INDETERMINATE))
    return replace(outcome, branches=labelled, details={"theta": theta, "heralded_loss": p_loss})


# --------------------------------------------------------------------
# Readout deferral of local unitaries
# --------------------------------------------------------------------
def defer_unitary_check(state: PureState, qubit, U, tol: float = 1e-10) -> bool:
    """R U^(atomic) |ψ> == U^(optical) R |ψ> to ``tol``."""
    M = check_unitary(U)
    before = readout(apply_local(state, qubit, M, "atomic"), qubit)
    after = apply_local(readout(state, qubit), qubit, M, "optical")
    keys = set(before.amplitudes) | set(after.amplitudes)
    worst = max((abs(before.amplitude(k) - after.amplitude(k)) for k in keys), default=0.0)
    return bool(worst <= tol)


__all__ = [
    "ExcitationParams", "Encoding", "LogicalQubit", "ClusterGraph", "fuse_graphs",
    "excitation_coefficients", "excite", "readout", "apply_local", "apply_corrections",
    "eme_network", "eme_round_success_probability", "ideal_eme", "eme_correction", "prepare_eme",
    "ghz_network", "three_cluster_rule", "prepare_three_cluster",
    "cz_network", "cz_rule", "cz_fuse",
    "encode_cluster", "logical_state", "logical_amplitudes", "pair_groups", "leakage_weight",
    "measurement_unitary", "measure_qubit", "defer_unitary_check",
]
