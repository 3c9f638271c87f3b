import numpy as np
import pytest

from core.codes import DuplicateMode, OutOfRange, RegistryMismatch, UnequalEfficiencies
from core.config import LossModel
from core.fock import apply_mode_unitary, basis_state
from core.optics import (
    LossRole,
    Network,
    beamsplitter,
    beamsplitter_matrix,
    commute_loss_to_sources,
    hadamard_gate,
    hadamard_matrix,
    insert_loss,
    loss_mode_name,
    pbs,
    phase_shift,
    pol_rotator,
)
from core.oracle import random_sparse_state
from workers.protocols import eme_network, ghz_network
from workers.verify import commutation_cases, loss_commutation_gap, network_click_distribution


def test_beamsplitter_matrix_range():
    M = beamsplitter_matrix(0.3)
    assert np.allclose(M.conj().T @ M, np.eye(2))
    with pytest.raises(OutOfRange):
        beamsplitter_matrix(1.2)


def test_element_needs_distinct_modes():
    with pytest.raises(DuplicateMode):
        beamsplitter("h_1", "h_1", 0.5)


def test_pbs_transmits_h_and_swaps_v(two_qubits):
    net = Network((pbs("h_1", "v_1", "h_2", "v_2"),), ("h_1", "v_1", "h_2", "v_2"), ())
    h_in = net.run(basis_state(two_qubits, {"h_1": 1}))
    v_in = net.run(basis_state(two_qubits, {"v_1": 1}))
    assert h_in.amplitude((0, 0, 1, 0, 0, 0, 0, 0)) == pytest.approx(1.0)
    assert v_in.amplitude((0, 0, 0, 0, 0, 0, 0, 1)) == pytest.approx(1.0)


def test_disjoint_elements_share_a_layer():
    net = Network((beamsplitter("a", "b", 0.5), beamsplitter("c", "d", 0.2), beamsplitter("b", "c", 0.7)),
                  ("a", "b", "c", "d"), ())
    layers = net.layers()
    assert len(layers) == 2
    assert layers[0][0] == ("a", "b", "c", "d")


def test_fused_layers_match_sequential_application(two_qubits):
    elements = (pol_rotator("h_1", "v_1", 0.4), hadamard_gate("h_2", "v_2"), beamsplitter("h_1", "h_2", 0.5))
    net = Network(elements, ("h_1", "v_1", "h_2", "v_2"), ())
    st = basis_state(two_qubits, {"h_1": 1, "v_2": 1})
    step = st
    for e in elements:
        step = apply_mode_unitary(step, e.modes, e.matrix())
    out = net.run(st)
    for k in set(out.amplitudes) | set(step.amplitudes):
        assert out.amplitude(k) == pytest.approx(step.amplitude(k), abs=1e-12)


def test_network_json_round_trip():
    net = insert_loss(ghz_network(), LossModel(0.9, 0.8))
    back = Network.from_json(net.to_json())
    assert back == net


def test_insert_loss_places_source_and_detector_elements():
    net = insert_loss(eme_network("1", "2", "h"), LossModel(0.9, 0.8), tag="t")
    roles = [e.role for e in net.elements]
    assert roles[:2] == [LossRole.SOURCE, LossRole.SOURCE]
    assert roles[-2:] == [LossRole.DETECTOR, LossRole.DETECTOR]
    assert loss_mode_name("t", LossRole.DETECTOR, "h_1") in net.loss_modes()


def test_commutation_needs_equal_efficiencies():
    net = Network((beamsplitter("a", "la", 0.9, LossRole.SOURCE), beamsplitter("b", "lb", 0.8, LossRole.SOURCE),
                   beamsplitter("a", "b", 0.5)), ("a", "b"), ("a", "b"))
    with pytest.raises(UnequalEfficiencies):
        commute_loss_to_sources(net)


def test_commutation_needs_declared_inputs():
    net = insert_loss(Network((beamsplitter("a", "c", 0.5),), ("a",), ("a",)), LossModel(0.9, 0.9))
    with pytest.raises(RegistryMismatch):
        commute_loss_to_sources(net)


@pytest.mark.parametrize("stage", ["eme", "ghz", "cz"])
def test_loss_commutes_to_sources(stage):
    state, net = commutation_cases(LossModel(0.9, 0.9))[stage]
    assert len(network_click_distribution(state, net)) > 1
    assert loss_commutation_gap(state, net) <= 1e-10


def test_hadamard_is_an_involution():
    H = hadamard_matrix()
    assert np.allclose(H @ H, np.eye(2), atol=1e-12)


def photon_number_weights(state):
    out = {}
    for key, a in state.amplitudes.items():
        out[sum(key)] = out.get(sum(key), 0.0) + abs(a) ** 2
    return out


@pytest.mark.parametrize("case", range(25))
def test_network_preserves_photon_number_and_norm(two_qubits, case):
    rng = np.random.default_rng([6, case])
    st = random_sparse_state(two_qubits, 2, rng, max_occupation=1)
    t, theta, phi = rng.uniform(0.0, 1.0), rng.uniform(0.0, np.pi), rng.uniform(0.0, 2 * np.pi)
    elements = (beamsplitter("h_1", "h_2", t), pol_rotator("h_1", "v_1", theta), pbs("h_1", "v_1", "h_2", "v_2"),
                hadamard_gate("h_2", "v_2"), phase_shift("v_1", phi))
    out = Network(elements, ("h_1", "v_1", "h_2", "v_2"), ()).run(st)
    assert out.norm2() == pytest.approx(st.norm2(), rel=1e-10)
    before, after = photon_number_weights(st), photon_number_weights(out)
    assert set(after) == set(before)
    for n, w in before.items():
        assert after[n] == pytest.approx(w, rel=1e-10)
