import numpy as np
import pytest

from core.codes import GroupTooLarge
from core.detection import Correction, apply_corrections
from core.fock import MixedState, basis_state, fidelity, vacuum
from workers.protocols import ClusterGraph, encode_cluster, logical_state
from workers.verify import (
    apply_excitation_superop,
    apply_loss_superop,
    apply_qubit_loss,
    claims_passed,
    correction_group,
    deferral_failures,
    equivalent_up_to_corrections,
    gate_factor,
    id_cluster,
    loss_rate,
    mixed_fidelity,
    pauli_generators,
    run_claims,
    scan_loss,
    threshold_crossing,
    threshold_margin,
    tree_source_loss_rate,
)

SQ = 1 / np.sqrt(2)


def test_loss_arithmetic():
    assert loss_rate(2 / 3) == pytest.approx(0.25)
    assert loss_rate(0.8) == pytest.approx(1 / 6)
    assert loss_rate(1.0) == 0.0
    assert gate_factor(1.0) == 1.0
    assert threshold_margin(1.0) == pytest.approx(0.5)
    assert tree_source_loss_rate(0.8) == pytest.approx(1 - gate_factor(0.8))


def test_threshold_crossing():
    assert threshold_crossing() == pytest.approx(2 / 3, abs=1e-10)
    assert threshold_margin(0.7) > 0 > threshold_margin(0.6)


def test_scan_inserts_crossing():
    rows = scan_loss([1.0, 0.5], include_crossing=True)
    assert [r["eta"] for r in rows] == pytest.approx([0.5, 2 / 3, 1.0])
    assert rows[1]["margin"] == pytest.approx(0.0, abs=1e-12)
    assert set(rows[0]) == {"eta", "r", "g", "margin"}


def test_loss_superop_on_single_excitation(one_qubit):
    photon = basis_state(one_qubit, {"H_1": 1})
    out = apply_loss_superop(photon, "H_1", 0.3)
    assert out.total_weight() == pytest.approx(1.0)
    assert fidelity(out, photon) == pytest.approx(0.7)
    assert fidelity(out, vacuum(one_qubit)) == pytest.approx(0.3)


def test_qubit_loss_empties_both_modes():
    plus = logical_state([SQ, SQ], ["1"])
    out = apply_qubit_loss(plus, "1", 0.25)
    assert fidelity(out, plus) == pytest.approx(0.75)
    assert fidelity(out, vacuum(plus.registry, plus.cutoff)) == pytest.approx(0.25)


def test_excitation_superop_weights(one_qubit):
    out = apply_excitation_superop(vacuum(one_qubit, cutoff=3), "H_1", 0.1, 0.5)
    x = 0.05
    assert fidelity(out, vacuum(one_qubit, cutoff=3)) == pytest.approx(1 / (1 + x + x ** 2 + x ** 3))


def test_excitation_superop_vanishes_without_loss(one_qubit):
    st = vacuum(one_qubit)
    assert fidelity(apply_excitation_superop(st, "V_1", 0.2, 1.0), st) == pytest.approx(1.0)


def test_id_cluster_without_loss_is_pure():
    graph = ClusterGraph.line(["a", "b", "c"])
    assert mixed_fidelity(id_cluster(graph, 0.0), encode_cluster(graph)) == pytest.approx(1.0)


def test_mixed_fidelity_agrees_with_pure_reference():
    graph = ClusterGraph.line(["a", "b"])
    lossy = id_cluster(graph, 0.2)
    ref = encode_cluster(graph)
    assert mixed_fidelity(lossy, ref) == pytest.approx(fidelity(lossy, ref), abs=1e-12)
    assert mixed_fidelity(lossy, lossy) == pytest.approx(1.0)
    assert mixed_fidelity(MixedState(()), ref) == 0.0


def test_group_limit():
    gens = pauli_generators([str(q) for q in range(7)])[:13]
    assert len(gens) == 13
    with pytest.raises(GroupTooLarge):
        correction_group(gens)
    assert len(correction_group(gens[:4])) == 16


def test_equivalence_finds_the_correction():
    ref = encode_cluster(ClusterGraph.line(["1", "2"]))
    flipped = apply_corrections(ref, [Correction.gate("2", "X")])
    ok, element = equivalent_up_to_corrections(flipped, ref, correction_group(pauli_generators(["1", "2"])))
    assert ok
    # X2 acts on this cluster like Z1, which comes first in the group
    assert [c.label() for c in element] == ["Z1"]


def test_equivalence_reports_failure():
    ref = encode_cluster(ClusterGraph.line(["1", "2"]))
    other = logical_state([1, 0, 0, 0], ["1", "2"])
    ok, element = equivalent_up_to_corrections(other, ref, correction_group(pauli_generators(["1", "2"])))
    assert not ok and element is None


def test_readout_deferral_never_fails():
    assert deferral_failures(cases=20, seed=3) == 0


@pytest.mark.slow
def test_headline_claims_hold():
    results = run_claims(seed=7)
    failed = [r.claim for r in results if not r.passed]
    assert not failed
    assert claims_passed(results)
    names = {r.claim for r in results}
    for name in ("cz term group Z3Z4", "cz failure fidelity (3+2 chain)", "ID loss law at eta=0.666667",
                 "loss commutation (cz)", "lossy EME vs excitation errors", "leakage ratio p=0.02 / p=0.01",
                 "readout deferral failures (200 cases)", "dense oracle deviation (1000 cases)",
                 "attempts per added qubit (N=50)"):
        assert name in names
