import numpy as np
import pytest

from core.codes import OutOfRange
from core.config import LossModel
from core.detection import ExecutionMode, OutcomeStatus
from core.fock import basis_state, tensor
from core.registry import ModeRegistry
from workers.protocols import ClusterGraph, cz_fuse, encode_cluster, fuse_graphs, logical_state
from workers.resources import bonding_success_probability
from workers.verify import cz_line_fidelities, cz_term_groups, id_cluster, kept_state, loss_rate, state_fidelity

TARGETS = ("3", "4")


@pytest.fixture
def fused(cz_pairs):
    return cz_fuse(encode_cluster(cz_pairs), ("1", "2"), TARGETS, graph=cz_pairs)


def test_ideal_probabilities(fused):
    probs = fused.details["probabilities"]
    assert probs["success"] == pytest.approx(0.5, abs=1e-10)
    assert probs["failure"] == pytest.approx(0.5, abs=1e-10)
    assert probs["indeterminate"] == pytest.approx(0.0, abs=1e-12)
    assert "recovery" not in fused.details


def test_four_success_patterns(fused):
    assert len(fused.branches) == 4
    for b in fused.branches:
        assert b.probability == pytest.approx(1 / 8, abs=1e-10)
        h_a, v_a, h_b, v_b = b.pattern.counts
        labels = [c.label() for c in b.corrections]
        if (h_a and v_a) or (h_b and v_b):
            assert labels == ["Z4"]
        else:
            assert labels == ["Z3", "Z4"]


def test_success_branches_hold_the_bond(fused):
    bond = encode_cluster(ClusterGraph.line(TARGETS))
    for b in fused.branches:
        assert state_fidelity(kept_state(b.corrected(), TARGETS), bond) == pytest.approx(1.0, abs=1e-10)


def test_failure_branches_project_target(fused):
    zero_plus = logical_state(np.array([1, 1, 0, 0]) / np.sqrt(2), TARGETS)
    one_plus = logical_state(np.array([0, 0, 1, 1]) / np.sqrt(2), TARGETS)
    failures = [b for b in fused.rejected if b.status is OutcomeStatus.FAILURE]
    assert {b.value for b in failures} == {0, 1}
    for b in failures:
        want = zero_plus if b.value == 0 else one_plus
        assert state_fidelity(kept_state(b.corrected(), TARGETS), want) == pytest.approx(1.0, abs=1e-10)
        if b.value == 0:
            assert b.corrections == ()


def chain(labels):
    return ClusterGraph.line(labels)


@pytest.mark.parametrize("n,m", [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_line_fusion(n, m):
    A = chain(["5", "3", "1"][3 - n:])
    B = chain(["2", "4", "6"][:m])
    whole = A.disjoint_union(B)
    out = cz_fuse(encode_cluster(whole), ("1", "2"), TARGETS, graph=whole)
    result = fuse_graphs(A, B, ("1", "2"), TARGETS)
    assert len(result) == n + m - 2
    order = result.vertices
    ref = encode_cluster(result, registry=ModeRegistry.for_qubits(order))
    for b in out.branches:
        assert state_fidelity(kept_state(b.corrected(), order), ref) == pytest.approx(1.0, abs=1e-10)

    rest = whole.without(["1", "2", "3"])
    others = rest.vertices
    for b in out.rejected:
        if b.status is not OutcomeStatus.FAILURE:
            continue
        qubit3 = basis_state(ModeRegistry.for_qubits(["3"]), {"H_3" if b.value == 0 else "V_3": 1})
        want = tensor(qubit3, encode_cluster(rest))
        got = kept_state(b.corrected(), ("3",) + others)
        assert state_fidelity(got, want) == pytest.approx(1.0, abs=1e-10)


def test_lossy_fusion_matches_bonding_probability(cz_pairs):
    eta = 0.9
    inputs = id_cluster(cz_pairs, loss_rate(eta))
    out = cz_fuse(inputs, ("1", "2"), TARGETS, loss_model=LossModel.from_eta(eta))
    assert out.probability == pytest.approx(bonding_success_probability(eta), abs=1e-6)
    assert out.details["probabilities"]["indeterminate"] > 0.0
    assert out.details["recovery"] == ["measure Z on 3", "measure Z on 4"]


def test_sampled_failure_consumes_target(cz_pairs):
    rng = np.random.default_rng(9)
    state = encode_cluster(cz_pairs)
    seen = set()
    for _ in range(40):
        out = cz_fuse(state, ("1", "2"), TARGETS, mode=ExecutionMode.SAMPLED, rng=rng)
        seen.add(out.status)
        if out.status is OutcomeStatus.FAILURE:
            assert out.consumed == ("1", "2", "3")
        else:
            assert out.consumed == ("1", "2")
    assert seen == {OutcomeStatus.SUCCESS, OutcomeStatus.FAILURE}


def test_four_term_groups(fused):
    groups = cz_term_groups(fused)
    assert set(groups) == {"Z4", "Z3Z4", "3:0", "3:1"}
    for prob in groups.values():
        assert prob == pytest.approx(0.25, abs=1e-10)


@pytest.mark.parametrize("n,m", [(2, 2), (2, 3), (3, 2)])
def test_line_fidelities_helper(n, m):
    success, failure = cz_line_fidelities(n, m)
    assert success == pytest.approx(1.0, abs=1e-8)
    assert failure == pytest.approx(1.0, abs=1e-8)


def test_line_fidelities_need_two_qubit_chains():
    with pytest.raises(OutOfRange):
        cz_line_fidelities(1, 3)
