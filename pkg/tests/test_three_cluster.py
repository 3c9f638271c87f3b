import itertools

import numpy as np
import pytest

from core.codes import HeraldFailed, OutOfRange
from core.config import LossModel
from core.detection import PAULI, ExecutionMode, apply_corrections
from core.fock import fidelity, from_amplitudes
from core.registry import ModeRegistry
from workers.protocols import (
    ClusterGraph,
    apply_local,
    eme_correction,
    encode_cluster,
    ideal_eme,
    prepare_three_cluster,
)
from workers.verify import (
    equivalent_up_to_corrections,
    correction_group,
    id_ghz_reference,
    kept_state,
    loss_rate,
    mixed_fidelity,
    pauli_generators,
    state_fidelity,
)

KEPT = ("2", "4", "6")
LINE = encode_cluster(ClusterGraph.line(KEPT))


@pytest.fixture(scope="module")
def ideal():
    return prepare_three_cluster(cutoff=2)


def test_success_probability(ideal):
    assert ideal.success
    assert ideal.probability == pytest.approx(1 / 32, abs=1e-10)
    assert ideal.consumed == ("1", "3", "5")


def test_corrected_output_is_linear_cluster(ideal):
    assert state_fidelity(kept_state(ideal, KEPT), LINE) == pytest.approx(1.0, abs=1e-8)


def test_every_branch_is_corrected_separately(ideal):
    for b in ideal.branches:
        assert state_fidelity(kept_state(b.corrected(), KEPT), LINE) == pytest.approx(1.0, abs=1e-8)
        flips = [c.label() for c in b.corrections if c.name == "X"]
        assert (b.value % 2 == 1) == (flips == ["X2"])


def test_uncorrected_branches_differ_only_by_paulis(ideal):
    group = correction_group(pauli_generators(KEPT))
    for b in ideal.branches:
        rotated = apply_local(kept_state(b.state, KEPT), "4", PAULI["H"])
        ok, element = equivalent_up_to_corrections(rotated, LINE, group)
        assert ok
        assert len(element) <= 1


def heralded_pair(i, j, sign_h, sign_v):
    """(H_i + s_h H_j)(V_i + s_v V_j)|G>/2: an EME pair before its recorded correction."""
    reg = ModeRegistry.for_qubits([i, j])
    amps = {}
    for (h, sh), (v, sv) in itertools.product([(f"H_{i}", 1), (f"H_{j}", sign_h)], [(f"V_{i}", 1), (f"V_{j}", sign_v)]):
        key = [0] * len(reg)
        key[reg.index_of(h)] = 1
        key[reg.index_of(v)] = 1
        amps[tuple(key)] = 0.5 * sh * sv
    return from_amplitudes(reg, amps, cutoff=2)


@pytest.mark.parametrize("sign_h,sign_v", list(itertools.product([1, -1], repeat=2)))
def test_every_eme_herald_sign_gives_the_cluster(sign_h, sign_v):
    inputs = [apply_corrections(heralded_pair(a, b, sign_h, sign_v), [eme_correction(b, sign_h, sign_v)])
              for a, b in (("1", "2"), ("3", "4"), ("5", "6"))]
    assert fidelity(inputs[0], ideal_eme("1", "2", cutoff=2)) == pytest.approx(1.0, abs=1e-12)
    out = prepare_three_cluster(eme_inputs=inputs, cutoff=2)
    assert out.probability == pytest.approx(1 / 32, abs=1e-10)
    assert state_fidelity(kept_state(out, KEPT), LINE) == pytest.approx(1.0, abs=1e-8)


def test_wrong_input_count():
    with pytest.raises(OutOfRange):
        prepare_three_cluster(eme_inputs=[ideal_eme("1", "2", cutoff=2)])


@pytest.mark.parametrize("eta", [0.95, 0.9, 0.8])
def test_lossy_success_probability(eta):
    out = prepare_three_cluster(loss_model=LossModel.from_eta(eta), cutoff=2)
    assert out.probability == pytest.approx(eta ** 3 * (2 - eta) ** 3 / 32, rel=1e-8)


def test_split_efficiencies_depend_on_product():
    a = prepare_three_cluster(loss_model=LossModel(0.9, 0.8), cutoff=2)
    b = prepare_three_cluster(loss_model=LossModel(0.72, 1.0), cutoff=2)
    assert a.probability == pytest.approx(b.probability, rel=1e-8)


@pytest.mark.parametrize("eta", [1.0, 0.9, 0.8, 2 / 3])
def test_lossy_output_follows_independent_loss_law(eta):
    out = prepare_three_cluster(loss_model=LossModel.from_eta(eta), cutoff=2, commute_loss=True)
    f = mixed_fidelity(kept_state(out, KEPT), id_ghz_reference(loss_rate(eta)))
    assert f >= 1 - 1e-8


def test_uncorrelated_loss_reference_does_not_match():
    eta = 0.8
    out = prepare_three_cluster(loss_model=LossModel.from_eta(eta), cutoff=2)
    f = mixed_fidelity(kept_state(out, KEPT), id_ghz_reference(loss_rate(eta), correlated=False))
    assert f < 1 - 1e-6


@pytest.mark.slow
def test_sampled_success_rate():
    rng = np.random.default_rng(5)
    hits = 0
    for _ in range(400):
        try:
            out = prepare_three_cluster(mode=ExecutionMode.SAMPLED, rng=rng, cutoff=2)
        except HeraldFailed:
            continue
        hits += 1
        corrected = apply_corrections(out.state, out.branches[0].corrections)
        assert state_fidelity(kept_state(corrected, KEPT), LINE) == pytest.approx(1.0, abs=1e-8)
    assert 2 <= hits <= 30
