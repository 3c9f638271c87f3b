import numpy as np
import pytest

from core.codes import OutOfRange, RoundFailed
from core.config import LossModel
from core.detection import ExecutionMode
from core.fock import fidelity, vacuum
from workers.protocols import (
    ExcitationParams,
    eme_correction,
    eme_round_success_probability,
    excitation_coefficients,
    excite,
    ideal_eme,
    leakage_weight,
    pair_groups,
    prepare_eme,
)
from workers.verify import eme_excitation_reference, lossy_eme, mixed_fidelity

P = 0.01


def test_excitation_params_range():
    with pytest.raises(OutOfRange):
        ExcitationParams(1.0)
    with pytest.raises(OutOfRange):
        ExcitationParams(0.1, n_max=-1)


def test_coefficient_ratio():
    c = excitation_coefficients(P, 3)
    assert c[0] == 1.0
    assert (c[2] / c[1]) ** 2 == pytest.approx(P / 4)


def test_excite_pair_amplitudes(one_qubit):
    st = excite(vacuum(one_qubit, cutoff=3), "1", "h", ExcitationParams(P, n_max=2))
    a1 = st.amplitude((1, 0, 1, 0))
    a2 = st.amplitude((2, 0, 2, 0))
    assert abs(a2 / a1) ** 2 == pytest.approx(P)
    assert st.norm2() == pytest.approx(1.0)


def test_excite_counts_series_beyond_cutoff(one_qubit):
    st = excite(vacuum(one_qubit, cutoff=1), "1", "v", ExcitationParams(0.2))
    assert st.truncated == 0.0
    deep = excite(vacuum(one_qubit, cutoff=1), "1", "v", ExcitationParams(0.2, n_max=3))
    assert deep.truncated > 0.0
    assert deep.nominal_norm2() == pytest.approx(1.0)


def test_excite_rejects_bad_polarization(one_qubit):
    with pytest.raises(OutOfRange):
        excite(vacuum(one_qubit), "1", "d", ExcitationParams(P))


def test_correction_label():
    assert eme_correction("2", 1, 1).label() == "X2"
    assert eme_correction("2", -1, 1).label().startswith("X·diag(-1,+1)")


def test_ideal_eme_is_exact():
    out = prepare_eme("1", "2", ExcitationParams(P))
    assert out.success
    assert fidelity(out.corrected_state(), ideal_eme("1", "2")) == pytest.approx(1.0, abs=1e-10)
    assert leakage_weight(out.corrected_state()) == pytest.approx(0.0, abs=1e-12)
    assert len(out.branches) == 4


def test_leakage_counts_excitations_per_pair():
    pair = ideal_eme("1", "2")
    assert pair_groups(["1", "2", "3"]) == [("1", "2"), ("3",)]
    assert leakage_weight(pair) == 0.0
    # half the EME weight holds both excitations in one ensemble
    assert leakage_weight(pair, [("1",), ("2",)]) == pytest.approx(0.5)


def test_round_probability_matches_closed_form():
    out = prepare_eme("1", "2", ExcitationParams(P), cutoff=3)
    rounds = out.details["round_probabilities"]
    assert rounds["h"] == pytest.approx(eme_round_success_probability(P, 1.0, 3), rel=1e-10)
    assert rounds["h"] == pytest.approx(2 * P, rel=0.05)
    assert out.probability == pytest.approx(rounds["h"] * rounds["v"], rel=1e-10)


def test_lossy_round_probability_matches_closed_form():
    out = prepare_eme("1", "2", ExcitationParams(P), loss_model=LossModel(0.8, 1.0), cutoff=3)
    assert out.details["round_probabilities"]["h"] == pytest.approx(
        eme_round_success_probability(P, 0.8, 3), rel=1e-10)


def test_lossy_eme_matches_excitation_errors():
    p, eta = 0.01, 0.8
    state = lossy_eme(p, eta, cutoff=3)
    assert mixed_fidelity(state, eme_excitation_reference(p, eta, cutoff=3)) == pytest.approx(1.0, abs=1e-8)
    assert leakage_weight(state) > 1e-3
    assert leakage_weight(lossy_eme(p, 1.0, cutoff=3)) < 1e-10


def test_leakage_grows_linearly_with_rate():
    low, high = leakage_weight(lossy_eme(0.01, 0.8)), leakage_weight(lossy_eme(0.02, 0.8))
    assert high / low == pytest.approx(2.0, rel=0.05)


def test_sampled_eme_succeeds_with_retries():
    rng = np.random.default_rng(3)
    out = prepare_eme("1", "2", ExcitationParams(0.1), mode=ExecutionMode.SAMPLED, rng=rng, max_attempts=500)
    assert out.success
    assert set(out.details["attempts"]) == {"h", "v"}
    assert fidelity(out.corrected_state(), ideal_eme("1", "2")) == pytest.approx(1.0, abs=1e-10)


def test_sampled_eme_gives_up():
    rng = np.random.default_rng(3)
    with pytest.raises(RoundFailed):
        prepare_eme("1", "2", ExcitationParams(1e-9), mode=ExecutionMode.SAMPLED, rng=rng, max_attempts=2)


def test_sampled_eme_needs_rng():
    with pytest.raises(OutOfRange):
        prepare_eme("1", "2", ExcitationParams(P), mode=ExecutionMode.SAMPLED)
