import numpy as np
import pytest
from scipy.stats import unitary_group

from core.codes import NonUnitary
from core.config import LossModel
from core.detection import OutcomeStatus
from core.fock import from_amplitudes
from workers.protocols import (
    ClusterGraph,
    defer_unitary_check,
    encode_cluster,
    logical_amplitudes,
    logical_state,
    measure_qubit,
    measurement_unitary,
)
from workers.verify import kept_state, state_fidelity

SQ = 1 / np.sqrt(2)


def test_measurement_unitary_is_unitary():
    for theta in np.linspace(0.0, np.pi, 7):
        U = measurement_unitary(theta)
        assert np.allclose(U.conj().T @ U, np.eye(2))


def test_x_measurement_of_plus():
    out = measure_qubit(logical_state([SQ, SQ], ["1"]), "1", np.pi / 2)
    assert out.probability == pytest.approx(1.0)
    assert [b.value for b in out.branches] == [1]
    assert out.consumed == ("1",)


def test_y_measurement_of_y_eigenstate():
    out = measure_qubit(logical_state([SQ, 1j * SQ], ["1"]), "1", 0.0)
    assert out.probability == pytest.approx(1.0)
    assert out.branches[0].value == 1


def test_x_measurement_on_two_cluster():
    graph = ClusterGraph.line(["1", "2"])
    out = measure_qubit(encode_cluster(graph), "1", np.pi / 2)
    assert out.probability == pytest.approx(1.0)
    assert len(out.branches) == 2
    for b in out.branches:
        assert b.probability == pytest.approx(0.5)
        want = logical_state([1, 0] if b.value == 1 else [0, 1], ["2"])
        assert state_fidelity(kept_state(b.state, ["2"]), want) == pytest.approx(1.0, abs=1e-12)


def test_heralded_loss():
    out = measure_qubit(logical_state([SQ, SQ], ["1"]), "1", np.pi / 2, loss_model=LossModel(0.9, 0.8))
    assert out.details["heralded_loss"] == pytest.approx(1 - 0.9 * 0.8)
    assert out.probability_of(OutcomeStatus.INDETERMINATE) == pytest.approx(0.28)
    assert out.probability == pytest.approx(0.72)


def test_logical_amplitudes_round_trip():
    amps = np.array([0.5, -0.5, 0.5j, 0.5])
    st = logical_state(amps, ["a", "b"])
    assert np.allclose(logical_amplitudes(st, ["a", "b"]), amps)


@pytest.mark.parametrize("case", range(200))
def test_readout_defers_local_unitaries(one_qubit, case):
    rng = np.random.default_rng([8, case])
    amps = {}
    for _ in range(int(rng.integers(1, 6))):
        key = tuple(int(x) for x in rng.integers(0, 3, size=4))
        amps[key] = complex(rng.normal(), rng.normal())
    st = from_amplitudes(one_qubit, amps, cutoff=4)
    U = unitary_group.rvs(2, random_state=int(rng.integers(2 ** 31)))
    assert defer_unitary_check(st, "1", U)


def test_deferral_rejects_non_unitary(one_qubit):
    st = logical_state([1, 0], ["1"])
    with pytest.raises(NonUnitary):
        defer_unitary_check(st, "1", [[1, 1], [0, 1]])
