import numpy as np
import pytest

from core.codes import OutOfRange
from workers.protocols import eme_round_success_probability
from workers.resources import (
    SEED_SIZE,
    bonding_success_probability,
    expected_bonding_attempts,
    expected_costs,
    grow_walk,
    simulate_components,
    simulate_growth,
    simulate_growth_lossy,
)

P = 0.01


def test_ledger_constants():
    ledger = expected_costs(P)
    assert ledger.eme_cost == pytest.approx(200.0)
    assert ledger.three_cluster_cost == pytest.approx(192 / P)
    assert ledger.four_cluster_cost == pytest.approx(768 / P)
    assert ledger.per_qubit_cost == pytest.approx(1536 / P)
    assert ledger.as_dict()["p"] == P


def test_ledger_rejects_zero_rate():
    with pytest.raises(OutOfRange):
        expected_costs(0.0)


def test_bonding_probability():
    assert bonding_success_probability(1.0) == 0.5
    g = 0.9 / 1.1
    assert bonding_success_probability(0.9) == pytest.approx(0.5 * g * g)


def test_exact_walk_mean():
    assert expected_bonding_attempts(1) == pytest.approx(2.0)
    assert expected_bonding_attempts(50) == pytest.approx(97.53, abs=0.01)
    # approaches 2 attempts per qubit from below
    assert expected_bonding_attempts(400) / 400 == pytest.approx(2.0, rel=0.005)


def test_exact_walk_from_the_seed():
    # away from the floor the walk pays for its overshoot instead
    assert expected_bonding_attempts(50, start=SEED_SIZE) == pytest.approx(100.2918, abs=1e-3)
    assert expected_bonding_attempts(400, start=SEED_SIZE) == pytest.approx(800.2918, abs=1e-3)
    ledger = expected_costs(P)
    seeded = ledger.four_cluster_cost * (expected_bonding_attempts(50, start=SEED_SIZE) + 1)
    assert seeded == pytest.approx(ledger.per_qubit_cost * 50, rel=0.02)
    with pytest.raises(OutOfRange):
        expected_bonding_attempts(10, start=-1)


def test_walk_trajectory_shape(rng):
    attempts, path = grow_walk(rng, 20, keep_trajectory=True)
    assert len(path) == attempts + 1
    assert path[0] == 0 and path[-1] >= 20
    _, seeded = grow_walk(rng, 20, keep_trajectory=True, start=SEED_SIZE)
    assert seeded[0] == SEED_SIZE and seeded[-1] >= SEED_SIZE + 20
    assert max(seeded[:-1]) < SEED_SIZE + 20
    assert min(path) >= 0
    steps = np.diff(path)
    assert set(steps.tolist()) <= {2, -1, 0}


def test_growth_matches_exact_walk():
    stats = simulate_growth(50, P, trials=1000, seed=1)
    assert stats.trials == 1000
    walk = expected_bonding_attempts(50, start=SEED_SIZE)
    assert stats.mean_attempts == pytest.approx(walk, rel=0.03)
    # the seed 4-cluster is paid for as well
    assert stats.mean_pulses == pytest.approx(expected_costs(P).four_cluster_cost * (walk + 1), rel=0.03)
    assert stats.attempts_per_qubit == pytest.approx(2.0, rel=0.03)
    assert stats.row()["N"] == 50
    assert stats.records == []


def test_growth_is_reproducible():
    a = simulate_growth(20, P, trials=50, seed=4, keep_records=True)
    b = simulate_growth(20, P, trials=50, seed=4, keep_records=True)
    assert a.mean_pulses == b.mean_pulses
    assert [r.pulses for r in a.records] == [r.pulses for r in b.records]


@pytest.mark.slow
def test_growth_independent_of_process_count():
    a = simulate_growth(20, P, trials=64, seed=4)
    b = simulate_growth(20, P, trials=64, seed=4, processes=2)
    assert a.mean_pulses == b.mean_pulses
    assert a.mean_attempts == b.mean_attempts


def test_lossless_eta_reproduces_plain_growth():
    a = simulate_growth(20, P, trials=50, seed=2)
    b = simulate_growth_lossy(20, P, 1.0, trials=50, seed=2)
    assert a.mean_pulses == b.mean_pulses


def test_lossy_growth_slows_down():
    a = simulate_growth(30, P, trials=400, seed=2)
    b = simulate_growth_lossy(30, P, 0.95, trials=400, seed=2)
    assert b.eta == 0.95
    assert b.mean_attempts > a.mean_attempts


def test_lossy_growth_below_drift_threshold():
    with pytest.raises(OutOfRange):
        simulate_growth_lossy(20, P, 0.8, trials=10, seed=1)


def test_growth_argument_checks():
    with pytest.raises(OutOfRange):
        simulate_growth(0, P, trials=10, seed=1)
    with pytest.raises(OutOfRange):
        simulate_growth(10, P, trials=0, seed=1)


def test_component_means():
    stats = simulate_components(P, trials=4000, seed=3)
    ledger = expected_costs(P)
    assert stats.mean_eme_pulses == pytest.approx(ledger.eme_cost, rel=0.05)
    assert stats.mean_three_cluster_pulses == pytest.approx(ledger.three_cluster_cost, rel=0.05)
    assert stats.mean_four_cluster_pulses == pytest.approx(ledger.four_cluster_cost, rel=0.05)


def test_derived_rate_components():
    stats = simulate_components(P, trials=4000, seed=3, rate="derived", cutoff=3)
    q = eme_round_success_probability(P, 1.0, 3)
    assert stats.mean_eme_pulses == pytest.approx(2 * 2 / q, rel=0.05)


def test_unknown_rate_model():
    with pytest.raises(OutOfRange):
        simulate_components(P, trials=2, seed=3, rate="guess")
