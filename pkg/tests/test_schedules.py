import json

import numpy as np
import pytest

from opamp._validation import rng_from_key
from opamp.schedules import (ScheduleState, full_matrix, limiting_measure,
                             random_update, replay, round_robin,
                             schedule_from_config)


def dense_trace(masks, t, s):
    """Oracle: tr(P_{t-1}^c ... P_{s+1}^c P_s) by explicit matrix products."""
    product = np.diag(masks[s].astype(float))
    for r in range(s + 1, t):
        product = np.diag(1.0 - masks[r].astype(float)) @ product
    return int(round(np.trace(product)))


def test_full_matrix_masks_and_measure():
    sched = full_matrix(5)
    assert sched.mask(7).tolist() == [1] * 5
    p = sched.limiting_measure(9)
    assert p[8] == 1.0 and p.sum() == 1.0
    state, _ = replay(sched, 4)
    assert np.array_equal(state.last_update, np.full(5, 3))


def test_random_masks_first_step_full_and_deterministic():
    sched = random_update(30, 0.3, seed=4)
    assert sched.mask(0).all()
    np.testing.assert_array_equal(sched.mask(3), sched.mask(3))
    assert not np.array_equal(sched.mask(3), random_update(30, 0.3, seed=5).mask(3))


def test_random_gamma_one_is_full_matrix():
    sched = random_update(12, 1.0, seed=0)
    for t in range(5):
        assert sched.mask(t).all()


def test_random_gamma_validation():
    with pytest.raises(ValueError):
        random_update(5, 0.0)
    with pytest.raises(ValueError):
        random_update(5, 1.2)


def test_random_mask_density():
    sched = random_update(100_000, 0.1, seed=8)
    density = sched.mask(1).mean()
    assert 0.097 <= density <= 0.103


def test_random_measure_closed_form():
    p = limiting_measure("random", 3, gamma=0.1)
    np.testing.assert_allclose(p, [0.81, 0.09, 0.1])
    for t in (1, 2, 7, 30):
        p = limiting_measure("random", t, gamma=0.35)
        assert abs(p.sum() - 1.0) < 1e-12 and (p >= 0).all()


def test_round_robin_masks():
    sched = round_robin(10, 10)
    assert sched.mask(0).all()
    assert sched.mask(3).sum() == 1
    with pytest.raises(ValueError):
        round_robin(10, 3)
    # single block degenerates to full updates
    single = round_robin(6, 1)
    for t in range(4):
        assert single.mask(t).all()


def test_round_robin_staleness_bound():
    # no coordinate waits more than n_blocks steps between refreshes
    sched = round_robin(20, 4)
    state, _ = replay(sched, 12)
    for t in range(5, 13):
        partial_state, _ = replay(sched, t)
        assert (t - partial_state.last_update <= 4).all()


def test_round_robin_measure_closed_form_and_empirical_match():
    sched = round_robin(100, 10)
    p5 = sched.limiting_measure(5)
    np.testing.assert_allclose(p5, [0.6, 0.1, 0.1, 0.1, 0.1])
    # the realized class fractions equal the measure exactly when J | n
    for t in (1, 4, 10, 17):
        state, _ = replay(sched, t)
        np.testing.assert_allclose(state.class_fractions(), sched.limiting_measure(t))


def test_limiting_measures_normalized():
    for t in (1, 2, 5, 12, 40):
        for p in (limiting_measure("full", t),
                  limiting_measure("random", t, gamma=0.2),
                  limiting_measure("round_robin", t, n_blocks=8)):
            assert abs(p.sum() - 1.0) < 1e-12
            assert (p >= 0).all()
    with pytest.raises(ValueError):
        limiting_measure("bogus", 3)


def test_random_empirical_measure_converges():
    n = 100_000
    sched = random_update(n, 0.1, seed=17)
    state = ScheduleState(n)
    for t in range(20):
        state.advance(sched.mask(t))
        fractions = state.class_fractions()
        gap = np.abs(fractions - sched.limiting_measure(t + 1)).max()
        assert gap <= 0.01


def test_advance_hand_simulation():
    state = ScheduleState(3)
    state.advance(np.array([1, 1, 1]))
    state.advance(np.array([1, 0, 0]))
    assert state.t == 2
    assert state.trace_weight(0) == 2
    assert state.trace_weight(1) == 1
    assert state.last_update.tolist() == [1, 0, 0]


def test_advance_zero_mask_keeps_classes():
    state = ScheduleState(4)
    state.advance(np.ones(4, dtype=int))
    before = state.last_update.copy()
    state.advance(np.zeros(4, dtype=int))
    assert state.t == 2
    np.testing.assert_array_equal(state.last_update, before)
    assert state.trace_weight(1) == 0


def test_advance_validation():
    state = ScheduleState(3)
    with pytest.raises(ValueError):
        state.advance(np.array([1, 0, 1]))  # first step must be full
    state.advance(np.ones(3, dtype=int))
    with pytest.raises(ValueError):
        state.advance(np.ones(4, dtype=int))
    with pytest.raises(ValueError):
        state.advance(np.array([0, 2, 0]))
    with pytest.raises(ValueError):
        state.advance(np.ones(3, dtype=int), t=5)


def test_trace_weight_range_errors():
    state = ScheduleState(2)
    state.advance(np.ones(2, dtype=int))
    with pytest.raises(IndexError):
        state.trace_weight(1)
    with pytest.raises(IndexError):
        state.trace_weight(-1)


def test_trace_weights_match_dense_oracle_exactly():
    rng = rng_from_key(314)
    for _ in range(50):
        n = int(rng.integers(2, 17))
        horizon = int(rng.integers(2, 9))
        masks = [np.ones(n, dtype=np.uint8)]
        masks += [(rng.random(n) < rng.uniform(0.2, 0.8)).astype(np.uint8)
                  for _ in range(horizon - 1)]
        state = ScheduleState(n)
        for t, mask in enumerate(masks):
            state.advance(mask)
            assert state.counts.sum() == n
            for s in range(t + 1):
                assert state.trace_weight(s) == dense_trace(masks, t + 1, s)


def test_mask_recoverable_from_last_update():
    # delta_{t,i} == 1 exactly when the class of i right after step t is t
    sched = random_update(40, 0.4, seed=6)
    state = ScheduleState(40)
    for t in range(8):
        delta = sched.mask(t)
        state.advance(delta)
        np.testing.assert_array_equal(delta.astype(bool), state.last_update == t)


def test_schedule_json_round_trip():
    for sched in (full_matrix(7), random_update(7, 0.25, seed=3), round_robin(8, 4)):
        clone = schedule_from_config(json.loads(sched.to_json()))
        assert type(clone) is type(sched)
        for t in range(5):
            np.testing.assert_array_equal(clone.mask(t), sched.mask(t))
    with pytest.raises(ValueError):
        schedule_from_config({"protocol": "nope", "n": 3})
