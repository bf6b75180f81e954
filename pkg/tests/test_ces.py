import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import replay_ces
from shufflegame import GameConfig, RandomSource, Weights
from shufflegame.assignment import random_initial_assignment, shuffle_cost, validate_assignment
from shufflegame.ces import ces_decide, cheapest_shuffle_costs, migration_allowed


def setup(n=4, m=20, r=2, u=3, seed=0, **kw):
    cfg = GameConfig(n=n, m=m, q=n * m, r=r, u=u, **kw)
    return cfg, random_initial_assignment(cfg, RandomSource(seed))


def test_idle_vm_is_parked_not_shuffled():
    cfg, a = setup()
    o = np.array([1, 0, 0, 0])
    dec = ces_decide(o, a, [0, 5, 5, 5], 0, cfg, RandomSource(1))
    assert dec.next == a
    assert 0 not in dec.shuffled
    assert dec.parked == {0} and dec.defend == {0}


def test_migration_threshold_is_half_capacity():
    assert migration_allowed(10, 20)
    assert not migration_allowed(11, 20)
    assert not migration_allowed(0, 20)


def test_busy_vm_keeps_its_users():
    cfg, a = setup(weights=Weights(0.2, 0.1, 0.0))
    o = np.array([1, 0, 0, 0])
    dec = ces_decide(o, a, [11, 1, 1, 1], 0, cfg, RandomSource(1))
    assert np.array_equal(dec.next.z, a.z)


def test_cheap_migration_is_taken_when_allowed():
    cfg, a = setup(r=1, u=1, weights=Weights(1.0, 1.0, 0.0))
    o = np.array([1, 0, 0, 0])
    dec = ces_decide(o, a, [10, 1, 2, 3], 0, cfg, RandomSource(1))
    assert dec.moves[0] == "migrate"
    # least loaded unflagged VM receives the online users
    assert set(a.users_of(0)[:10]) <= set(dec.next.users_of(1))
    assert dec.shuffled == {0, 1}


def test_unflagged_untouched_and_valid():
    cfg, a = setup(n=6, m=4, r=3, u=4)
    o = np.array([0, 1, 0, 1, 0, 0])
    dec = ces_decide(o, a, [2, 2, 2, 1, 0, 3], 3, cfg, RandomSource(9))
    assert validate_assignment(dec.next, cfg) == []
    for v in (0, 2, 4, 5):
        assert np.array_equal(dec.next.x[v], a.x[v]) and np.array_equal(dec.next.y[v], a.y[v])


def test_no_target_degrades_to_hop():
    cfg, a = setup(n=2, m=4, r=1, u=2)
    o = np.array([1, 1])
    dec = ces_decide(o, a, [2, 2], 0, cfg, RandomSource(0))
    assert dec.degraded == {0, 1}
    assert validate_assignment(dec.next, cfg) == []


def test_cheapest_costs():
    cfg, a = setup(n=4, m=4, r=1, u=2)
    costs = cheapest_shuffle_costs(a, [0, 1, 2, 3], cfg)
    assert costs[0] == 0.0
    assert costs[1] == pytest.approx(0.2)


def test_exhaustive_three_vm_instance():
    cfg, a = setup(n=3, m=4, r=2, u=2, seed=5, weights=Weights(0.2, 0.3, 0.01))
    o = np.array([1, 0, 1])
    eta = np.array([2, 1, 1])
    dec = ces_decide(o, a, eta, 0, cfg, RandomSource(2))
    assert "migrate" in dec.moves[0]
    assert replay_ces(o, a, eta, cfg, dec, validate_assignment, shuffle_cost) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(1, 6), st.data())
def test_ces_closure_cost_and_determinism(n, m, data):
    r = data.draw(st.integers(1, n))
    u = data.draw(st.integers(1, 3))
    seed = data.draw(st.integers(0, 2**32))
    cfg, a = setup(n=n, m=m, r=r, u=u, seed=seed)
    o = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    eta = np.array(data.draw(st.lists(st.integers(0, m), min_size=n, max_size=n)))
    dec = ces_decide(o, a, eta, 1, cfg, RandomSource(seed))
    again = ces_decide(o, a, eta, 1, cfg, RandomSource(seed))
    assert dec.next == again.next
    assert validate_assignment(dec.next, cfg) == []
    assert dec.shuffled == a.changed_rows(dec.next)
    cost = shuffle_cost(a, dec.next, dec.shuffled, cfg.weights)
    assert (cost == 0) == (not dec.shuffled)
    for v in np.flatnonzero(o == 0):
        assert np.array_equal(dec.next.x[v], a.x[v]) and np.array_equal(dec.next.y[v], a.y[v])
