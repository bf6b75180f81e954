import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shufflegame import ConfigError, GameConfig, RandomSource, Weights, reference_config
from shufflegame.assignment import shuffle_cost, validate_assignment
from shufflegame.baselines import PolicyKind
from shufflegame.harness import (
    EtaMode,
    ExperimentSpec,
    ddos_scenario,
    estimate_transition_distribution,
    run_experiment,
    run_trial,
    steady_state,
)
from shufflegame.rng import derive_seed
from shufflegame.strategies import cumulative_payoffs


def small_spec(**kw):
    cfg = kw.pop("config", GameConfig(n=6, m=4, q=24, r=3, u=3, horizon=8))
    kw.setdefault("trials", 5)
    kw.setdefault("eta", EtaMode("uniform", lo=0, hi=4))
    kw.setdefault("eval_step", min(8, cfg.horizon))
    return ExperimentSpec(cfg, **kw)


def test_inert_world_stays_healthy():
    cfg = GameConfig(n=6, m=4, q=24, r=3, u=3, direct_success=0.0, pivot_success=0.0)
    h = run_trial(small_spec(config=cfg, policy=PolicyKind.NONE), 3)
    assert h.records[-1].state_after.sum() == 0
    assert all(r.defender_reward == 0 and r.attacker_reward == 0 for r in h.records)


def test_single_forced_crash():
    cfg = GameConfig(n=1, m=1, q=1, r=1, u=1, horizon=1, direct_success=1.0)
    h = run_trial(small_spec(config=cfg, policy=PolicyKind.NONE, eta=EtaMode("fixed", value=1)), 0)
    assert len(h) == 1
    assert h.records[0].attack == {0}
    assert h.records[0].attacker_reward == 1.0


def test_reference_trial_is_fast():
    spec = ExperimentSpec(reference_config(), trials=1, eta=EtaMode("uniform", lo=0, hi=20))
    start = time.perf_counter()
    run_trial(spec, 1)
    assert time.perf_counter() - start < 1.0


def test_recorded_cost_matches_pricing():
    spec = small_spec(policy=PolicyKind.CES)
    h = run_trial(spec, 17, keep_assignments=True)
    for rec, before, after in zip(h.records, h.assignments, h.assignments[1:]):
        assert validate_assignment(after, spec.config) == []
        assert rec.defender_cost == pytest.approx(shuffle_cost(before, after, before.changed_rows(after),
                                                               spec.config.weights))


def test_single_trial_has_zero_spread():
    series = run_experiment(small_spec(trials=1))
    assert all(np.all(s == 0) for s in series.std.values())


def test_experiment_repeatable():
    a = run_experiment(small_spec(policy=PolicyKind.RANDOM, trials=4))
    b = run_experiment(small_spec(policy=PolicyKind.RANDOM, trials=4))
    for k in a.samples:
        assert np.array_equal(a.samples[k], b.samples[k])


def test_payoff_series_matches_ledger():
    spec = small_spec(trials=1, seed=5)
    series = run_experiment(spec)
    led = cumulative_payoffs(run_trial(spec, derive_seed(5, 0)), spec.config.gamma)
    assert series.mean["defender_payoff"][-1] == pytest.approx(led.defender_payoff)
    assert series.mean["attacker_payoff"][-1] == pytest.approx(led.attacker_payoff)


def test_sweep_indexes_by_eta():
    spec = small_spec(eta=EtaMode("sweep", lo=0, hi=4), trials=2, eval_step=5)
    series = run_experiment(spec)
    assert series.index.tolist() == [0, 1, 2, 3, 4]
    assert series.samples["cost"].shape == (2, 5)


def test_parallel_workers_agree():
    spec = small_spec(trials=6)
    a = run_experiment(spec)
    b = run_experiment(ExperimentSpec(**{**spec.__dict__, "workers": 2}))
    assert np.array_equal(a.samples["defender_payoff"], b.samples["defender_payoff"])


def test_spec_validation():
    with pytest.raises(ConfigError) as exc:
        small_spec(eta=EtaMode("sweep", lo=5, hi=2)).validate()
    assert exc.value.field == "eta_lo"
    with pytest.raises(ConfigError):
        small_spec(trials=0).validate()
    with pytest.raises(ConfigError):
        small_spec(attacker_mode="sniper").validate()


def test_eta_modes_shapes():
    cfg = GameConfig(n=5, m=10, q=50, r=1, u=1)
    rng = RandomSource(0)
    assert EtaMode("fixed", value=3).draw(cfg, 4, rng).tolist() == [[3] * 5] * 4
    trace = EtaMode("trace", series=(1, 2)).draw(cfg, 3, rng)
    assert trace[:, 0].tolist() == [1, 2, 2]
    b = EtaMode("fixed", value=5, spread="binomial").draw(cfg, 4000, rng)
    assert abs(b.mean() - 5) < 0.05 and b.max() <= 10


# ---- transition probe ----


def test_probe_point_mass_without_attacks():
    cfg = GameConfig(n=3, m=1, q=3, r=1, u=1, direct_success=0.0)
    est = estimate_transition_distribution(cfg, runs=500)
    assert est.patterns == {"000": 500}


def test_probe_certain_crash():
    cfg = GameConfig(n=1, m=1, q=1, r=1, u=1, direct_success=1.0)
    assert estimate_transition_distribution(cfg, runs=100).frequencies == {"1": 1.0}


def test_probe_default_runs_and_normalisation():
    cfg = GameConfig(n=4, m=1, q=4, r=1, u=1)
    est = estimate_transition_distribution(cfg)
    assert est.runs == 10000
    assert sum(est.frequencies.values()) == pytest.approx(1.0, abs=1e-9)
    assert sum(est.compromise_counts.values()) == pytest.approx(1.0, abs=1e-9)


# ---- sequential flood ----


def _ddos(**kw):
    cfg = GameConfig(n=6, m=4, q=24, r=3, u=3, horizon=12, **kw)
    return small_spec(config=cfg, attacker_mode="sequential-ddos", eta=EtaMode("fixed", value=2),
                      trials=20, eval_step=12)


def test_flood_without_defence_saturates():
    series = run_experiment(_ddos(direct_success=1.0).with_policy("none"))
    crashed = series.samples["crashed_vms"]
    # pivots off false flags can add extra crashes on top of the flood's one per step
    prev = np.zeros(len(crashed))
    for col in crashed.T:
        assert np.all((col >= prev + 1) | (col == 6))
        prev = col
    assert np.all(crashed[:, 5:] == 6)


def test_flood_harmless_when_attacks_fail():
    out = ddos_scenario(_ddos(direct_success=0.0))
    assert all(np.all(s.samples["crashed_vms"] == 0) for s in out.values())


def test_ces_beats_no_defence_under_flood():
    out = ddos_scenario(_ddos(confidence=1.0, weights=Weights(0.02, 0.01, 0.07)))
    assert steady_state(out["ces"]).mean() < steady_state(out["none"]).mean()


def test_ddos_needs_flood_mode():
    with pytest.raises(ConfigError):
        ddos_scenario(small_spec())


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(list(PolicyKind)), st.integers(0, 2**32))
def test_effectiveness_non_decreasing(kind, seed):
    series = run_experiment(small_spec(policy=kind, trials=2, seed=seed))
    assert np.all(np.diff(series.samples["effectiveness"], axis=1) >= 0)
