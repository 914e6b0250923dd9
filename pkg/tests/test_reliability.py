import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excitable.detect import EventSet
from excitable.errors import ParameterError
from excitable.integrate import SolverSettings
from excitable.model import compute_equilibrium
from excitable.reliability import (
    JITTERABLE,
    EnsembleConfig,
    export_raster,
    match_events,
    perturb,
    read_raster,
    run_ensemble,
)
from excitable.synapse import periodic_train, random_dead_time_train


def test_identical_trials_match_exactly():
    clusters = match_events([[10.0, 20.0, 30.0], [10.0, 20.0, 30.0]], 5.0)
    assert [len(c.trials) for c in clusters] == [2, 2, 2]
    assert all(c.jitter == 0.0 for c in clusters)


def test_interleaved_pairs():
    clusters = match_events([[10.0, 50.0], [11.0, 49.0]], 5.0)
    assert sorted(sorted(c.times) for c in clusters) == [[10.0, 11.0], [49.0, 50.0]]
    assert all(c.jitter == pytest.approx(0.5) for c in clusters)


def test_separated_events_stay_single():
    clusters = match_events([[10.0], [30.0]], 5.0)
    assert len(clusters) == 2 and all(len(c.trials) == 1 for c in clusters)
    from excitable.reliability import score

    _, matched, jitter, _, _ = score([EventSet([10.0]), EventSet([30.0])], [0, 1], 5.0)
    assert matched == 0.0 and jitter.size == 0


def test_one_event_per_trial_per_cluster():
    clusters = match_events([[10.0, 10.5], [10.2]], 5.0)
    for c in clusters:
        assert len(set(c.trials)) == len(c.trials)
    assert sorted(len(c.trials) for c in clusters) == [1, 2]


def test_match_window_must_be_positive():
    with pytest.raises(ParameterError):
        match_events([[1.0]], 0.0)


def optimal_pairs(a, b, window):
    """Largest matching between two trials with partners within ``window`` (brute force)."""
    best = 0
    for k in range(min(len(a), len(b)), 0, -1):
        for sub_a in itertools.combinations(a, k):
            for sub_b in itertools.permutations(b, k):
                if all(abs(x - y) <= window for x, y in zip(sub_a, sub_b)):
                    return k
    return best


@settings(max_examples=80)
@given(st.lists(st.tuples(st.booleans(), st.booleans(), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0)),
                min_size=1, max_size=5))
def test_greedy_matches_optimal_on_separated_spikes(spec):
    window = 4.0
    a, b = [], []
    for k, (in_a, in_b, ja, jb) in enumerate(spec):
        center = 20.0 * k
        if in_a:
            a.append(center + ja)
        if in_b:
            b.append(center + jb)
    clusters = match_events([a, b], window)
    pairs = sum(1 for c in clusters if len(c.trials) == 2)
    assert pairs == optimal_pairs(a, b, window)


@settings(max_examples=60)
@given(st.lists(st.floats(0.0, 40.0), max_size=5), st.lists(st.floats(0.0, 40.0), max_size=5))
def test_greedy_clusters_are_valid(a, b):
    clusters = match_events([sorted(a), sorted(b)], 3.0)
    assert sum(len(c.times) for c in clusters) == len(a) + len(b)
    for c in clusters:
        assert len(set(c.trials)) == len(c.trials)
        if len(c.times) == 2:
            assert abs(c.times[0] - c.times[1]) <= 3.0
    assert sum(1 for c in clusters if len(c.trials) == 2) <= optimal_pairs(a, b, 3.0)


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.5))
def test_perturbation_bounds(hh, dense_syn, seed, jitter):
    m, s, factors = perturb(hh, dense_syn, np.random.default_rng(seed), jitter)
    for name, f in factors.items():
        assert 1 - jitter - 1e-12 <= f <= 1 + jitter + 1e-12
    assert m.current("Na").gbar == pytest.approx(120.0 * factors["g_na"])
    assert m.current("K").gbar == pytest.approx(36.0 * factors["g_k"])
    assert m.g_leak == pytest.approx(0.3 * factors["g_leak"])
    assert s.g_s == pytest.approx(0.425 * factors["g_s"])
    assert 0 < s.alpha <= 1.0
    compute_equilibrium(m, s)  # leak recalibrated: rest stays at 0 mV


def test_perturb_subset_leaves_others(hh, dense_syn):
    m, s, f = perturb(hh, dense_syn, np.random.default_rng(0), 0.2, ("g_na",))
    assert f["g_k"] == 1.0 and m.current("K").gbar == 36.0
    assert s == dense_syn


def test_ensemble_config_validation():
    tr = periodic_train(1.0, horizon=10.0)
    with pytest.raises(ParameterError):
        EnsembleConfig(tr, n_trials=1)
    with pytest.raises(ParameterError):
        EnsembleConfig(tr, param_jitter=0.6)
    with pytest.raises(ParameterError):
        EnsembleConfig(tr, ic_sampling="gaussian")
    with pytest.raises(ParameterError):
        EnsembleConfig(tr, jitter_params=("e_na",))
    assert EnsembleConfig(tr).jitter_params == JITTERABLE


def test_no_jitter_identical_start_is_bit_identical(hh, sparse_syn):
    cfg = EnsembleConfig(periodic_train(15.0, horizon=120.0), t_end=120.0, n_trials=3, ic_sampling="rest",
                         param_jitter=0.0)
    rep = run_ensemble(hh, sparse_syn, cfg, keep_trajectories=True)
    assert rep.matched_fraction == 1.0
    assert rep.max_jitter == 0.0
    for tr in rep.trajectories[1:]:
        assert np.array_equal(tr.states, rep.trajectories[0].states)


def test_seeded_reproducibility_and_thread_invariance(hh, dense_syn):
    train = random_dead_time_train(0.02, 20.0, 150.0, seed=3)
    cfg = EnsembleConfig(train, t_end=150.0, n_trials=4, seed=11)
    a = run_ensemble(hh, dense_syn, cfg)
    b = run_ensemble(hh, dense_syn, cfg, threads=3)
    assert a.summary() == b.summary()
    for x, y in zip(a.event_sets, b.event_sets):
        assert np.array_equal(x.times, y.times)
    c = run_ensemble(hh, dense_syn, EnsembleConfig(train, t_end=150.0, n_trials=4, seed=12))
    assert a.factors != c.factors


def test_ball_sampling_near_rest(hh, dense_syn):
    cfg = EnsembleConfig(periodic_train(50.0, horizon=60.0), t_end=60.0, n_trials=2, ic_sampling="ball",
                         ic_radius=0.01, param_jitter=0.0)
    rep = run_ensemble(hh, dense_syn, cfg, keep_trajectories=True)
    for tr in rep.trajectories:
        assert abs(tr.states[0, -1]) <= 0.01 * 127 + 1e-12


def test_failed_trials_are_excluded_and_reported(hh, dense_syn):
    cfg = EnsembleConfig(periodic_train(1.0, horizon=20.0), t_end=20.0, n_trials=2)
    rep = run_ensemble(hh, dense_syn, cfg, SolverSettings(max_steps=3))
    assert sorted(rep.failed_trials) == [0, 1]
    assert "budget" in rep.failed_trials[0]
    assert rep.event_sets == [] and rep.summary()["n_trials"] == 0


def test_raster_formats(tmp_path):
    export_raster([], tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text() == "trial_id,event_time\n"
    sets = [EventSet([1.5, 2.25, 3.0]), EventSet([0.1 + 0.2, 7.0, 9.125])]
    export_raster(sets, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 7
    back = read_raster(tmp_path / "r.csv")
    for i, es in enumerate(sets):
        assert np.array_equal(back[i], es.times)
