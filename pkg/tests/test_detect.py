import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excitable.detect import DetectorConfig, EventSet, default_detector, detect, event_map
from excitable.errors import ParameterError
from excitable.integrate import SolverSettings, integrate
from excitable.synapse import explicit_train
from oracles import scan_oracle


def test_triangle_pulse_single_event_at_apex():
    t = np.round(np.arange(0, 3.0001, 0.01), 10)
    v = np.where(t <= 1.0, 100 * t, np.maximum(0.0, 100 * (2 - t)))
    ev = detect(t, v, DetectorConfig(20.0, 50.0, 0.2))
    assert len(ev) == 1
    assert ev.times[0] == pytest.approx(1.0)
    assert scan_oracle(t, v, 20.0, 50.0, 0.2) == [pytest.approx(1.0)]


def test_short_excursion_rejected_by_dwell():
    t = np.arange(0, 2.0, 0.01)
    v = np.where((t > 0.5) & (t < 0.6), 80.0, 0.0)
    assert len(detect(t, v, DetectorConfig(20.0, 50.0, 0.2))) == 0
    assert len(detect(t, v, DetectorConfig(20.0, 50.0, 0.05))) == 1


def test_ringing_without_reset_counts_once():
    t = np.arange(0, 10.0, 0.01)
    v = 40 + 30 * np.sin(2 * np.pi * t)  # oscillates 10..70 mV, dipping below v_low each cycle
    assert len(detect(t, v, DetectorConfig(20.0, 50.0, 0.1))) == 10
    v2 = 55 + 10 * np.sin(2 * np.pi * t)  # never falls to v_low after the first window
    assert len(detect(t, v2, DetectorConfig(20.0, 60.0, 0.1))) == 1


def test_open_window_at_end_is_dropped():
    t = np.arange(0, 2.0, 0.01)
    v = np.where(t > 1.0, 80.0, 0.0)
    assert len(detect(t, v)) == 0


signals = st.lists(st.tuples(st.floats(0.0, 20.0), st.floats(30.0, 110.0), st.floats(0.05, 1.5)),
                   min_size=0, max_size=8)


@settings(max_examples=100)
@given(signals, st.integers(0, 10_000), st.floats(0.0, 15.0))
def test_detector_matches_scan_oracle(bumps, seed, noise):
    t = np.arange(0.0, 20.0, 0.02)
    v = np.zeros_like(t)
    for center, height, width in bumps:
        v += height * np.exp(-0.5 * ((t - center) / width) ** 2)
    v += np.random.default_rng(seed).normal(0.0, noise, t.size)
    cfg = DetectorConfig(20.0, 50.0, 0.1)
    got = detect(t, v, cfg)
    assert list(got.times) == scan_oracle(t, v, cfg.v_low, cfg.v_high, cfg.tau_e)
    assert list(detect(t, v, cfg, backend="python").times) == list(got.times)


def test_single_impulse_gives_one_event_after_it(hh, sparse_syn, rest):
    traj = integrate(hh, sparse_syn, rest, explicit_train([15.0]), 40.0, SolverSettings(rel_tol=1e-10, abs_tol=1e-12))
    ev = detect(traj.times, traj.v)
    assert len(ev) == 1
    assert 15.0 < ev.times[0] < 25.0
    assert ev.times[0] == traj.times[int(np.argmax(traj.v))]


def test_grid_refinement_shift_bounded(hh, sparse_syn, rest):
    train = explicit_train([15.0, 45.0, 75.0])
    coarse = event_map(hh, sparse_syn, rest, train, 100.0, SolverSettings(output_dt=0.01))
    fine = event_map(hh, sparse_syn, rest, train, 100.0, SolverSettings(output_dt=0.005))
    assert len(coarse) == len(fine) == 3
    assert np.max(np.abs(coarse.times - fine.times)) <= 0.01


def test_event_csv(tmp_path):
    t = np.arange(0, 3.0, 0.01)
    v = 80 * np.exp(-0.5 * ((t - 1.0) / 0.4) ** 2)
    ev = detect(t, v)
    ev.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "event_time,window_start,window_end"
    assert len(lines) == 2
    assert EventSet().after(5.0).times.size == 0


def test_config_validation_and_default_threshold():
    with pytest.raises(ParameterError):
        DetectorConfig(60.0, 50.0)
    with pytest.raises(ParameterError):
        DetectorConfig(0.0, 50.0)
    with pytest.raises(ParameterError):
        DetectorConfig(20.0, 50.0, 0.0)
    assert default_detector(-12.0, 115.0).v_high == 51.5


def test_non_uniform_input_rejected():
    with pytest.raises(ParameterError):
        detect([0.0, 0.1, 0.3], [0.0, 0.0, 0.0])
    with pytest.raises(ParameterError):
        detect([0.0, 0.1], [0.0])
