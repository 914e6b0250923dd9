import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from excitable.contraction import (
    ContractionEstimate,
    certify_rest_state,
    classify_divergence,
    dwell_criterion,
    estimate_contraction,
    fit_contraction,
    forced_divergence_study,
    jacobian,
    jacobian_fd,
    linearize,
    lyapunov_certificate,
)
from excitable.errors import EstimationError, ParameterError
from excitable.model import compact_set
from excitable.synapse import periodic_train


def test_jacobian_matches_finite_differences_on_box(hh, sparse_syn):
    pts = compact_set(hh, sparse_syn).sample(np.random.default_rng(5), 30)
    for z in pts:
        J, fd = jacobian(hh, sparse_syn, z), jacobian_fd(hh, sparse_syn, z)
        assert np.allclose(J, fd, rtol=1e-6, atol=1e-6 * np.abs(J).max())


def test_jacobian_near_removable_singularities(hh, sparse_syn):
    for v in (10.0, 25.0, 10.0 + 1e-6, 25.0 - 1e-5):
        z = np.array([0.4, 0.3, 0.5, 0.4, v])
        assert np.allclose(jacobian(hh, sparse_syn, z), jacobian_fd(hh, sparse_syn, z), rtol=1e-6, atol=1e-6)


def test_rest_state_linearization(hh, sparse_syn, rest):
    lin = linearize(hh, sparse_syn, rest)
    eig = np.linalg.eigvals(lin.jacobian)
    assert lin.spectral_abscissa == pytest.approx(np.max(eig.real))
    assert lin.spectral_abscissa < 0
    assert lin.fd_error < 1e-6
    # the synapse decouples at rest: its eigenvalue is -1/tau_s
    assert np.min(np.abs(eig - (-1.0 / sparse_syn.tau_s))) < 1e-12


def test_lyapunov_matches_scipy(hh, sparse_syn, rest):
    A = jacobian(hh, sparse_syn, rest)
    P = lyapunov_certificate(A)
    oracle = scipy.linalg.solve_continuous_lyapunov(A.T, -np.eye(A.shape[0]))
    assert np.allclose(P, oracle, rtol=1e-9, atol=1e-12)
    cert = certify_rest_state(hh, sparse_syn, rest)
    assert cert.residual <= 1e-8
    assert np.linalg.eigvalsh(cert.P).min() > 0


@given(st.integers(0, 10_000))
def test_lyapunov_random_hurwitz(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(4, 4))
    A = M - (np.max(np.linalg.eigvals(M).real) + 0.5) * np.eye(4)
    Q = np.diag(rng.uniform(0.5, 2.0, 4))
    P = lyapunov_certificate(A, Q)
    assert np.allclose(A.T @ P + P @ A, -Q, atol=1e-8 * max(1.0, np.abs(P).max()))
    assert np.linalg.eigvalsh(P).min() > 0


def test_lyapunov_rejects_unstable():
    with pytest.raises(ParameterError):
        lyapunov_certificate(np.array([[0.1, 0.0], [0.0, -1.0]]))


def _jordan_curves(n_pairs=10, t_end=30.0, seed=0):
    A = np.array([[-1.0, 10.0], [0.0, -1.0]])
    t = np.linspace(0.0, t_end, 3001)
    rng = np.random.default_rng(seed)
    curves = []
    for _ in range(n_pairs):
        diff = rng.normal(size=2)
        # closed form exp(At) = exp(-t) [[1, 10 t], [0, 1]]
        path = np.exp(-t)[:, None] * np.column_stack([diff[0] + 10 * t * diff[1], np.full_like(t, diff[1])])
        assert np.allclose(path[100], scipy.linalg.expm(A * t[100]) @ diff)
        curves.append(np.linalg.norm(path, axis=1))
    return t, np.array(curves)


def test_jordan_block_overshoot():
    t, curves = _jordan_curves()
    est = fit_contraction(t, curves)
    assert est.lam == pytest.approx(1.0, abs=0.1)
    assert est.k > 1.0
    ratio = curves / curves[:, :1]
    assert np.all(ratio <= est.bound(t)[None, :])
    # k is tight: a slightly smaller constant fails somewhere
    assert np.any(ratio > 0.999 * est.bound(t)[None, :])


def test_fit_contraction_pure_exponential():
    t = np.linspace(0, 10, 101)
    est = fit_contraction(t, [3.0 * np.exp(-0.7 * t)])
    assert est.lam == pytest.approx(0.7, rel=1e-10)
    assert est.k == pytest.approx(1.0, abs=1e-9)
    assert est.residual < 1e-10


def test_fit_contraction_errors():
    t = np.linspace(0, 10, 11)
    with pytest.raises(EstimationError):
        fit_contraction(t, [np.ones(11)])
    with pytest.raises(EstimationError):
        fit_contraction(t, [np.r_[0.0, np.ones(10)]])
    with pytest.raises(EstimationError):
        fit_contraction(t, [np.exp(-t)], fit_window=(3.0, 3.5))


def _estimate(k, lam):
    return ContractionEstimate(k, lam, (0.0, 1.0), 1, 0.0)


def test_dwell_criterion_hand_values():
    est = _estimate(math.e, 0.1)
    sparse = dwell_criterion(est, period=15.0)
    assert sparse.satisfied
    assert sparse.threshold_rate == pytest.approx(0.1)
    assert sparse.min_period == pytest.approx(10.0)
    assert sparse.input_rate == pytest.approx(1 / 15)
    assert not dwell_criterion(est, period=0.5).satisfied
    assert not dwell_criterion(est, period=10.0).satisfied  # strict inequality


def test_dwell_criterion_unit_overshoot_always_holds():
    crit = dwell_criterion(_estimate(1.0, 0.05), period=0.001)
    assert crit.satisfied and crit.threshold_rate == math.inf


def test_dwell_criterion_general_train():
    est = _estimate(math.e, 0.1)
    crit = dwell_criterion(est, train=periodic_train(12.0, horizon=200.0))
    assert crit.tau_a == pytest.approx(12.0)
    assert crit.satisfied
    single = dwell_criterion(est, train=periodic_train(12.0, count=1))
    assert single.satisfied and single.tau_a is None
    with pytest.raises(ParameterError):
        dwell_criterion(est)
    with pytest.raises(ParameterError):
        dwell_criterion(est, period=1.0, train=periodic_train(1.0, count=2))


def test_classify_divergence():
    t = np.linspace(0, 100, 1001)
    shrinking = np.vstack([np.exp(-0.1 * t), 2 * np.exp(-0.2 * t)])
    assert classify_divergence(t, shrinking)[0] == "contracting"
    persistent = np.vstack([np.exp(-0.1 * t), 30 + 10 * np.sin(t)])
    verdict, ratio, trailing = classify_divergence(t, persistent)
    assert verdict == "non-contracting"
    assert trailing[1] > 10
    mild = np.vstack([np.ones_like(t), np.ones_like(t)])
    assert classify_divergence(t, mild)[0] == "inconclusive"


def test_estimate_contraction_needs_enough_pairs(hh, sparse_syn):
    with pytest.raises(ParameterError):
        estimate_contraction(hh, sparse_syn, n_pairs=5)


def test_forced_study_pairs_against_first(hh, sparse_syn):
    starts = compact_set(hh, sparse_syn).sample(np.random.default_rng(1), 3)
    rep = forced_divergence_study(hh, sparse_syn, periodic_train(15.0, horizon=60.0), t_end=60.0,
                                  initial_states=starts)
    assert rep.curves.shape == (2, rep.times.size)
    assert rep.curves[0, 0] == pytest.approx(np.linalg.norm(starts[0] - starts[1]))
