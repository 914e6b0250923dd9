"""Numerical contraction analysis.

Linearization and a Lyapunov certificate at the rest state, empirical
incremental-stability constants ``(k, lam)`` from trajectory ensembles, the
dwell-time criteria for impulse trains, and forced divergence studies.

The dwell-time criteria are sufficient conditions only: a failed criterion
never certifies loss of contraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, ParameterError
from .integrate import SolverSettings, divergence, integrate_many
from .model import NeuronModel, compact_set, vector_field
from .synapse import ImpulseTrain, SynapseParams, min_tau_a

__all__ = [
    "Linearization",
    "ContractionEstimate",
    "DwellCriterion",
    "DivergenceReport",
    "jacobian",
    "jacobian_fd",
    "linearize",
    "certify_rest_state",
    "lyapunov_certificate",
    "fit_contraction",
    "estimate_contraction",
    "dwell_criterion",
    "forced_divergence_study",
]


@dataclass
class Linearization:
    jacobian: np.ndarray
    spectral_abscissa: float
    fd_error: float
    P: np.ndarray | None = None
    Q: np.ndarray | None = None
    residual: float | None = None


def jacobian(model: NeuronModel, synapse: SynapseParams, z) -> np.ndarray:
    """Analytic Jacobian of the unforced field."""
    z = np.asarray(z, dtype=float)
    m = model.m
    s, x, v = z[0], z[1:-1], z[-1]
    J = np.zeros((m + 2, m + 2))
    J[0, 0] = -1.0 / synapse.tau_s
    for j, g in enumerate(model.gates):
        a, b = g.alpha(v), g.beta(v)
        J[1 + j, 1 + j] = -(a + b)
        J[1 + j, -1] = g.alpha.derivative(v) * (1.0 - x[j]) - g.beta.derivative(v) * x[j]
    C = model.capacitance
    J[-1, 0] = -synapse.g_s * (v - synapse.e_s) / C
    G = model.g_leak + synapse.g_s * s
    for c in model.currents:
        G += c.gbar * c.activation(x)
        J[-1, 1:-1] -= c.gbar * c.activation_grad(x) * (v - c.reversal) / C
    J[-1, -1] = -G / C
    return J


def jacobian_fd(model: NeuronModel, synapse: SynapseParams, z, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian with per-component step ``step * max(1, |z_i|)``."""
    z = np.asarray(z, dtype=float)
    J = np.empty((z.size, z.size))
    for i in range(z.size):
        h = step * max(1.0, abs(z[i]))
        e = np.zeros_like(z)
        e[i] = h
        J[:, i] = (vector_field(model, synapse, z + e) - vector_field(model, synapse, z - e)) / (2 * h)
    return J


def _relative_error(A: np.ndarray, B: np.ndarray) -> float:
    scale = np.maximum(np.abs(A), np.abs(B))
    err = np.abs(A - B)
    mask = scale > 1e-8
    rel = np.zeros_like(err)
    rel[mask] = err[mask] / scale[mask]
    # entries that are zero analytically must be near zero numerically
    rel[~mask] = err[~mask] / 1e-8
    return float(rel.max())


def linearize(model: NeuronModel, synapse: SynapseParams, z) -> Linearization:
    J = jacobian(model, synapse, z)
    fd = jacobian_fd(model, synapse, z)
    return Linearization(J, float(np.max(np.linalg.eigvals(J).real)), _relative_error(J, fd))


def lyapunov_certificate(A, Q=None) -> np.ndarray:
    """Solve ``A'P + PA = -Q`` through the Kronecker-vectorized linear system."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    abscissa = float(np.max(np.linalg.eigvals(A).real))
    if not abscissa < 0:
        raise ParameterError(f"matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")
    I = np.eye(n)
    # row-major vec: vec(A'P) = (A' kron I) vec(P), vec(PA) = (I kron A') vec(P)
    K = np.kron(A.T, I) + np.kron(I, A.T)
    P = np.linalg.solve(K, -Q.reshape(-1)).reshape(n, n)
    return 0.5 * (P + P.T)


def certify_rest_state(model: NeuronModel, synapse: SynapseParams, z, Q=None) -> Linearization:
    """Linearization at ``z`` with its Lyapunov certificate and relative residual."""
    lin = linearize(model, synapse, z)
    Q = np.eye(model.dim) if Q is None else np.asarray(Q, dtype=float)
    P = lyapunov_certificate(lin.jacobian, Q)
    A = lin.jacobian
    lin.P, lin.Q = P, Q
    lin.residual = float(np.linalg.norm(A.T @ P + P @ A + Q) / max(1.0, np.linalg.norm(Q)))
    return lin


@dataclass
class ContractionEstimate:
    """Empirical ``||d(t)|| <= k exp(-lam t) ||d(0)||`` over sampled pairs.

    ``k`` is exact for the stored samples; ``residual`` is the RMS of the
    log-linear fit used for ``lam``.
    """

    k: float
    lam: float
    fit_window: tuple[float, float]
    sample_pairs: int
    residual: float
    times: np.ndarray = field(repr=False, default=None)
    curves: np.ndarray = field(repr=False, default=None)

    def bound(self, t) -> np.ndarray:
        return self.k * np.exp(-self.lam * np.asarray(t, dtype=float))

    @property
    def threshold_rate(self) -> float:
        return math.inf if self.k <= 1.0 else self.lam / math.log(self.k)


def fit_contraction(times, curves, fit_window: tuple[float, float] | None = None,
                    decay_target: float = 0.5) -> ContractionEstimate:
    """Fit ``(k, lam)`` to divergence curves ``curves[pair, t]``.

    ``lam`` is minus the least-squares slope of ``log(max_pairs d/d0)`` on the
    fit window (default: last three quarters of the horizon); ``k`` is then the
    smallest constant with ``k exp(-lam t)`` above every sample.
    """
    t = np.asarray(times, dtype=float)
    d = np.atleast_2d(np.asarray(curves, dtype=float))
    d0 = d[:, :1]
    if np.any(d0 <= 0):
        raise EstimationError("pairs must start at distinct states")
    ratio = d / d0
    if np.any(ratio.min(axis=1) > decay_target):
        bad = int(np.argmax(ratio.min(axis=1) > decay_target))
        raise EstimationError(f"pair {bad} never decays below {decay_target} of its initial distance")
    t_end = t[-1]
    lo, hi = fit_window or (t_end / 4.0, t_end)
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 2:
        raise EstimationError("fit window holds fewer than two samples")
    tiny = np.finfo(float).tiny
    y = np.log(np.maximum(ratio.max(axis=0)[sel], tiny))
    slope, intercept = np.polyfit(t[sel], y, 1)
    lam = -float(slope)
    if not lam > 0:
        raise EstimationError(f"fitted decay rate {lam:.3e} is not positive")
    resid = float(np.sqrt(np.mean((y - (slope * t[sel] + intercept)) ** 2)))
    log_ratio = np.log(np.maximum(ratio, tiny))
    k = float(np.exp(max(0.0, np.max(log_ratio + lam * t[None, :]))))
    # exp/log round-off: nudge until the bound majorizes every sample
    while np.any(ratio > k * np.exp(-lam * t)[None, :]):
        k *= 1.0 + 1e-12
    return ContractionEstimate(k, lam, (float(lo), float(hi)), d.shape[0], resid, t, d)


def _pairs(rng, box, n_pairs):
    return [(box.sample(rng), box.sample(rng)) for _ in range(n_pairs)]


def estimate_contraction(model: NeuronModel, synapse: SynapseParams, n_pairs: int = 20, t_end: float = 500.0,
                         seed: int = 0, settings: SolverSettings | None = None,
                         fit_window: tuple[float, float] | None = None, weight=None,
                         threads: int = 1) -> ContractionEstimate:
    """``(k, lam)`` for the unforced flow from ``n_pairs`` random pairs in the invariant box."""
    if n_pairs < 10:
        raise ParameterError("need at least 10 pairs")
    rng = np.random.default_rng(seed)
    box = compact_set(model, synapse)
    starts = np.array([z for pair in _pairs(rng, box, n_pairs) for z in pair])
    trajs = integrate_many(model, synapse, starts, ImpulseTrain(), t_end, settings, threads)
    curves = np.array([divergence(trajs[2 * p].states, trajs[2 * p + 1].states, weight)
                       for p in range(n_pairs)])
    return fit_contraction(trajs[0].times, curves, fit_window)


@dataclass(frozen=True)
class DwellCriterion:
    threshold_rate: float
    min_period: float
    input_rate: float
    tau_a: float | None
    satisfied: bool


def dwell_criterion(est: ContractionEstimate, period: float | None = None,
                    train: ImpulseTrain | None = None, n0: int = 1) -> DwellCriterion:
    """Average dwell-time test ``lam > ln(k) / tau_a``.

    A periodic train uses ``tau_a = period``; a general train uses the
    largest dwell time it admits with chatter bound ``n0``.
    """
    if (period is None) == (train is None):
        raise ParameterError("give exactly one of period or train")
    log_k = math.log(est.k) if est.k > 1.0 else 0.0
    threshold = math.inf if log_k == 0.0 else est.lam / log_k
    min_period = log_k / est.lam
    if period is not None:
        if not period > 0:
            raise ParameterError("period must be positive")
        tau_a = float(period)
    else:
        tau_a = min_tau_a(train, n0)
    if tau_a is None:
        return DwellCriterion(threshold, min_period, 0.0, None, True)
    rate = 1.0 / tau_a
    return DwellCriterion(threshold, min_period, rate, tau_a, est.lam > log_k / tau_a)


@dataclass
class DivergenceReport:
    times: np.ndarray
    curves: np.ndarray
    verdict: str
    final_ratio: np.ndarray
    trailing_mean: np.ndarray
    trajectories: list = field(default_factory=list, repr=False)

    def to_csv(self, path) -> None:
        n_pairs, n_t = self.curves.shape
        data = np.column_stack([np.tile(self.times, n_pairs), np.repeat(np.arange(n_pairs), n_t),
                                self.curves.ravel()])
        np.savetxt(path, data, delimiter=",", header="t,pair_id,d", comments="", fmt=["%.12g", "%d", "%.12g"])


def classify_divergence(times, curves, contract_ratio: float = 0.01, trailing_window: float = 50.0,
                        amplitude: float = 100.0):
    """Verdict for pair divergence curves: "contracting", "non-contracting" or "inconclusive"."""
    t = np.asarray(times, dtype=float)
    d = np.atleast_2d(curves)
    d0, d_end = d[:, 0], d[:, -1]
    final_ratio = np.where(d0 > 0, d_end / np.where(d0 > 0, d0, 1.0), 0.0)
    trailing = d[:, t >= t[-1] - trailing_window].mean(axis=1)
    if np.all(d_end <= contract_ratio * d0):
        verdict = "contracting"
    elif np.any(trailing > 0.1 * amplitude):
        verdict = "non-contracting"
    else:
        verdict = "inconclusive"
    return verdict, final_ratio, trailing


def forced_divergence_study(model: NeuronModel, synapse: SynapseParams, train: ImpulseTrain, n_pairs: int = 5,
                            t_end: float = 500.0, seed: int = 0, settings: SolverSettings | None = None,
                            initial_states=None, trailing_window: float = 50.0, amplitude: float = 100.0,
                            weight=None, threads: int = 1) -> DivergenceReport:
    """Pair divergence under a shared train.

    With ``initial_states`` (one row each) every state is paired with the
    first; otherwise ``n_pairs`` random pairs are drawn from the invariant box.
    """
    if initial_states is not None:
        starts = np.atleast_2d(np.asarray(initial_states, dtype=float))
        trajs = integrate_many(model, synapse, starts, train, t_end, settings, threads)
        pairs = [(0, i) for i in range(1, len(trajs))]
    else:
        rng = np.random.default_rng(seed)
        box = compact_set(model, synapse)
        starts = np.array([z for pair in _pairs(rng, box, n_pairs) for z in pair])
        trajs = integrate_many(model, synapse, starts, train, t_end, settings, threads)
        pairs = [(2 * p, 2 * p + 1) for p in range(n_pairs)]
    curves = np.array([divergence(trajs[a].states, trajs[b].states, weight) for a, b in pairs])
    times = trajs[0].times
    verdict, final_ratio, trailing = classify_divergence(times, curves, 0.01, trailing_window, amplitude)
    return DivergenceReport(times, curves, verdict, final_ratio, trailing, trajs)
