"""First-order impulsive synapse, impulse trains and dwell-time bookkeeping.

Between impulses the synaptic activation decays, ``s' = -s / tau_s``; at an
impulse it jumps exactly, ``s+ = (1 - alpha) s- + alpha``. Impulses are never
smoothed into finite-width pulses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParameterError

__all__ = [
    "SynapseParams",
    "ImpulseTrain",
    "PeriodicAnalysis",
    "DwellTimeCertificate",
    "apply_impulse",
    "decay",
    "periodic_analysis",
    "periodic_train",
    "random_dead_time_train",
    "explicit_train",
    "generate_train",
    "check_average_dwell_time",
    "min_tau_a",
    "read_train",
    "write_train",
]


@dataclass(frozen=True)
class SynapseParams:
    """Synapse constants.

    ``g_s = 0`` is accepted and disconnects the synapse from the membrane,
    which is how the synapse-only and subthreshold harnesses are built.
    """

    alpha: float
    tau_s: float
    g_s: float
    e_s: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.tau_s > 0.0:
            raise ParameterError(f"tau_s must be positive, got {self.tau_s}")
        if not self.g_s >= 0.0:
            raise ParameterError(f"g_s must be non-negative, got {self.g_s}")
        if not math.isfinite(self.e_s):
            raise ParameterError(f"e_s must be finite, got {self.e_s}")


@dataclass(frozen=True)
class ImpulseTrain:
    """Strictly increasing, finite sequence of impulse instants (ms)."""

    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    period: float | None = None

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=float).ravel()
        if t.size and not np.all(np.isfinite(t)):
            raise ParameterError("impulse times must be finite")
        if t.size and t[0] < 0.0:
            raise ParameterError("impulse times must be non-negative")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ParameterError("impulse times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def __len__(self) -> int:
        return self.times.size

    def window(self, t0: float, t1: float) -> "ImpulseTrain":
        """Impulses in ``[t0, t1)``."""
        t = self.times
        return ImpulseTrain(t[(t >= t0) & (t < t1)], self.period)

    def count(self, t1: float, t2: float) -> int:
        """N(t2, t1): impulses in ``(t1, t2]``."""
        return int(np.searchsorted(self.times, t2, "right") - np.searchsorted(self.times, t1, "right"))


def apply_impulse(s, alpha: float):
    """Jump map at an impulse: ``(1 - alpha) s + alpha``."""
    return (1.0 - alpha) * s + alpha


def decay(s, dt, tau_s: float):
    """Exact inter-impulse flow ``s exp(-dt / tau_s)``."""
    return s * np.exp(-np.asarray(dt, dtype=float) / tau_s)


@dataclass(frozen=True)
class PeriodicAnalysis:
    """Closed-form description of the synapse under a T-periodic train.

    Impulse right-limits obey ``s_{l+1} = a_T s_l + alpha`` with fixed point
    ``s_star``; ``gamma_T`` is the attraction rate (``inf`` when alpha = 1)
    and ``bound = T / (alpha tau_s)`` dominates ``sup_t |s(t) - 1|`` on the
    periodic orbit.
    """

    period: float
    a_T: float
    s_star: float
    gamma_T: float
    bound: float
    sup_deviation: float

    def orbit(self, t, tau_s: float):
        """Periodic solution, right-continuous at impulses placed at multiples of T."""
        t = np.asarray(t, dtype=float)
        phase = t - np.floor(t / self.period) * self.period
        return self.s_star * np.exp(-phase / tau_s)


def periodic_analysis(params: SynapseParams, period: float) -> PeriodicAnalysis:
    if not period > 0.0:
        raise ParameterError(f"period must be positive, got {period}")
    alpha, tau = params.alpha, params.tau_s
    e = math.exp(-period / tau)
    a_T = (1.0 - alpha) * e
    s_star = alpha / (1.0 - a_T)
    gamma = -math.log(a_T) / period if a_T > 0.0 else math.inf
    # 1 - s* e^{-T/tau} = (1 - e^{-T/tau}) / (1 - a_T) is the larger deviation
    sup_dev = -math.expm1(-period / tau) / (1.0 - a_T)
    return PeriodicAnalysis(period, a_T, s_star, gamma, period / (alpha * tau), sup_dev)


# ---------------------------------------------------------------------------
# train generators


def periodic_train(period: float, horizon: float | None = None, t_start: float | None = None,
                   count: int | None = None) -> ImpulseTrain:
    """Impulses at ``t_start + l * period``; the first defaults to ``period``.

    Either ``count`` or ``horizon`` bounds the train; with a horizon only
    instants strictly below it are kept.
    """
    if not period > 0.0:
        raise ParameterError(f"period must be positive, got {period}")
    start = period if t_start is None else float(t_start)
    if count is None:
        if horizon is None:
            raise ParameterError("periodic train needs a count or a horizon")
        count = max(0, int(math.ceil((horizon - start) / period)) + 1)
    times = start + period * np.arange(count, dtype=float)
    if horizon is not None:
        times = times[times < horizon]
    return ImpulseTrain(times, period)


def random_dead_time_train(rate: float, dead_time: float, horizon: float,
                           seed: int | np.random.Generator | None = 0,
                           t_start: float = 0.0) -> ImpulseTrain:
    """Poisson arrivals at ``rate`` thinned by a hard dead time.

    An arrival is kept only if it lands at least ``dead_time`` after the last
    kept one.
    """
    if not rate > 0.0:
        raise ParameterError(f"rate must be positive, got {rate}")
    if not dead_time >= 0.0:
        raise ParameterError(f"dead_time must be non-negative, got {dead_time}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    span = horizon - t_start
    if span <= 0:
        return ImpulseTrain()
    n = rng.poisson(rate * span)
    arrivals = np.sort(t_start + span * rng.random(n))
    kept: list[float] = []
    last = -math.inf
    for t in arrivals:
        if t - last >= dead_time and (not kept or t > last):
            kept.append(float(t))
            last = t
    return ImpulseTrain(np.array(kept))


def explicit_train(times: Sequence[float]) -> ImpulseTrain:
    """Train from a user list; coincident or decreasing instants are rejected."""
    return ImpulseTrain(np.asarray(times, dtype=float))


def generate_train(kind: str, **params) -> ImpulseTrain:
    """Dispatch on ``kind`` in {"periodic", "random_dead_time", "explicit", "none"}."""
    if kind == "periodic":
        return periodic_train(**params)
    if kind == "random_dead_time":
        return random_dead_time_train(**params)
    if kind == "explicit":
        return explicit_train(params["times"])
    if kind == "none":
        return ImpulseTrain()
    raise ParameterError(f"unknown train kind {kind!r}")


def write_train(train: ImpulseTrain, path) -> None:
    with open(path, "w") as fh:
        for t in train.times:
            fh.write(f"{float(t)!r}\n")


def read_train(path) -> ImpulseTrain:
    with open(path) as fh:
        values = [float(line) for line in fh if line.strip() and not line.lstrip().startswith("#")]
    return explicit_train(values)


# ---------------------------------------------------------------------------
# average dwell time


@dataclass(frozen=True)
class DwellTimeCertificate:
    n0: float
    tau_a: float
    satisfied: bool
    witness: tuple[float, float] | None = None


def _window_excess(times: np.ndarray, n0: float, tau_a: float):
    """Largest ``N - n0 - length / tau_a`` over closed windows between impulses.

    A window ``[t_i, t_j]`` holds ``j - i + 1`` impulses; half-open windows
    ``(t1, t2]`` reach the same count in the limit ``t1 -> t_i^-``, so these
    are the binding ones.
    """
    n = times.size
    best, where = -math.inf, None
    for c in range(1, n + 1):
        spans = times[c - 1:] - times[: n - c + 1]
        excess = c - n0 - spans / tau_a
        i = int(np.argmax(excess))
        if excess[i] > best:
            best, where = float(excess[i]), (i, i + c - 1)
    return best, where


def check_average_dwell_time(train: ImpulseTrain | Sequence[float], n0: float, tau_a: float,
                             rtol: float = 1e-9) -> DwellTimeCertificate:
    """Test ``N(t2, t1) <= n0 + (t2 - t1) / tau_a`` for every window.

    ``rtol`` absorbs round-off in impulse instants that are exact multiples
    of a period.
    """
    if n0 < 0 or not tau_a > 0:
        raise ParameterError("need n0 >= 0 and tau_a > 0")
    times = train.times if isinstance(train, ImpulseTrain) else np.asarray(train, dtype=float)
    if times.size == 0:
        return DwellTimeCertificate(n0, tau_a, True)
    best, (i, j) = _window_excess(times, n0, tau_a)
    slack = rtol * max(1.0, times.size)
    if best <= slack:
        return DwellTimeCertificate(n0, tau_a, True)
    return DwellTimeCertificate(n0, tau_a, False, (float(times[i]), float(times[j])))


def min_tau_a(train: ImpulseTrain | Sequence[float], n0: float = 1) -> float | None:
    """Largest average dwell time admitted by ``train`` for chatter bound ``n0``.

    This is ``min (t_j - t_i) / (j - i + 1 - n0)`` over windows holding more
    than ``n0`` impulses. ``None`` means unconstrained: no window exceeds
    ``n0`` so every positive ``tau_a`` passes.
    """
    if n0 < 1:
        raise ParameterError("n0 must be at least 1")
    times = train.times if isinstance(train, ImpulseTrain) else np.asarray(train, dtype=float)
    n = times.size
    best = math.inf
    first = int(math.floor(n0)) + 1
    for c in range(first, n + 1):
        spans = times[c - 1:] - times[: n - c + 1]
        best = min(best, float(spans.min()) / (c - n0))
    return None if math.isinf(best) else best
