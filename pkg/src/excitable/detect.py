"""Hysteretic spike-event detector.

A Schmitt trigger with a dwell requirement: the detector is armed at the
start and again whenever the voltage has fallen to ``v_low`` or below after a
window closed. An armed upward crossing of ``v_high`` opens a window, the next
downward crossing closes it, and the window yields an event if it lasted at
least ``tau_e``. The event time is the first sample attaining the window
maximum. Only grid samples are used; apex times are quantized to the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ParameterError

__all__ = ["DetectorConfig", "EventSet", "detect", "event_map", "default_detector"]


@dataclass(frozen=True)
class DetectorConfig:
    v_low: float = 20.0
    v_high: float = 51.5
    tau_e: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.v_low < self.v_high:
            raise ParameterError(f"need 0 < v_low < v_high, got v_low={self.v_low}, v_high={self.v_high}")
        if not self.tau_e > 0.0:
            raise ParameterError(f"tau_e must be positive, got {self.tau_e}")


def default_detector(e_min: float, e_max: float, v_low: float = 20.0, tau_e: float = 0.5) -> DetectorConfig:
    """``v_high`` at the midpoint of the reversal range."""
    return DetectorConfig(v_low, 0.5 * (e_min + e_max), tau_e)


@dataclass(frozen=True)
class EventSet:
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    windows: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float).ravel())
        object.__setattr__(self, "windows", np.asarray(self.windows, dtype=float).reshape(-1, 2))

    def __len__(self) -> int:
        return self.times.size

    def after(self, t0: float) -> "EventSet":
        keep = self.times >= t0
        return EventSet(self.times[keep], self.windows[keep])

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.windows]).reshape(-1, 3)
        np.savetxt(path, data, delimiter=",", header="event_time,window_start,window_end",
                   comments="", fmt="%.17g")


def _check_uniform(times: np.ndarray) -> float:
    if times.size < 2:
        return 0.0
    steps = np.diff(times)
    dt = (times[-1] - times[0]) / (times.size - 1)
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-6 * dt:
        raise ParameterError("detector needs uniformly sampled input")
    return dt


def detect(times, v, config: DetectorConfig | None = None, backend: str | None = None) -> EventSet:
    """Events of a uniformly sampled voltage trace."""
    config = config or DetectorConfig()
    times = np.asarray(times, dtype=float).ravel()
    v = np.ascontiguousarray(v, dtype=float).ravel()
    if times.size != v.size:
        raise ParameterError("times and voltage must have the same length")
    if v.size == 0:
        return EventSet()
    _check_uniform(times)
    runs = np.zeros((v.size // 2 + 1, 2), dtype=np.int_)
    count = _backend.get_kernel(backend).schmitt_windows(v, config.v_low, config.v_high, runs)
    ev, win = [], []
    for i0, i1 in runs[:count]:
        a, b = times[i0], times[i1]
        if b - a < config.tau_e:
            continue
        apex = i0 + int(np.argmax(v[i0:i1 + 1]))
        ev.append(times[apex])
        win.append((a, b))
    return EventSet(np.array(ev), np.array(win).reshape(-1, 2))


def event_map(model, synapse, z0, train, t_end, solver=None, detector: DetectorConfig | None = None) -> EventSet:
    """Events of the voltage produced from ``z0`` under ``train``."""
    from .integrate import integrate

    traj = integrate(model, synapse, z0, train, t_end, solver)
    return detect(traj.times, traj.v, detector)
