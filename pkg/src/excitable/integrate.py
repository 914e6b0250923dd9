"""Hybrid flow-and-jump integration of the forced membrane model.

Impulse instants are hard breakpoints: the smooth field is integrated up to
the left limit, ``s`` jumps exactly, and integration restarts. Output is
sampled on a uniform grid through the solver's dense output; a grid point
that coincides with an impulse receives the right limit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import IntegrationError, ParameterError
from .model import NeuronModel, compact_set
from .synapse import ImpulseTrain, SynapseParams

__all__ = ["SolverSettings", "Trajectory", "integrate", "integrate_pair", "integrate_many", "divergence"]

_STATUS = {
    1: "step size underflow (stiffness failure)",
    2: "non-finite state",
    3: "step budget exhausted",
}


@dataclass(frozen=True)
class SolverSettings:
    """``method`` is "dopri5" (adaptive 5(4) with dense output) or "rk4".

    For "rk4", ``max_step`` is the fixed step; each inter-impulse segment is
    split into equal substeps no longer than it.
    """

    method: str = "dopri5"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 0.1
    output_dt: float = 0.01
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ParameterError(f"unknown solver method {self.method!r}")
        for name in ("rel_tol", "abs_tol", "max_step", "output_dt"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")

    def tightened(self, factor: float = 0.5) -> "SolverSettings":
        return SolverSettings(self.method, self.rel_tol * factor, self.abs_tol * factor,
                              self.max_step, self.output_dt, self.max_steps)


@dataclass
class Trajectory:
    """Uniformly sampled solution plus left/right limits at every impulse.

    ``states`` has one row per grid time and columns ``(s, x_1..x_m, v)``.
    """

    times: np.ndarray
    states: np.ndarray
    impulse_times: np.ndarray
    left_limits: np.ndarray
    right_limits: np.ndarray
    final_state: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def s(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 1:-1]

    @property
    def v(self) -> np.ndarray:
        return self.states[:, -1]

    @property
    def output_dt(self) -> float:
        return float(self.meta.get("output_dt", self.times[1] - self.times[0]))

    def to_csv(self, path) -> None:
        m = self.states.shape[1] - 2
        header = ",".join(["t", "s", *(f"x{j + 1}" for j in range(m)), "v"])
        np.savetxt(path, np.column_stack([self.times, self.states]), delimiter=",",
                   header=header, comments="", fmt="%.12g")

    def limits_to_csv(self, path) -> None:
        data = np.column_stack([self.impulse_times, self.left_limits[:, 0], self.right_limits[:, 0]])
        np.savetxt(path, data.reshape(-1, 3), delimiter=",", header="t_impulse,s_minus,s_plus",
                   comments="", fmt="%.17g")


def _kernel_params(model: NeuronModel, synapse: SynapseParams) -> np.ndarray:
    return np.array([model.capacitance, model.g_leak, model.e_leak, synapse.tau_s,
                     synapse.alpha, synapse.g_s, synapse.e_s], dtype=float)


def integrate(model: NeuronModel, synapse: SynapseParams, z0, train: ImpulseTrain | None,
              t_end: float, settings: SolverSettings | None = None, backend: str | None = None) -> Trajectory:
    """Solve from ``z0`` on ``[0, t_end]`` under ``train``.

    States are never clipped to the invariant box; leaving it is a defect the
    caller should be able to see.
    """
    settings = settings or SolverSettings()
    train = train if train is not None else ImpulseTrain()
    y = np.array(z0, dtype=float).ravel()
    if y.size != model.dim:
        raise ParameterError(f"initial state has {y.size} components, model needs {model.dim}")
    if not t_end > 0:
        raise ParameterError("t_end must be positive")
    imp = np.ascontiguousarray(train.times, dtype=float)
    if imp.size and imp[-1] >= t_end:
        raise ParameterError("impulse times must lie before t_end")

    dt = settings.output_dt
    n_out = int(math.floor(t_end / dt + 1e-9)) + 1
    out = np.zeros((n_out, model.dim))
    lim = np.zeros((imp.size, model.dim))
    diag = np.zeros(4)
    rates, gbar, erev, expo = model.kernel_arrays()
    kern = _backend.get_kernel(backend)
    method = 0 if settings.method == "dopri5" else 1
    h0 = min(settings.max_step, 1e-3) if method == 0 else settings.max_step
    status = kern.integrate_hybrid(rates, gbar, erev, expo, _kernel_params(model, synapse), y, imp,
                                   float(t_end), dt, method, settings.rel_tol, settings.abs_tol,
                                   settings.max_step, h0, int(settings.max_steps), out, lim, diag)
    if status != 0:
        t_fail = float(diag[0]) if status != 2 or diag[0] else 0.0
        raise IntegrationError(_STATUS.get(status, f"kernel status {status}"), t_fail)

    right = lim.copy()
    if imp.size:
        right[:, 0] = (1.0 - synapse.alpha) * lim[:, 0] + synapse.alpha
    meta = {
        "backend": kern.__name__.rsplit(".", 1)[-1],
        "method": settings.method,
        "rel_tol": settings.rel_tol,
        "abs_tol": settings.abs_tol,
        "max_step": settings.max_step,
        "output_dt": dt,
        "steps": int(diag[1]),
        "rejected": int(diag[2]),
        "nfev": int(diag[3]),
    }
    return Trajectory(np.arange(n_out) * dt, out, imp.copy(), lim, right, y, meta)


def divergence(a: np.ndarray, b: np.ndarray, weight: np.ndarray | None = None) -> np.ndarray:
    """Row-wise distance between two state arrays, Euclidean or ``sqrt(d' P d)``."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if weight is None:
        return np.sqrt(np.einsum("...i,...i->...", diff, diff))
    return np.sqrt(np.maximum(0.0, np.einsum("...i,ij,...j->...", diff, weight, diff)))


def integrate_many(model, synapse, initial_states, train, t_end, settings=None, threads: int = 1,
                   backend: str | None = None) -> list[Trajectory]:
    """Integrate several initial states under one train; results keep input order."""
    def run(z0):
        return integrate(model, synapse, z0, train, t_end, settings, backend)

    states = list(np.atleast_2d(initial_states))
    if threads <= 1:
        return [run(z) for z in states]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, states))


def integrate_pair(model: NeuronModel, synapse: SynapseParams, z0_a, z0_b, train, t_end: float,
                   settings: SolverSettings | None = None, weight=None, threads: int = 1):
    """Two solutions under the same train and their divergence on the shared grid."""
    ta, tb = integrate_many(model, synapse, [z0_a, z0_b], train, t_end, settings, threads)
    return ta, tb, divergence(ta.states, tb.states, weight)


def in_compact_set(model: NeuronModel, synapse: SynapseParams, traj: Trajectory,
                   tol: float = 1e-6, tol_v: float = 1e-3) -> bool:
    box = compact_set(model, synapse)
    return box.contains(traj.states, tol, tol_v) and box.contains(traj.left_limits, tol, tol_v)
