"""Conductance-based membrane model with monomial-gated Ohmic currents.

The state is ``z = (s, x_1..x_m, v)``: synaptic activation, gating variables
and membrane voltage (mV, shifted so that rest sits at 0 mV). Gate kinetics
are given by opening/closing rates ``alpha_j(v)``, ``beta_j(v)`` from a small
closed family of forms, which is what lets the compiled kernel evaluate them
without calling back into Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EquilibriumError, ParameterError
from .synapse import SynapseParams

__all__ = [
    "RateFunction",
    "GateSpec",
    "IonicCurrentSpec",
    "NeuronModel",
    "State",
    "CompactSet",
    "hodgkin_huxley",
    "steady_state_activation",
    "ionic_current",
    "vector_field",
    "driving_point",
    "calibrate_leak",
    "compute_equilibrium",
    "compact_set",
]

RATE_KINDS = {"exp": 0, "sigmoid": 1, "linoid": 2}

# |x| below which x / (1 - exp(-x)) is replaced by its series 1 + x/2
LINOID_GUARD = 1e-7


@dataclass(frozen=True)
class RateFunction:
    """Voltage-dependent transition rate (1/ms).

    With ``x = (v - midpoint) / slope``:

    * ``exp``:     ``scale * exp(x)``
    * ``sigmoid``: ``scale / (1 + exp(-x))``
    * ``linoid``:  ``scale * x / (1 - exp(-x))``, equal to ``scale`` at x = 0
    """

    kind: str
    scale: float
    midpoint: float
    slope: float

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise ParameterError(f"unknown rate kind {self.kind!r}")
        if not self.scale > 0 or self.slope == 0:
            raise ParameterError("rate scale must be positive and slope non-zero")

    def __call__(self, v):
        x = (np.asarray(v, dtype=float) - self.midpoint) / self.slope
        if self.kind == "exp":
            return self.scale * np.exp(x)
        if self.kind == "sigmoid":
            return self.scale / (1.0 + np.exp(-x))
        small = np.abs(x) < LINOID_GUARD
        safe = np.where(small, 1.0, x)
        with np.errstate(over="ignore"):
            out = safe / -np.expm1(-safe)
        return self.scale * np.where(small, 1.0 + 0.5 * x, out)

    def derivative(self, v):
        """d(rate)/dv."""
        x = (np.asarray(v, dtype=float) - self.midpoint) / self.slope
        if self.kind == "exp":
            return self.scale * np.exp(x) / self.slope
        if self.kind == "sigmoid":
            e = np.exp(-x)
            return self.scale * e / (1.0 + e) ** 2 / self.slope
        small = np.abs(x) < 1e-4
        safe = np.where(small, 1.0, x)
        em = -np.expm1(-safe)
        full = (em - safe * np.exp(-safe)) / em**2
        return self.scale * np.where(small, 0.5 + x / 6.0, full) / self.slope

    def as_row(self) -> tuple[float, float, float, float]:
        return float(RATE_KINDS[self.kind]), self.scale, self.midpoint, self.slope


@dataclass(frozen=True)
class GateSpec:
    """Gate relaxing to ``mu(v) = a / (a + b)`` with time constant ``1 / (a + b)``."""

    name: str
    alpha: RateFunction
    beta: RateFunction

    def steady_state(self, v):
        a, b = self.alpha(v), self.beta(v)
        return a / (a + b)

    def time_constant(self, v):
        return 1.0 / (self.alpha(v) + self.beta(v))


@dataclass(frozen=True)
class IonicCurrentSpec:
    """Ohmic current ``gbar * prod(x_j ** exponents[j]) * (v - reversal)``."""

    name: str
    gbar: float
    reversal: float
    exponents: tuple[int, ...]

    def __post_init__(self):
        if not self.gbar > 0:
            raise ParameterError(f"{self.name}: maximal conductance must be positive")
        exps = tuple(int(p) for p in self.exponents)
        if any(p < 0 for p in exps):
            raise ParameterError(f"{self.name}: gate exponents must be non-negative integers")
        object.__setattr__(self, "exponents", exps)

    def activation(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[1:]) if x.ndim > 1 else 1.0
        for j, p in enumerate(self.exponents):
            if p:
                out = out * x[j] ** p
        return out

    def activation_grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        grad = np.zeros(len(self.exponents))
        for j, p in enumerate(self.exponents):
            if p == 0:
                continue
            term = p * x[j] ** (p - 1)
            for i, q in enumerate(self.exponents):
                if i != j and q:
                    term *= x[i] ** q
            grad[j] = term
        return grad


@dataclass(frozen=True)
class NeuronModel:
    capacitance: float
    g_leak: float
    e_leak: float
    gates: tuple[GateSpec, ...]
    currents: tuple[IonicCurrentSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "currents", tuple(self.currents))
        if not self.capacitance > 0:
            raise ParameterError("capacitance must be positive")
        if not self.g_leak > 0:
            raise ParameterError("leak conductance must be positive")
        for c in self.currents:
            if len(c.exponents) != self.m:
                raise ParameterError(f"{c.name}: expected {self.m} gate exponents")

    @property
    def m(self) -> int:
        return len(self.gates)

    @property
    def n(self) -> int:
        return len(self.currents)

    @property
    def dim(self) -> int:
        return self.m + 2

    def current(self, name: str) -> IonicCurrentSpec:
        for c in self.currents:
            if c.name == name:
                return c
        raise KeyError(name)

    def with_current(self, name: str, **changes) -> "NeuronModel":
        currents = tuple(replace(c, **changes) if c.name == name else c for c in self.currents)
        return replace(self, currents=currents)

    def calibrated(self) -> "NeuronModel":
        """Copy whose leak reversal balances the currents at v = 0."""
        return replace(self, e_leak=calibrate_leak(self))

    def kernel_arrays(self):
        """Flat arrays consumed by the integration kernels."""
        rates = np.array([a for g in self.gates for a in g.alpha.as_row() + g.beta.as_row()], dtype=float)
        gbar = np.array([c.gbar for c in self.currents], dtype=float)
        erev = np.array([c.reversal for c in self.currents], dtype=float)
        expo = np.array([p for c in self.currents for p in c.exponents], dtype=np.intc)
        return rates, gbar, erev, expo


@dataclass(frozen=True)
class State:
    """Composite state; converts to the flat vector ``(s, x..., v)``."""

    s: float
    x: tuple[float, ...]
    v: float

    def __array__(self, dtype=None, copy=None):
        return np.array([self.s, *self.x, self.v], dtype=dtype or float)

    @classmethod
    def from_vector(cls, z) -> "State":
        z = np.asarray(z, dtype=float)
        return cls(float(z[0]), tuple(float(a) for a in z[1:-1]), float(z[-1]))


@dataclass(frozen=True)
class CompactSet:
    """The box ``[0,1] x [0,1]^m x [e_min, e_max]``."""

    e_min: float
    e_max: float
    m: int

    def __post_init__(self):
        if not self.e_min < self.e_max:
            raise ParameterError("need e_min < e_max")

    @property
    def lower(self) -> np.ndarray:
        return np.r_[0.0, np.zeros(self.m), self.e_min]

    @property
    def upper(self) -> np.ndarray:
        return np.r_[1.0, np.ones(self.m), self.e_max]

    def contains(self, z, tol: float = 0.0, tol_v: float = 0.0) -> bool:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        eps = np.r_[np.full(self.m + 1, tol), tol_v]
        return bool(np.all(z >= self.lower - eps) and np.all(z <= self.upper + eps))

    def violation(self, z) -> np.ndarray:
        """Per-component worst excursion outside the box (0 when inside)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        below = np.max(self.lower - z, axis=0)
        above = np.max(z - self.upper, axis=0)
        return np.maximum(0.0, np.maximum(below, above))

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        shape = (self.m + 2,) if n is None else (n, self.m + 2)
        return self.lower + (self.upper - self.lower) * rng.random(shape)


def compact_set(model: NeuronModel, synapse: SynapseParams) -> CompactSet:
    revs = [model.e_leak, synapse.e_s, *(c.reversal for c in model.currents)]
    return CompactSet(min(revs), max(revs), model.m)


def _vector(z) -> np.ndarray:
    return np.asarray(z, dtype=float)


def steady_state_activation(gate: GateSpec, v):
    return gate.steady_state(v)


def ionic_current(spec: IonicCurrentSpec, x, v):
    return spec.gbar * spec.activation(x) * (np.asarray(v, dtype=float) - spec.reversal)


def driving_point(model: NeuronModel, synapse: SynapseParams, x, s: float) -> tuple[float, float]:
    """Total conductance ``G`` and the conductance-weighted reversal ``E``."""
    weights = [model.g_leak] + [c.gbar * c.activation(x) for c in model.currents] + [synapse.g_s * s]
    revs = [model.e_leak] + [c.reversal for c in model.currents] + [synapse.e_s]
    G = float(np.sum(weights))
    E = float(np.dot(weights, revs) / G)
    return G, E


def vector_field(model: NeuronModel, synapse: SynapseParams, z) -> np.ndarray:
    """Unforced field ``(s', x', v')``; impulses enter only through jumps."""
    z = _vector(z)
    s, x, v = z[0], z[1:-1], z[-1]
    dz = np.empty_like(z)
    dz[0] = -s / synapse.tau_s
    for j, g in enumerate(model.gates):
        a, b = g.alpha(v), g.beta(v)
        dz[1 + j] = a - (a + b) * x[j]
    i_ion = model.g_leak * (v - model.e_leak) + synapse.g_s * s * (v - synapse.e_s)
    for c in model.currents:
        i_ion = i_ion + ionic_current(c, x, v)
    dz[-1] = -i_ion / model.capacitance
    return dz


def calibrate_leak(model: NeuronModel) -> float:
    """Leak reversal making ``(x*, v=0)`` balance, with ``x*_j = mu_j(0)``."""
    x_star = np.array([g.steady_state(0.0) for g in model.gates], dtype=float)
    total = math.fsum(c.gbar * float(c.activation(x_star)) * c.reversal for c in model.currents)
    return -total / model.g_leak


def compute_equilibrium(model: NeuronModel, synapse: SynapseParams, tol: float = 1e-12) -> State:
    """Rest state ``(0, mu(0), 0)`` of a leak-calibrated model."""
    x_star = tuple(float(g.steady_state(0.0)) for g in model.gates)
    z = State(0.0, x_star, 0.0)
    residual = float(np.linalg.norm(vector_field(model, synapse, z)))
    if not residual <= tol:
        raise EquilibriumError(
            f"current balance residual {residual:.3e} exceeds {tol:.1e}; calibrate the leak first"
        )
    return z


# ---------------------------------------------------------------------------
# Hodgkin-Huxley, shifted so that rest is at 0 mV


def _hh_gates() -> tuple[GateSpec, ...]:
    return (
        GateSpec("m", RateFunction("linoid", 1.0, 25.0, 10.0), RateFunction("exp", 4.0, 0.0, -18.0)),
        GateSpec("h", RateFunction("exp", 0.07, 0.0, -20.0), RateFunction("sigmoid", 1.0, 30.0, 10.0)),
        GateSpec("n", RateFunction("linoid", 0.1, 10.0, 10.0), RateFunction("exp", 0.125, 0.0, -80.0)),
    )


def hodgkin_huxley(capacitance: float = 1.0, g_na: float = 120.0, g_k: float = 36.0,
                   g_leak: float = 0.3, e_na: float = 115.0, e_k: float = -12.0) -> NeuronModel:
    """Squid-axon model with the leak reversal calibrated so rest is exactly 0 mV."""
    currents = (
        IonicCurrentSpec("Na", g_na, e_na, (3, 1, 0)),
        IonicCurrentSpec("K", g_k, e_k, (0, 0, 4)),
    )
    return NeuronModel(capacitance, g_leak, 0.0, _hh_gates(), currents).calibrated()
