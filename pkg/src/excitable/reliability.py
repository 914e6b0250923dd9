"""Trial-to-trial spike-timing reliability under a shared impulse train.

Each trial draws its own initial state and multiplicative parameter jitter
from a substream keyed by ``(seed, trial_id)``, so results do not depend on
execution order or thread count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .detect import DetectorConfig, EventSet, detect
from .errors import ExcitableError, ParameterError
from .integrate import SolverSettings, integrate
from .model import NeuronModel, compact_set, compute_equilibrium
from .synapse import ImpulseTrain, SynapseParams

__all__ = [
    "JITTERABLE",
    "EnsembleConfig",
    "Cluster",
    "ReliabilityReport",
    "perturb",
    "match_events",
    "run_ensemble",
    "export_raster",
    "read_raster",
]

JITTERABLE = ("g_na", "g_k", "g_leak", "g_s", "tau_s", "alpha", "capacitance")


@dataclass(frozen=True)
class EnsembleConfig:
    train: ImpulseTrain
    t_end: float = 300.0
    n_trials: int = 10
    ic_sampling: str = "uniform"
    ic_radius: float = 1.0
    param_jitter: float = 0.2
    jitter_params: tuple[str, ...] = JITTERABLE
    seed: int = 0
    transient_cut: float = 50.0
    match_window: float | None = None

    def __post_init__(self):
        if self.n_trials < 2:
            raise ParameterError("need at least 2 trials")
        if not 0.0 <= self.param_jitter <= 0.5:
            raise ParameterError("param_jitter must lie in [0, 0.5]")
        if self.ic_sampling not in ("uniform", "ball", "rest"):
            raise ParameterError(f"unknown ic_sampling {self.ic_sampling!r}")
        unknown = set(self.jitter_params) - set(JITTERABLE)
        if unknown:
            raise ParameterError(f"cannot jitter {sorted(unknown)}; choose from {JITTERABLE}")
        if self.match_window is not None and not self.match_window > 0:
            raise ParameterError("match_window must be positive")
        object.__setattr__(self, "jitter_params", tuple(self.jitter_params))


def perturb(model: NeuronModel, synapse: SynapseParams, rng: np.random.Generator, jitter: float,
            names=JITTERABLE) -> tuple[NeuronModel, SynapseParams, dict]:
    """Scale each named parameter by an independent factor in ``[1 - jitter, 1 + jitter]``.

    ``alpha`` is clamped to at most 1 and the leak is recalibrated so rest
    stays at 0 mV. Factors are drawn for every jitterable name in a fixed order
    so the stream does not depend on which subset is active.
    """
    factors = {name: 1.0 + jitter * (2.0 * rng.random() - 1.0) for name in JITTERABLE}
    factors = {k: (v if k in names else 1.0) for k, v in factors.items()}
    m, s = model, synapse
    if "g_na" in names:
        m = m.with_current("Na", gbar=m.current("Na").gbar * factors["g_na"])
    if "g_k" in names:
        m = m.with_current("K", gbar=m.current("K").gbar * factors["g_k"])
    m = replace(m, g_leak=m.g_leak * factors["g_leak"], capacitance=m.capacitance * factors["capacitance"])
    s = replace(s, g_s=s.g_s * factors["g_s"], tau_s=s.tau_s * factors["tau_s"],
                alpha=min(1.0, s.alpha * factors["alpha"]))
    return m.calibrated(), s, factors


def _initial_state(model, synapse, rng, cfg: EnsembleConfig) -> np.ndarray:
    box = compact_set(model, synapse)
    if cfg.ic_sampling == "uniform":
        return box.sample(rng)
    rest = np.asarray(compute_equilibrium(model, synapse))
    if cfg.ic_sampling == "rest":
        return rest
    # ball around rest, scaled per component by the box extent, kept inside the box
    direction = rng.normal(size=rest.size)
    direction /= np.linalg.norm(direction)
    z = rest + cfg.ic_radius * rng.random() * direction * (box.upper - box.lower)
    return np.clip(z, box.lower, box.upper)


@dataclass
class Cluster:
    trials: list[int]
    times: list[float]

    @property
    def centroid(self) -> float:
        return float(np.mean(self.times))

    @property
    def jitter(self) -> float:
        """Population standard deviation of member times."""
        t = np.asarray(self.times)
        return float(np.std(t - t[0]))


def match_events(event_sets, window: float) -> list[Cluster]:
    """Greedy clustering of events across trials.

    Events are visited in time order (ties by trial); each joins the open
    cluster with the nearest centroid within ``window`` that lacks its trial,
    or starts a new one.
    """
    if not window > 0:
        raise ParameterError("match window must be positive")
    events = sorted((float(t), i) for i, es in enumerate(event_sets)
                    for t in (es.times if isinstance(es, EventSet) else es))
    clusters: list[Cluster] = []
    open_ids: list[int] = []
    for t, trial in events:
        open_ids = [c for c in open_ids if t - clusters[c].centroid <= window]
        best, best_gap = None, math.inf
        for c in open_ids:
            gap = abs(t - clusters[c].centroid)
            if trial not in clusters[c].trials and gap <= window and gap < best_gap:
                best, best_gap = c, gap
        if best is None:
            clusters.append(Cluster([trial], [t]))
            open_ids.append(len(clusters) - 1)
        else:
            clusters[best].trials.append(trial)
            clusters[best].times.append(t)
    return clusters


@dataclass
class ReliabilityReport:
    """Ensemble outcome.

    ``matched_fraction`` counts events in clusters that hold one event from
    every successful trial. ``jitter`` lists the per-cluster spread of clusters
    with at least two trials.
    """

    event_sets: list[EventSet]
    clusters: list[Cluster]
    matched_fraction: float
    jitter: np.ndarray
    mean_isi: float
    rates: np.ndarray
    window: float
    trial_ids: list[int]
    failed_trials: dict = field(default_factory=dict)
    trajectories: list = field(default_factory=list, repr=False)
    factors: list = field(default_factory=list, repr=False)

    @property
    def max_jitter(self) -> float:
        return float(self.jitter.max()) if self.jitter.size else 0.0

    def summary(self) -> dict:
        return {
            "n_trials": len(self.trial_ids),
            "failed_trials": {str(k): v for k, v in self.failed_trials.items()},
            "total_events": int(sum(len(e) for e in self.event_sets)),
            "n_clusters": len(self.clusters),
            "matched_fraction": self.matched_fraction,
            "max_jitter_ms": self.max_jitter,
            "mean_isi_ms": self.mean_isi,
            "match_window_ms": self.window,
            "rates_per_s": [float(r) for r in self.rates],
        }


def _mean_isi(event_sets) -> float:
    isis = np.concatenate([np.diff(e.times) for e in event_sets if len(e) > 1] or [np.empty(0)])
    return float(isis.mean()) if isis.size else math.nan


def _rate(es: EventSet) -> float:
    """Firing rate in spikes/s from the mean inter-event interval."""
    return 1000.0 / float(np.diff(es.times).mean()) if len(es) > 1 else 0.0


def score(event_sets, trial_ids, window: float | None = None):
    """Cluster events and compute the alignment statistics."""
    mean_isi = _mean_isi(event_sets)
    if window is None:
        window = 5.0 if math.isnan(mean_isi) else min(5.0, mean_isi / 4.0)
    clusters = match_events(event_sets, window)
    total = sum(len(c.times) for c in clusters)
    full = sum(len(c.times) for c in clusters if len(c.trials) == len(event_sets))
    matched = full / total if total else 1.0
    jitter = np.array([c.jitter for c in clusters if len(c.trials) >= 2])
    return clusters, matched, jitter, mean_isi, window


def run_ensemble(model: NeuronModel, synapse: SynapseParams, config: EnsembleConfig,
                 solver: SolverSettings | None = None, detector: DetectorConfig | None = None,
                 threads: int = 1, keep_trajectories: bool = False) -> ReliabilityReport:
    """Integrate every trial under the shared train, detect events and score alignment."""
    detector = detector or DetectorConfig()

    def trial(i: int):
        rng = np.random.default_rng([config.seed, i])
        m, s, factors = perturb(model, synapse, rng, config.param_jitter, config.jitter_params)
        z0 = _initial_state(m, s, rng, config)
        try:
            traj = integrate(m, s, z0, config.train, config.t_end, solver)
        except ExcitableError as exc:
            return i, None, None, factors, str(exc)
        events = detect(traj.times, traj.v, detector).after(config.transient_cut)
        return i, events, traj, factors, None

    ids = range(config.n_trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(trial, ids))
    else:
        results = [trial(i) for i in ids]

    ok = [r for r in results if r[4] is None]
    failed = {r[0]: r[4] for r in results if r[4] is not None}
    event_sets = [r[1] for r in ok]
    clusters, matched, jitter, mean_isi, window = score(event_sets, [r[0] for r in ok], config.match_window)
    return ReliabilityReport(
        event_sets=event_sets,
        clusters=clusters,
        matched_fraction=matched,
        jitter=jitter,
        mean_isi=mean_isi,
        rates=np.array([_rate(e) for e in event_sets]),
        window=window,
        trial_ids=[r[0] for r in ok],
        failed_trials=failed,
        trajectories=[r[2] for r in ok] if keep_trajectories else [],
        factors=[r[3] for r in ok],
    )


def export_raster(report_or_sets, path, trial_ids=None) -> None:
    """CSV ``trial_id,event_time`` sorted by trial then time."""
    if isinstance(report_or_sets, ReliabilityReport):
        sets, ids = report_or_sets.event_sets, report_or_sets.trial_ids
    else:
        sets = list(report_or_sets)
        ids = list(trial_ids) if trial_ids is not None else list(range(len(sets)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial_id", "event_time"])
        for tid, es in sorted(zip(ids, sets), key=lambda p: p[0]):
            times = es.times if isinstance(es, EventSet) else np.asarray(es, dtype=float)
            for t in np.sort(times):
                w.writerow([tid, repr(float(t))])


def read_raster(path) -> dict[int, np.ndarray]:
    out: dict[int, list[float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(int(row["trial_id"]), []).append(float(row["event_time"]))
    return {k: np.array(v) for k, v in out.items()}
