"""Command-line front end.

Every run computes first and writes afterwards from a single thread, so the
files are identical regardless of ``--threads``. Each output directory gets
the resolved ``config.toml`` and a ``manifest.json`` that ``replay`` accepts.

Exit codes: 0 success, 2 usage error, 3 invalid configuration, 4 simulation
or analysis failure, 5 file system error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import tomli_w

from . import __version__, _backend
from .config import PRESETS, ExperimentConfig, load_config, parse_config, preset_config
from .contraction import certify_rest_state, dwell_criterion, estimate_contraction, forced_divergence_study
from .detect import detect
from .errors import ConfigError, ExcitableError
from .integrate import in_compact_set, integrate
from .model import compact_set, compute_equilibrium
from .reliability import export_raster, run_ensemble
from .svg import line_plot, raster_plot
from .synapse import periodic_analysis

EXIT_USAGE, EXIT_CONFIG, EXIT_COMPONENT, EXIT_IO = 2, 3, 4, 5
OUTPUT_ENV = "EXCITABLE_OUTPUT_DIR"
DEFAULT_OUTPUT = "excitable-out"


class _Outputs:
    """Collects file writers; ``flush`` runs them in order from one thread."""

    def __init__(self):
        self.writers: list[tuple[str, object]] = []

    def add(self, name: str, writer) -> None:
        self.writers.append((name, writer))

    def flush(self, directory: Path) -> dict[str, str]:
        directory.mkdir(parents=True, exist_ok=True)
        digests = {}
        for name, writer in self.writers:
            path = directory / name
            writer(path)
            digests[name] = hashlib.sha256(path.read_bytes()).hexdigest()
        return digests


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _initial_states(cfg: ExperimentConfig, model, synapse, n: int) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    states = compact_set(model, synapse).sample(rng, n)
    z = cfg.initial_state()
    if z is not None:
        states[0] = z
    return states


def run_simulate(cfg: ExperimentConfig, threads: int, out: _Outputs) -> dict:
    model, synapse, train = cfg.model(), cfg.synapse(), cfg.train()
    z0 = cfg.initial_state()
    if z0 is None:
        z0 = np.asarray(compute_equilibrium(model, synapse))
    traj = integrate(model, synapse, z0, train, cfg.t_end, cfg.solver())
    events = detect(traj.times, traj.v, cfg.detector())
    out.add("trajectory.csv", traj.to_csv)
    out.add("impulses.csv", traj.limits_to_csv)
    out.add("events.csv", events.to_csv)
    out.add("voltage.svg", lambda p: line_plot(p, traj.times, [traj.v], title="membrane voltage",
                                               xlabel="time (ms)", ylabel="v (mV)"))
    return {
        "n_impulses": len(train),
        "n_events": len(events),
        "event_times_ms": events.times,
        "in_invariant_set": in_compact_set(model, synapse, traj),
        "solver_steps": traj.meta["steps"],
        "solver_rejected": traj.meta["rejected"],
    }


def run_pair(cfg: ExperimentConfig, threads: int, out: _Outputs) -> dict:
    model, synapse, train = cfg.model(), cfg.synapse(), cfg.train()
    study = cfg.sections["study"]
    starts = _initial_states(cfg, model, synapse, study["n_initial"])
    report = forced_divergence_study(model, synapse, train, t_end=cfg.t_end, settings=cfg.solver(),
                                     initial_states=starts, trailing_window=study["trailing_window"],
                                     amplitude=study["amplitude"], threads=threads)
    times = report.times
    volts = np.column_stack([times] + [t.v for t in report.trajectories])

    def write_voltages(path):
        header = ",".join(["t"] + [f"v{i}" for i in range(len(report.trajectories))])
        np.savetxt(path, volts, delimiter=",", header=header, comments="", fmt="%.12g")

    out.add("divergence.csv", report.to_csv)
    out.add("voltages.csv", write_voltages)
    out.add("divergence.svg", lambda p: line_plot(p, times, report.curves, [f"pair {i}" for i in range(len(report.curves))],
                                                  title="pair divergence", xlabel="time (ms)",
                                                  ylabel="log10 distance", ylog=True))
    out.add("voltages.svg", lambda p: line_plot(p, times, volts[:, 1:].T, title="voltage traces",
                                                xlabel="time (ms)", ylabel="v (mV)"))
    return {
        "verdict": report.verdict,
        "final_ratio": report.final_ratio,
        "trailing_mean": report.trailing_mean,
        "initial_states": starts,
        "in_invariant_set": all(in_compact_set(model, synapse, t) for t in report.trajectories),
    }


def run_contraction(cfg: ExperimentConfig, threads: int, out: _Outputs) -> dict:
    model, synapse = cfg.model(), cfg.synapse()
    study = cfg.sections["study"]
    fit = (study["fit_start"], study["fit_end"]) if "fit_start" in study else None
    rest = certify_rest_state(model, synapse, compute_equilibrium(model, synapse))
    est = estimate_contraction(model, synapse, study["n_pairs"], cfg.t_end, cfg.seed, cfg.solver(),
                               fit, threads=threads)
    kind = cfg.sections["input"]["kind"]
    if kind == "periodic":
        crit = dwell_criterion(est, period=cfg.sections["input"]["period"])
    else:
        crit = dwell_criterion(est, train=cfg.train())

    def write_curves(path):
        n_pairs, n_t = est.curves.shape
        data = np.column_stack([np.tile(est.times, n_pairs), np.repeat(np.arange(n_pairs), n_t),
                                est.curves.ravel()])
        np.savetxt(path, data, delimiter=",", header="t,pair_id,d", comments="", fmt=["%.12g", "%d", "%.12g"])

    def write_bound(path):
        np.savetxt(path, np.column_stack([est.times, est.bound(est.times)]), delimiter=",",
                   header="t,bound", comments="", fmt="%.12g")

    out.add("contraction.csv", write_curves)
    out.add("bound.csv", write_bound)
    out.add("contraction.svg", lambda p: line_plot(p, est.times, np.vstack([est.curves, est.bound(est.times)]),
                                                   title="unforced pair divergence and fitted bound",
                                                   xlabel="time (ms)", ylabel="log10 distance", ylog=True))
    return {
        "rest_spectral_abscissa": rest.spectral_abscissa,
        "rest_jacobian_fd_error": rest.fd_error,
        "lyapunov_residual": rest.residual,
        "lyapunov_min_eig": float(np.linalg.eigvalsh(rest.P).min()),
        "k": est.k,
        "lam": est.lam,
        "fit_window": est.fit_window,
        "fit_residual": est.residual,
        "dwell_threshold_rate": crit.threshold_rate,
        "dwell_min_period": crit.min_period,
        "input_rate": crit.input_rate,
        "tau_a": crit.tau_a,
        "dwell_satisfied": crit.satisfied,
        "note": "the dwell-time test is sufficient only; failure does not imply loss of contraction",
    }


def run_synapse(cfg: ExperimentConfig, threads: int, out: _Outputs) -> dict:
    synapse = cfg.synapse()
    rows = [periodic_analysis(synapse, T) for T in cfg.sections["study"]["periods"]]
    table = np.array([[r.period, r.a_T, r.s_star, r.gamma_T, r.bound, r.sup_deviation] for r in rows])

    def write(path):
        np.savetxt(path, table.reshape(-1, 6), delimiter=",", comments="", fmt="%.17g",
                   header="period,contraction_factor,s_star,decay_rate,deviation_bound,sup_deviation")

    out.add("synapse.csv", write)
    return {"periods": table[:, 0], "s_star": table[:, 2], "sup_deviation": table[:, 5],
            "deviation_bound": table[:, 4]}


def run_ensemble_cmd(cfg: ExperimentConfig, threads: int, out: _Outputs) -> dict:
    model, synapse = cfg.model(), cfg.synapse()
    report = run_ensemble(model, synapse, cfg.ensemble(), cfg.solver(), cfg.detector(), threads=threads)

    def write_rates(path):
        with open(path, "w") as fh:
            fh.write("trial_id,n_events,rate_per_s\n")
            for tid, es, rate in zip(report.trial_ids, report.event_sets, report.rates):
                fh.write(f"{tid},{len(es)},{float(rate)!r}\n")

    out.add("raster.csv", lambda p: export_raster(report, p))
    out.add("rates.csv", write_rates)
    out.add("raster.svg", lambda p: raster_plot(p, [e.times for e in report.event_sets], cfg.t_end,
                                                report.trial_ids, title="spike raster"))
    summary = report.summary()
    summary["aligned"] = bool(report.matched_fraction >= 0.9 and report.max_jitter <= 0.1 * report.mean_isi)
    summary["note"] = "alignment thresholds (0.9 matched, jitter <= 0.1 mean ISI) are artifact choices"
    return summary


COMMANDS = {
    "simulate": run_simulate,
    "pair": run_pair,
    "contraction": run_contraction,
    "synapse": run_synapse,
    "ensemble": run_ensemble_cmd,
}

PRESET_COMMANDS = {"fig3-sparse": "pair", "fig3-dense": "pair", "fig4-sparse": "ensemble", "fig4-dense": "ensemble"}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master random seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    common.add_argument("--tolerance", type=float, default=argparse.SUPPRESS,
                        help="solver relative tolerance; absolute tolerance is 1%% of it")
    common.add_argument("--output", default=argparse.SUPPRESS,
                        help=f"output directory (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")

    parser = argparse.ArgumentParser(prog="excitable", parents=[common],
                                     description="Impulse-driven conductance-based neuron experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "simulate": "single trajectory and detected events",
        "pair": "divergence of several initial states under a shared input",
        "contraction": "estimate unforced contraction constants and dwell-time criteria",
        "synapse": "periodic synapse analysis over a sweep of periods",
        "ensemble": "multi-trial reliability report and raster",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--t-end", type=float, help="simulated duration in ms")
    p = sub.add_parser("preset", parents=[common], help="run a figure preset")
    p.add_argument("name", choices=sorted(PRESETS))
    p = sub.add_parser("replay", parents=[common], help="re-run from a manifest.json")
    p.add_argument("manifest")
    return parser


def _resolve(args) -> tuple[str, ExperimentConfig, str | None]:
    if args.command == "preset":
        return PRESET_COMMANDS[args.name], preset_config(args.name), args.name
    if args.command == "replay":
        try:
            manifest = json.loads(Path(args.manifest).read_text())
            command, config = manifest["command"], manifest["config"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"unreadable manifest {args.manifest}: {exc}") from exc
        return command, parse_config(tomli_w.dumps(config)), manifest.get("preset")
    cfg = load_config(args.config) if args.config else parse_config("")
    if args.t_end is not None:
        cfg = cfg.with_overrides(t_end=args.t_end)
    return args.command, cfg, cfg.get("", "preset")


def _output_dir(args, cfg: ExperimentConfig) -> Path:
    if getattr(args, "output", None):
        return Path(args.output)
    if args.command == "replay":
        return Path(args.manifest).resolve().parent / "replay"
    return Path(cfg.output or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def run(args) -> int:
    command, cfg, preset = _resolve(args)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "tolerance", None) is not None:
        overrides["solver.rel_tol"] = args.tolerance
        overrides["solver.abs_tol"] = args.tolerance * 1e-2
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    threads = getattr(args, "threads", 1)
    if threads < 1:
        raise ConfigError("--threads must be at least 1")
    directory = _output_dir(args, cfg)

    outputs = _Outputs()
    results = COMMANDS[command](cfg, threads, outputs)
    echo = cfg.to_toml()
    digests = outputs.flush(directory)
    (directory / "config.toml").write_text(echo)
    manifest = {
        "command": command,
        "preset": preset,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "threads": threads,
        "backend": _backend.BACKEND,
        "versions": {"excitable": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "outputs": digests,
        "results": _plain(results),
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"{command}: wrote {len(digests) + 2} files to {directory}")
    for key in ("verdict", "matched_fraction", "max_jitter_ms", "k", "lam", "n_events"):
        if key in results:
            print(f"  {key} = {_plain(results[key])}")
    return 0


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    try:
        return run(args)
    except ConfigError as exc:
        print(f"excitable: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExcitableError as exc:
        print(f"excitable: error: {exc}", file=sys.stderr)
        return EXIT_COMPONENT
    except OSError as exc:
        print(f"excitable: file error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
