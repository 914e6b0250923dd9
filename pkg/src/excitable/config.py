"""Experiment configuration: TOML schema, presets and validation.

Every key is checked against a fixed schema; unknown keys are rejected and
each error names the offending line of the source text.
"""

from __future__ import annotations

import copy
import math
import re
import sys
from dataclasses import dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .detect import DetectorConfig, default_detector
from .errors import ConfigError, ExcitableError
from .integrate import SolverSettings
from .model import NeuronModel, compact_set, hodgkin_huxley
from .reliability import JITTERABLE, EnsembleConfig
from .synapse import ImpulseTrain, SynapseParams, generate_train

__all__ = ["PRESETS", "ExperimentConfig", "parse_config", "load_config", "preset_config"]


def _num(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _positive(v):
    return None if _num(v) and v > 0 and math.isfinite(v) else "must be a positive number"


def _nonneg(v):
    return None if _num(v) and v >= 0 and math.isfinite(v) else "must be a non-negative number"


def _finite(v):
    return None if _num(v) and math.isfinite(v) else "must be a finite number"


def _count(low):
    def check(v):
        return None if _int(v) and v >= low else f"must be an integer >= {low}"
    return check


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(map(repr, options))}"
    return check


def _alpha(v):
    return None if _num(v) and 0 < v <= 1 else "must lie in (0, 1] (jump fraction)"


def _jitter(v):
    return None if _num(v) and 0 <= v <= 0.5 else "must lie in [0, 0.5]"


def _number_list(v):
    if isinstance(v, list) and all(_num(x) and math.isfinite(x) for x in v):
        return None
    return "must be a list of finite numbers"


def _positive_list(v):
    if isinstance(v, list) and v and all(_num(x) and x > 0 for x in v):
        return None
    return "must be a non-empty list of positive numbers"


def _jitter_names(v):
    if isinstance(v, list) and all(isinstance(x, str) and x in JITTERABLE for x in v):
        return None
    return f"must be a list drawn from {', '.join(JITTERABLE)}"


def _string(v):
    return None if isinstance(v, str) and v else "must be a non-empty string"


SCHEMA: dict[str, dict] = {
    "": {
        "preset": _string,
        "seed": _count(0),
        "t_end": _positive,
        "output": _string,
        "initial_state": _number_list,
    },
    "model": {
        "capacitance": _positive,
        "g_na": _positive,
        "g_k": _positive,
        "g_leak": _positive,
        "e_na": _finite,
        "e_k": _finite,
    },
    "synapse": {
        "alpha": _alpha,
        "tau_s": _positive,
        "g_s": _nonneg,
        "e_s": _finite,
    },
    "input": {
        "kind": _choice("periodic", "random_dead_time", "explicit", "none"),
        "period": _positive,
        "t_start": _nonneg,
        "rate": _positive,
        "dead_time": _nonneg,
        "seed": _count(0),
        "times": _number_list,
    },
    "solver": {
        "method": _choice("dopri5", "rk4"),
        "rel_tol": _positive,
        "abs_tol": _positive,
        "max_step": _positive,
        "output_dt": _positive,
        "max_steps": _count(1),
    },
    "detector": {
        "v_low": _positive,
        "v_high": _positive,
        "tau_e": _positive,
    },
    "ensemble": {
        "n_trials": _count(2),
        "ic_sampling": _choice("uniform", "ball", "rest"),
        "ic_radius": _positive,
        "param_jitter": _jitter,
        "jitter_params": _jitter_names,
        "transient_cut": _nonneg,
        "match_window": _positive,
    },
    "study": {
        "n_initial": _count(2),
        "n_pairs": _count(10),
        "trailing_window": _positive,
        "amplitude": _positive,
        "fit_start": _nonneg,
        "fit_end": _positive,
        "periods": _positive_list,
    },
}

_INPUT_KEYS = {
    "periodic": {"period", "t_start"},
    "random_dead_time": {"rate", "dead_time", "seed", "t_start"},
    "explicit": {"times"},
    "none": set(),
}

DEFAULTS: dict[str, dict] = {
    "": {"seed": 0, "t_end": 500.0},
    "model": {"capacitance": 1.0, "g_na": 120.0, "g_k": 36.0, "g_leak": 0.3, "e_na": 115.0, "e_k": -12.0},
    "synapse": {"alpha": 0.8, "tau_s": 5.0, "g_s": 0.3, "e_s": 65.0},
    "input": {"kind": "periodic", "period": 15.0},
    "solver": {"method": "dopri5", "rel_tol": 1e-8, "abs_tol": 1e-10, "max_step": 0.1,
               "output_dt": 0.01, "max_steps": 50_000_000},
    "detector": {"v_low": 20.0, "tau_e": 0.5},
    "ensemble": {"n_trials": 10, "ic_sampling": "uniform", "ic_radius": 1.0, "param_jitter": 0.2,
                 "jitter_params": list(JITTERABLE), "transient_cut": 50.0},
    "study": {"n_initial": 5, "n_pairs": 20, "trailing_window": 50.0, "amplitude": 100.0,
              "periods": [0.01, 0.1, 0.5, 1.0, 5.0, 15.0]},
}

_FIG3_SYNAPSE = {"alpha": 0.8, "tau_s": 5.0, "g_s": 0.3, "e_s": 65.0}
_FIG4_SYNAPSE = {"alpha": 1.0, "tau_s": 4.0, "g_s": 0.425, "e_s": 65.0}

PRESETS: dict[str, dict] = {
    "fig3-sparse": {
        "": {"t_end": 500.0},
        "synapse": _FIG3_SYNAPSE,
        "input": {"kind": "periodic", "period": 15.0},
        "study": {"n_initial": 5},
    },
    "fig3-dense": {
        "": {"t_end": 500.0},
        "synapse": _FIG3_SYNAPSE,
        "input": {"kind": "periodic", "period": 0.5},
        "study": {"n_initial": 5},
    },
    "fig4-sparse": {
        "": {"t_end": 300.0},
        "synapse": _FIG4_SYNAPSE,
        "input": {"kind": "random_dead_time", "rate": 0.02, "dead_time": 20.0},
        "ensemble": {"n_trials": 10, "param_jitter": 0.2},
    },
    "fig4-dense": {
        "": {"t_end": 300.0},
        "synapse": _FIG4_SYNAPSE,
        "input": {"kind": "periodic", "period": 0.01},
        "ensemble": {"n_trials": 10, "param_jitter": 0.2},
    },
}

_HEADER = re.compile(r"^\s*\[\s*([A-Za-z0-9_\-]+)\s*\]\s*(#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")
_TOML_LINE = re.compile(r"line (\d+)")


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Map ``(section, key)`` and ``(section, "")`` to 1-based source lines."""
    lines: dict[tuple[str, str], int] = {}
    section = ""
    for n, raw in enumerate(text.splitlines(), start=1):
        head = _HEADER.match(raw)
        if head:
            section = head.group(1)
            lines.setdefault((section, ""), n)
            continue
        key = _KEY.match(raw)
        if key:
            lines.setdefault((section, key.group(1)), n)
    return lines


@dataclass
class ExperimentConfig:
    """Fully resolved configuration; ``sections`` mirrors the TOML layout."""

    sections: dict

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    @property
    def seed(self) -> int:
        return int(self.sections[""]["seed"])

    @property
    def t_end(self) -> float:
        return float(self.sections[""]["t_end"])

    @property
    def output(self) -> str | None:
        return self.sections[""].get("output")

    def model(self) -> NeuronModel:
        return hodgkin_huxley(**self.sections["model"])

    def synapse(self) -> SynapseParams:
        return SynapseParams(**self.sections["synapse"])

    def train(self) -> ImpulseTrain:
        params = dict(self.sections["input"])
        kind = params.pop("kind")
        if kind == "periodic":
            params["horizon"] = self.t_end
        elif kind == "random_dead_time":
            params["horizon"] = self.t_end
            params.setdefault("seed", self.seed)
        return generate_train(kind, **params)

    def solver(self) -> SolverSettings:
        return SolverSettings(**self.sections["solver"])

    def detector(self) -> DetectorConfig:
        d = self.sections["detector"]
        if "v_high" in d:
            return DetectorConfig(d["v_low"], d["v_high"], d["tau_e"])
        box = compact_set(self.model(), self.synapse())
        return default_detector(box.e_min, box.e_max, d["v_low"], d["tau_e"])

    def ensemble(self, train: ImpulseTrain | None = None) -> EnsembleConfig:
        e = dict(self.sections["ensemble"])
        e["jitter_params"] = tuple(e["jitter_params"])
        return EnsembleConfig(train=self.train() if train is None else train, t_end=self.t_end,
                              seed=self.seed, **e)

    def initial_state(self) -> np.ndarray | None:
        z = self.sections[""].get("initial_state")
        return None if z is None else np.asarray(z, dtype=float)

    def with_overrides(self, **top) -> "ExperimentConfig":
        sections = copy.deepcopy(self.sections)
        for key, value in top.items():
            if "." in key:
                section, name = key.split(".", 1)
                sections.setdefault(section, {})[name] = value
            else:
                sections[""][key] = value
        return validate(sections, {})

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.sections[""].items()}
        for section, values in self.sections.items():
            if section and values:
                out[section] = dict(values)
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


def _check_section(section: str, values: dict, lines) -> None:
    schema = SCHEMA[section]
    for key, value in values.items():
        line = lines.get((section, key), lines.get((section, "")))
        where = f"[{section}] {key}" if section else key
        if key not in schema:
            raise ConfigError(f"unknown key {where!r}", line)
        problem = schema[key](value)
        if problem:
            raise ConfigError(f"{where} {problem}, got {value!r}", line)


def _split(doc: dict, lines) -> dict[str, dict]:
    sections: dict[str, dict] = {"": {}}
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in SCHEMA or key == "":
                raise ConfigError(f"unknown section [{key}]", lines.get((key, "")))
            sections[key] = dict(value)
        else:
            sections[""][key] = value
    return sections


def validate(user: dict[str, dict], lines) -> ExperimentConfig:
    for section, values in user.items():
        _check_section(section, values, lines)

    base = copy.deepcopy(DEFAULTS)
    preset = user.get("", {}).get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}",
                              lines.get(("", "preset")))
        for section, values in PRESETS[preset].items():
            if section == "input":
                base["input"] = {}
            base[section].update(copy.deepcopy(values))
    user_input = user.get("input", {})
    if "kind" in user_input and user_input["kind"] != base["input"].get("kind"):
        base["input"] = {}
    for section, values in user.items():
        base.setdefault(section, {}).update(copy.deepcopy(values))

    def line_of(section, *keys):
        for key in keys:
            if (section, key) in lines:
                return lines[(section, key)]
        return lines.get((section, ""))

    inp = base["input"]
    kind = inp.get("kind", "periodic")
    inp["kind"] = kind
    for key in inp:
        if key != "kind" and key not in _INPUT_KEYS[kind]:
            raise ConfigError(f"[input] {key} does not apply to input kind {kind!r}", line_of("input", key))
    required = {"periodic": ("period",), "random_dead_time": ("rate", "dead_time"), "explicit": ("times",),
                "none": ()}[kind]
    for key in required:
        if key not in inp:
            raise ConfigError(f"[input] kind {kind!r} needs {key}", line_of("input", "kind"))

    m = base["model"]
    if not m["e_k"] < m["e_na"]:
        raise ConfigError("[model] e_k must lie below e_na", line_of("model", "e_k", "e_na"))
    d = base["detector"]
    if "v_high" in d and not d["v_low"] < d["v_high"]:
        raise ConfigError(f"[detector] v_low must lie below v_high, got v_low={d['v_low']}, "
                          f"v_high={d['v_high']}", line_of("detector", "v_high", "v_low"))
    st = base["study"]
    if "fit_start" in st or "fit_end" in st:
        if not ("fit_start" in st and "fit_end" in st and st["fit_start"] < st["fit_end"]):
            raise ConfigError("[study] fit_start and fit_end must both be set with fit_start < fit_end",
                              line_of("study", "fit_end", "fit_start"))

    cfg = ExperimentConfig(base)
    z = cfg.initial_state()
    section = ""
    try:
        section = "model"
        model = cfg.model()
        if z is not None and z.size != model.dim:
            raise ConfigError(f"initial_state needs {model.dim} components, got {z.size}",
                              line_of("", "initial_state"))
        section = "synapse"
        cfg.synapse()
        section = "input"
        train = cfg.train()
        if len(train) and train.times[-1] >= cfg.t_end:
            raise ConfigError("[input] impulse times must lie before t_end", line_of("input", "times", "kind"))
        section = "solver"
        cfg.solver()
        section = "detector"
        d["v_high"] = cfg.detector().v_high
        section = "ensemble"
        cfg.ensemble(train)
    except ConfigError:
        raise
    except (ExcitableError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}", line_of(section, *user.get(section, {}))) from exc
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate TOML text; missing keys take documented defaults."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _TOML_LINE.search(str(exc))
        raise ConfigError(f"malformed TOML: {exc}", int(match.group(1)) if match else None) from exc
    lines = _key_lines(text)
    return validate(_split(doc, lines), lines)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", None) from exc
    return parse_config(text)


def preset_config(name: str) -> ExperimentConfig:
    return parse_config(f'preset = "{name}"\n')
