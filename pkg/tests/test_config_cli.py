import json

import pytest

from excitable.cli import EXIT_COMPONENT, EXIT_CONFIG, EXIT_USAGE, main
from excitable.config import PRESETS, parse_config, preset_config
from excitable.errors import ConfigError

CAPTIONS = {
    "fig3-sparse": dict(alpha=0.8, tau_s=5.0, g_s=0.3, e_s=65.0),
    "fig3-dense": dict(alpha=0.8, tau_s=5.0, g_s=0.3, e_s=65.0),
    "fig4-sparse": dict(alpha=1.0, tau_s=4.0, g_s=0.425, e_s=65.0),
    "fig4-dense": dict(alpha=1.0, tau_s=4.0, g_s=0.425, e_s=65.0),
}


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_echo_matches_caption_values(name):
    cfg = parse_config(f'preset = "{name}"')
    assert cfg.sections["synapse"] == CAPTIONS[name]
    syn = cfg.synapse()
    assert (syn.alpha, syn.tau_s, syn.g_s, syn.e_s) == tuple(CAPTIONS[name].values())
    model = cfg.model()
    assert (model.current("Na").gbar, model.current("K").gbar, model.g_leak) == (120.0, 36.0, 0.3)


def test_preset_inputs_and_protocols():
    assert preset_config("fig3-sparse").sections["input"] == {"kind": "periodic", "period": 15.0}
    assert preset_config("fig3-dense").sections["input"] == {"kind": "periodic", "period": 0.5}
    assert preset_config("fig4-dense").sections["input"] == {"kind": "periodic", "period": 0.01}
    f4 = preset_config("fig4-sparse")
    assert f4.sections["input"]["kind"] == "random_dead_time"
    ens = f4.ensemble()
    assert (ens.n_trials, ens.param_jitter, ens.t_end) == (10, 0.2, 300.0)
    assert preset_config("fig3-sparse").sections["study"]["n_initial"] == 5
    assert preset_config("fig3-sparse").t_end == 500.0


def test_user_keys_override_preset():
    cfg = parse_config('preset = "fig3-sparse"\n[input]\nperiod = 20.0\n')
    assert cfg.sections["input"] == {"kind": "periodic", "period": 20.0}
    cfg = parse_config('preset = "fig3-sparse"\n[input]\nkind = "none"\n')
    assert cfg.sections["input"] == {"kind": "none"}
    assert len(cfg.train()) == 0


def test_echo_round_trip():
    cfg = parse_config('preset = "fig4-sparse"\nseed = 3\n[detector]\ntau_e = 0.4\n')
    again = parse_config(cfg.to_toml())
    assert again.sections == cfg.sections
    assert list(again.train().times) == list(cfg.train().times)


@pytest.mark.parametrize("text,line,fragment", [
    ("seed = 1\n[synapse]\nalpha = 1.5\n", 3, "(0, 1]"),
    ("[detector]\nv_low = 60\nv_high = 50\n", 3, "v_low must lie below v_high"),
    ("[synapse]\ncolor = 1\n", 2, "unknown key"),
    ("[plot]\nx = 1\n", 1, "unknown section"),
    ("[synapse\n", 1, "malformed"),
    ('preset = "fig5"\n', 1, "unknown preset"),
    ("[input]\nkind = \"periodic\"\nrate = 0.1\n", 3, "does not apply"),
    ("[input]\nkind = \"random_dead_time\"\nrate = 0.1\n", 2, "needs dead_time"),
    ("\n\n[solver]\nmethod = \"euler\"\n", 4, "must be one of"),
    ("t_end = -5\n", 1, "positive"),
    ("[ensemble]\nparam_jitter = 0.7\n", 2, "[0, 0.5]"),
    ("initial_state = [0.0, 1.0]\n", 1, "components"),
    ('[input]\nkind = "explicit"\ntimes = [5.0, 3.0]\n', 2, "strictly increasing"),
    ("[synapse]\nalpha = true\n", 2, "(0, 1]"),
])
def test_config_errors_name_line_and_invariant(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line
    assert fragment in str(err.value)
    assert str(err.value).startswith(f"line {line}:")


def test_defaults_without_config():
    cfg = parse_config("")
    assert cfg.solver().rel_tol == 1e-8
    assert cfg.detector().v_high == 51.5
    assert cfg.sections["input"] == {"kind": "periodic", "period": 15.0}


def test_simulate_default_path(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", "--t-end", "40", "--output", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"trajectory.csv", "events.csv", "impulses.csv", "voltage.svg", "config.toml", "manifest.json"} <= names
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,s,x1,x2,x3,v"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["results"]["n_events"] == 2
    assert (out / "voltage.svg").read_text().startswith("<svg")


def test_manifest_replay_is_byte_identical(tmp_path):
    out = tmp_path / "pair"
    assert main(["pair", "--t-end", "60", "--seed", "4", "--output", str(out)]) == 0
    assert main(["replay", str(out / "manifest.json")]) == 0
    for name in ("divergence.csv", "voltages.csv"):
        assert (out / name).read_bytes() == (out / "replay" / name).read_bytes()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["config"]["seed"] == 4


def test_ensemble_threads_do_not_change_files(tmp_path):
    cfg = tmp_path / "e.toml"
    cfg.write_text('preset = "fig4-sparse"\nt_end = 120.0\n[ensemble]\nn_trials = 3\n')
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["ensemble", "--config", str(cfg), "--output", str(a)]) == 0
    assert main(["ensemble", "--config", str(cfg), "--threads", "3", "--output", str(b)]) == 0
    for name in ("raster.csv", "rates.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_synapse_sweep_and_env_output(tmp_path, monkeypatch):
    monkeypatch.setenv("EXCITABLE_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["synapse"]) == 0
    rows = (tmp_path / "env" / "synapse.csv").read_text().splitlines()
    assert rows[0].startswith("period,")
    assert len(rows) == 7


def test_tolerance_flag_reaches_solver(tmp_path):
    out = tmp_path / "tol"
    assert main(["simulate", "--t-end", "5", "--tolerance", "1e-6", "--output", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["solver"]["rel_tol"] == 1e-6


def test_exit_codes(tmp_path, capsys):
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["simulate", "--bogus"]) == EXIT_USAGE
    assert main(["--help"]) == 0
    bad = tmp_path / "bad.toml"
    bad.write_text("[synapse]\nalpha = 1.5\n")
    assert main(["simulate", "--config", str(bad), "--output", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    budget = tmp_path / "budget.toml"
    budget.write_text("t_end = 20\n[solver]\nmax_steps = 10\n")
    assert main(["simulate", "--config", str(budget), "--output", str(tmp_path / "y")]) == EXIT_COMPONENT
    assert "at t=" in capsys.readouterr().err
