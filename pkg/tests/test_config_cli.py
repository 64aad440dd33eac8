"""Scenario parsing, environment overrides, CLI workflows and exit codes."""

import os

import numpy as np
import pytest

import symquant as sq
from symquant import cli
from symquant.config import parse_config
from symquant.errors import ConfigError

BUNDLED = os.path.join(os.path.dirname(sq.__file__), "scenarios",
                       "pendulum.cfg")


def test_parse_bundled_scenario():
    cfg = parse_config(BUNDLED)
    assert cfg.system_name == "pendulum"
    assert cfg.tau == 0.2 and cfg.lipschitz == 6.0
    assert cfg.eta == 0.2 and cfg.scale == (0.4, 0.4)
    assert cfg.variant == sq.QuantizerVariant.EDGE_ANCHORED
    assert cfg.mu == 0.002 and cfg.input_samples == 51
    assert cfg.state_lo == (-1.0, -1.0) and cfg.state_hi == (1.0, 1.0)
    assert cfg.samples == 10000 and cfg.seed == 0
    assert cfg.plan_start == (-1, 0)
    assert cfg.plan_goals == ((0, 0), (-1, 0))
    system = cfg.build_system()
    assert system.name == "pendulum" and system.tau == 0.2
    lattice = cfg.build_lattice()
    assert len(lattice.enumerate_cells()) == 25


def test_env_override(monkeypatch):
    monkeypatch.setenv("SYMQUANT_VERIFY__SAMPLES", "7")
    monkeypatch.setenv("SYMQUANT_ABSTRACTION__INPUT_SAMPLES", "11")
    cfg = parse_config(BUNDLED)
    assert cfg.samples == 7
    assert cfg.input_samples == 11


def test_config_errors_cite_location(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[quantizer]\neta = 1.7\nscale = 0.4\n"
                   "state_lo = -1\nstate_hi = 1\n[abstraction]\nmu = 0.002\n")
    with pytest.raises(ConfigError) as info:
        parse_config(bad)
    assert "bad.cfg:2" in str(info.value)

    missing = tmp_path / "missing.cfg"
    missing.write_text("[quantizer]\nscale = 0.4\n")
    with pytest.raises(ConfigError):
        parse_config(missing)

    malformed = tmp_path / "malformed.cfg"
    malformed.write_text("[system]\njust a stray line\n")
    with pytest.raises(ConfigError) as info:
        parse_config(malformed)
    assert "malformed.cfg:2" in str(info.value)


def _fast_cfg(tmp_path, **overrides):
    """A small, fast variant of the bundled scenario."""
    values = {
        "tau": 0.2,
        "samples": 300,
        "input_samples": 21,
        "max_steps": 150,
        "policy": "plan",
        "goals": "0,0 ; -1,0",
        "relaxed": "true",
    }
    values.update(overrides)
    path = tmp_path / "scenario.cfg"
    path.write_text(f"""
[system]
name = pendulum
tau = {values['tau']}
lipschitz = 6
integrator_steps = 10

[quantizer]
variant = edge_anchored
eta = 0.2
scale = 0.4 0.4
state_lo = -1 -1
state_hi = 1 1

[abstraction]
mu = 0.002
input_samples = {values['input_samples']}

[verify]
samples = {values['samples']}
seed = 0

[plan]
start = -1,0
goals = {values['goals']}
relaxed = {values['relaxed']}

[simulate]
x0 = -0.48 0
max_steps = {values['max_steps']}
policy = {values['policy']}
""")
    return str(path)


def test_cli_abstract_deterministic(tmp_path):
    cfg = _fast_cfg(tmp_path)
    out1 = tmp_path / "m1.abs"
    out2 = tmp_path / "m2.abs"
    assert cli.main(["abstract", "--config", cfg, "--out", str(out1)]) == 0
    assert cli.main(["abstract", "--config", cfg, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    model = sq.load_abstraction(out1)
    assert model.n_states == 25


def test_cli_bundled_scenario_by_name(tmp_path, monkeypatch):
    # bare scenario names resolve against the packaged scenarios
    monkeypatch.setenv("SYMQUANT_ABSTRACTION__INPUT_SAMPLES", "5")
    out = tmp_path / "m.abs"
    assert cli.main(["abstract", "--config", "pendulum",
                     "--out", str(out)]) == 0
    assert out.exists()


def test_cli_synthesize_summary(tmp_path):
    cfg = _fast_cfg(tmp_path)
    out = tmp_path / "ctrl.txt"
    assert cli.main(["synthesize", "--config", cfg, "--out", str(out)]) == 0
    summary = (tmp_path / "ctrl.txt.summary").read_text().splitlines()
    entries = dict(line.split() for line in summary)
    assert entries["states"] == "25"
    assert entries["domain"] == "0"  # the coarse safety game is lost
    assert int(entries["transitions"]) > 0
    assert out.read_text().startswith("#controller 1")


def test_cli_verify_pass_and_report(tmp_path):
    cfg = _fast_cfg(tmp_path)
    out = tmp_path / "report.txt"
    code = cli.main(["verify", "--config", cfg, "--out", str(out),
                     "--samples", "200"])
    assert code == 0
    assert "result: PASS" in out.read_text()


def test_cli_verify_detects_violations(tmp_path):
    # short sampling period breaks the deadzone coverage; exit code 4 plus a
    # witness file
    cfg = _fast_cfg(tmp_path, tau=0.05)
    out = tmp_path / "report.txt"
    code = cli.main(["verify", "--config", cfg, "--out", str(out),
                     "--samples", "2000"])
    assert code == cli.EXIT_VERIFY
    witness_lines = (tmp_path / "report.txt.violations").read_text().splitlines()
    assert witness_lines


def test_cli_plan_simulate_roundtrip(tmp_path):
    cfg = _fast_cfg(tmp_path)
    plan_path = tmp_path / "plan.txt"
    assert cli.main(["plan", "--config", cfg, "--out", str(plan_path)]) == 0
    csv_path = tmp_path / "run.csv"
    assert cli.main(["simulate", "--config", cfg, "--in", str(plan_path),
                     "--out", str(csv_path)]) == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "t,x1,x2,u1"
    assert len(lines) >= 3
    # trajectory starts at the configured x0
    first = lines[1].split(",")
    assert float(first[1]) == -0.48 and float(first[2]) == 0.0


def test_cli_simulate_zero_steps(tmp_path, monkeypatch):
    cfg = _fast_cfg(tmp_path)
    plan_path = tmp_path / "plan.txt"
    assert cli.main(["plan", "--config", cfg, "--out", str(plan_path)]) == 0
    monkeypatch.setenv("SYMQUANT_SIMULATE__MAX_STEPS", "0")
    csv_path = tmp_path / "zero.csv"
    assert cli.main(["simulate", "--config", cfg, "--in", str(plan_path),
                     "--out", str(csv_path)]) == 0
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 2  # header plus the initial state row


def test_cli_plan_failure_exit_code(tmp_path):
    cfg = _fast_cfg(tmp_path, relaxed="false")
    code = cli.main(["plan", "--config", cfg, "--out",
                     str(tmp_path / "plan.txt")])
    assert code == cli.EXIT_PLAN


def test_cli_export_roundtrips_transition_count(tmp_path):
    cfg = _fast_cfg(tmp_path)
    model_path = tmp_path / "m.abs"
    assert cli.main(["abstract", "--config", cfg, "--out", str(model_path)]) == 0
    dot_path = tmp_path / "g.dot"
    assert cli.main(["export", "--config", cfg, "--in", str(model_path),
                     "--out", str(dot_path)]) == 0
    model = sq.load_abstraction(model_path)
    edges = [line for line in dot_path.read_text().splitlines()
             if "->" in line]
    assert len(edges) == model.transition_count()


def test_cli_config_error_exit_code(tmp_path):
    assert cli.main(["abstract", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path / "m.abs")]) == cli.EXIT_CONFIG
    cfg = _fast_cfg(tmp_path)
    assert cli.main(["abstract", "--config", cfg]) == cli.EXIT_CONFIG  # no --out


def _contracting_cfg(tmp_path):
    # a user-defined system selected by name via the registration hook
    def field(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        return np.stack([-x[..., 0] + u[..., 0], -x[..., 1] + u[..., 0]],
                        axis=-1)

    def factory(tau=0.5, integrator_steps=10):
        return sq.SampledSystem(dim_x=2, dim_u=1, field=field, lipschitz=1.0,
                                tau=tau, input_lo=(-1.0,), input_hi=(1.0,),
                                integrator_steps=integrator_steps,
                                vectorized=True, name="contracting")

    sq.register_system("contracting", factory)
    path = tmp_path / "contracting.cfg"
    path.write_text("""
[system]
name = contracting
tau = 0.5
lipschitz = 1

[quantizer]
variant = edge_anchored
eta = 0.2
scale = 0.4 0.4
state_lo = -1 -1
state_hi = 1 1

[abstraction]
mu = 0.002
input_samples = 21

[synthesis]
safe_lo = -0.7 -0.7
safe_hi = 0.7 0.7

[simulate]
x0 = 0.1 -0.2
max_steps = 40
policy = controller
""")
    return str(path)


def test_cli_simulate_controller_mode(tmp_path):
    cfg = _contracting_cfg(tmp_path)
    ctrl_path = tmp_path / "ctrl.txt"
    assert cli.main(["synthesize", "--config", cfg,
                     "--out", str(ctrl_path)]) == 0
    summary = dict(line.split() for line in
                   (tmp_path / "ctrl.txt.summary").read_text().splitlines())
    assert summary["domain"] == "9"
    csv_path = tmp_path / "loop.csv"
    assert cli.main(["simulate", "--config", cfg, "--in", str(ctrl_path),
                     "--out", str(csv_path)]) == 0
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 42  # header + initial state + 40 steps
    # the loop never leaves the safe box
    for line in lines[1:]:
        _, x1, x2 = line.split(",")[:3]
        assert abs(float(x1)) <= 0.7 and abs(float(x2)) <= 0.7
