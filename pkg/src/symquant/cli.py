"""Command-line entry point.

Subcommands wire a scenario configuration to the library workflows::

    symquant abstract   --config CFG --out model.abs
    symquant synthesize --config CFG [--in model.abs] --out ctrl.txt
    symquant verify     --config CFG [--in model.abs] --out report.txt
    symquant plan       --config CFG [--in model.abs] --out plan.txt
    symquant simulate   --config CFG --in POLICY --out traj.csv
    symquant export     --config CFG [--in model.abs] --out graph.dot

Outputs are deterministic: identical configuration and seed produce
byte-identical files.  Exit codes: 0 success, 2 configuration error, 3 build
failure, 4 verification violations, 5 planning failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys as _sys
from importlib import resources

from . import abstraction, refinement, synthesis
from .config import ScenarioConfig, parse_config
from .errors import ConfigError, OutOfDomainError, PlanningError
from .quantizer import format_cell

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_BUILD = 3
EXIT_VERIFY = 4
EXIT_PLAN = 5

logger = logging.getLogger(__name__)


def _resolve_config(value: str) -> str:
    """Accept a path or the bare name of a bundled scenario."""
    if os.path.exists(value):
        return value
    if os.sep not in value:
        name = value if value.endswith(".cfg") else value + ".cfg"
        bundle = resources.files("symquant").joinpath("scenarios", name)
        if bundle.is_file():
            return str(bundle)
    raise ConfigError(f"config file {value!r} not found")


def _prepare_out(path: str) -> str:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _threads(args, cfg: ScenarioConfig) -> int:
    if args.threads is not None:
        return args.threads
    if cfg.threads is not None:
        return cfg.threads
    return os.cpu_count() or 1


def _build_or_load(args, cfg: ScenarioConfig):
    sys_ = cfg.build_system()
    if getattr(args, "infile", None):
        model = abstraction.load_abstraction(args.infile, system=sys_)
        return model, sys_
    lazy = cfg.lazy or bool(getattr(args, "lazy", False))
    model = abstraction.build_abstraction(sys_, cfg.build_lattice(),
                                          cfg.approx_config(), lazy=lazy,
                                          threads=_threads(args, cfg))
    return model, sys_


def _cmd_abstract(args, cfg: ScenarioConfig) -> int:
    model, _ = _build_or_load(args, cfg)
    model.save(_prepare_out(args.out))
    info = model.summary()
    print(f"states {info['states']} inputs {info['inputs']} "
          f"transitions {info['transitions']}")
    return EXIT_OK


def _cmd_synthesize(args, cfg: ScenarioConfig) -> int:
    model, _ = _build_or_load(args, cfg)
    safe = refinement.abstract_safe_set(cfg.safe_lo, cfg.safe_hi,
                                        model.lattice, model)
    controller = synthesis.safety_fixpoint(model, safe)
    synthesis.save_controller(controller, _prepare_out(args.out))
    lines = [
        f"states {model.n_states}",
        f"inputs {model.n_inputs}",
        f"transitions {model.transition_count()}",
        f"iterations {controller.iterations}",
        f"domain {len(controller.domain)}",
    ]
    with open(args.out + ".summary", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _cmd_verify(args, cfg: ScenarioConfig) -> int:
    model, sys_ = _build_or_load(args, cfg)
    samples = args.samples if args.samples is not None else cfg.samples
    seed = args.seed if args.seed is not None else cfg.seed
    report = refinement.check_feedback_refinement(model, sys_, samples, seed)
    summary = "\n".join(report.summary_lines())
    if args.out:
        report.write_summary(_prepare_out(args.out))
    print(summary)
    if not report.passed:
        witness_path = (args.out or "refinement") + ".violations"
        report.write_violations(_prepare_out(witness_path))
        print(f"witnesses written to {witness_path}", file=_sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_plan(args, cfg: ScenarioConfig) -> int:
    model, _ = _build_or_load(args, cfg)
    if cfg.plan_start is None or not cfg.plan_goals:
        raise ConfigError(f"{cfg.path}: [plan] start and goals are required")
    plan = synthesis.plan_reach(model, cfg.plan_start, cfg.plan_goals,
                                relaxed=cfg.plan_relaxed,
                                grid_resolution=cfg.plan_grid,
                                max_segment_steps=cfg.plan_max_steps)
    synthesis.save_plan(plan, _prepare_out(args.out))
    print(f"plan with {len(plan.steps)} entries, {plan.total_steps} steps")
    return EXIT_OK


def _cmd_simulate(args, cfg: ScenarioConfig) -> int:
    model, sys_ = _build_or_load_for_simulate(args, cfg)
    if cfg.sim_x0 is None:
        raise ConfigError(f"{cfg.path}: [simulate] x0 is required")
    if cfg.sim_policy == "controller":
        controller = synthesis.load_controller(args.infile, model.inputs)
        policy = synthesis.refine_controller(controller, model.lattice)
    else:
        policy = synthesis.load_plan(args.infile, model.inputs)
    trajectory = synthesis.simulate_closed_loop(sys_, policy, cfg.sim_x0,
                                                cfg.sim_max_steps,
                                                lattice=model.lattice)
    trajectory.write_csv(_prepare_out(args.out))
    print(f"{trajectory.steps} steps; terminated: {trajectory.terminated}")
    return EXIT_OK


def _build_or_load_for_simulate(args, cfg: ScenarioConfig):
    # simulate's --in names the policy file, so the model is always rebuilt
    # from the configuration (deterministic).
    sys_ = cfg.build_system()
    model = abstraction.build_abstraction(sys_, cfg.build_lattice(),
                                          cfg.approx_config(), lazy=True,
                                          threads=_threads(args, cfg))
    return model, sys_


def _cmd_export(args, cfg: ScenarioConfig) -> int:
    model, _ = _build_or_load(args, cfg)
    with open(_prepare_out(args.out), "w") as fh:
        fh.write("digraph abstraction {\n")
        for sid, cell in enumerate(model.cells):
            fh.write(f'  s{sid} [label="{format_cell(cell)}"];\n')
        for sid, dst, uid in model.iter_transitions():
            fh.write(f'  s{sid} -> s{dst} [label="{uid}"];\n')
        fh.write("}\n")
    print(f"wrote {model.transition_count()} edges")
    return EXIT_OK


_COMMANDS = {
    "abstract": _cmd_abstract,
    "synthesize": _cmd_synthesize,
    "verify": _cmd_verify,
    "plan": _cmd_plan,
    "simulate": _cmd_simulate,
    "export": _cmd_export,
}


_CONFIG_REFERENCE = """\
scenario file keys (section.key = default):
  system.name = pendulum        system.tau = 0.2
  system.lipschitz = <system>   system.integrator_steps = 10
  system.input_lo/_hi = <system>
  quantizer.variant = value_anchored   quantizer.eta (required, in (0,1))
  quantizer.scale (required, per axis) quantizer.state_lo/_hi (required)
  abstraction.mu (required, in (0,1))  abstraction.input_samples = 51
  abstraction.lazy = false
  synthesis.safe_lo/_hi = state box
  verify.samples = 10000        verify.seed = 0
  run.threads = hardware parallelism
  plan.start, plan.goals (cells as comma-separated levels; goals ;-separated)
  plan.relaxed = false          plan.grid_resolution = 0.02
  plan.max_segment_steps = 200
  simulate.x0, simulate.max_steps = 100, simulate.policy = controller
environment overrides: SYMQUANT_<SECTION>__<KEY>
"""


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symquant",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=_CONFIG_REFERENCE,
        description="Symbolic abstraction and safety synthesis for sampled "
                    "nonlinear systems via logarithmic quantization.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("abstract", "build the symbolic model and write it to --out"),
            ("synthesize", "synthesize a safety controller (writes summary too)"),
            ("verify", "sample-check the refinement relation"),
            ("plan", "search an input schedule for the configured goal cells"),
            ("simulate", "run the closed loop under a controller or plan file"),
            ("export", "emit the transition graph in DOT form")]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True,
                         help="scenario file, or the name of a bundled scenario")
        cmd.add_argument("--out", help="output file path")
        cmd.add_argument("--in", dest="infile",
                         help="input file (abstraction, controller or plan)")
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker threads for model building "
                              "(default: hardware parallelism)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the configured random seed")
        cmd.add_argument("--samples", type=int, default=None,
                         help="override the configured sample count")
        cmd.add_argument("--lazy", action="store_true",
                         help="build the model lazily (successors on demand)")
        cmd.add_argument("--verbose", action="store_true")
    return parser


_NEEDS_OUT = {"abstract", "synthesize", "plan", "simulate", "export"}
_NEEDS_IN = {"simulate"}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in _NEEDS_OUT and not args.out:
            raise ConfigError(f"{args.command} requires --out")
        if args.command in _NEEDS_IN and not args.infile:
            raise ConfigError(f"{args.command} requires --in")
        cfg = parse_config(_resolve_config(args.config))
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except PlanningError as exc:
        print(f"planning failed: {exc}", file=_sys.stderr)
        return EXIT_PLAN
    except (OutOfDomainError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_BUILD


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
