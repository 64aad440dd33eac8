"""Quantizer-induced refinement checks and abstract safe sets.

The relation between concrete states and abstract cells is the quantizer
itself: a state is related to exactly the cell containing it.  Under that
relation the symbolic model refines the sampled system, which makes any
controller synthesized on the model valid for the concrete system once
composed with the quantizer.

The concrete state set is uncountable, so the refinement conditions are
checked here by dense seeded sampling rather than proved: samples are drawn
uniformly per cell (avoiding volume bias toward large outer cells), pushed
through one sampling period, and their quantized successors are required to
lie in the stored abstract successor sets.  A violation is a regression
witness (it indicates an integrator or growth-bound breach) and is recorded
with everything needed to replay it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .abstraction import SymbolicModel
from .dynamics import SampledSystem, successor_many
from .errors import ConfigError, OutOfDomainError
from .quantizer import LogLattice, format_cell

__all__ = [
    "relate",
    "RefinementWitness",
    "RefinementReport",
    "check_feedback_refinement",
    "AbstractSafeSet",
    "abstract_safe_set",
]

logger = logging.getLogger(__name__)


def relate(x, lattice: LogLattice) -> tuple[int, ...]:
    """The unique cell related to a concrete state (the quantizer map)."""
    return lattice.quantize(x)


@dataclass(frozen=True, eq=False)
class RefinementWitness:
    """One replayable containment failure."""

    x: np.ndarray                      # sampled concrete state
    u: np.ndarray                      # applied input vector
    source: tuple[int, ...]            # cell the state was drawn from
    input_index: int
    observed: tuple[int, ...] | None   # successor's cell, None if it left bounds
    expected: tuple[tuple[int, ...], ...]

    def format_line(self) -> str:
        obs = format_cell(self.observed) if self.observed is not None else "out"
        exp = ";".join(format_cell(c) for c in self.expected)
        return " ".join([
            " ".join(repr(float(v)) for v in self.x),
            " ".join(repr(float(v)) for v in self.u),
            obs, exp,
        ])


@dataclass
class RefinementReport:
    samples_tested: int
    violations: list[RefinementWitness] = field(default_factory=list)
    condition1_failures: list[tuple[tuple[int, ...], int]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.condition1_failures

    def summary_lines(self) -> list[str]:
        lines = [
            f"samples tested: {self.samples_tested}",
            f"containment violations: {len(self.violations)}",
            f"enabled-input box failures: {len(self.condition1_failures)}",
            "result: " + ("PASS" if self.passed else "FAIL"),
        ]
        return lines

    def write_summary(self, path):
        with open(path, "w") as fh:
            fh.write("\n".join(self.summary_lines()) + "\n")

    def write_violations(self, path):
        with open(path, "w") as fh:
            for witness in self.violations:
                fh.write(witness.format_line() + "\n")


def check_feedback_refinement(model: SymbolicModel, sys: SampledSystem,
                              sample_count: int, seed: int) -> RefinementReport:
    """Sample-based refinement check of a model against its system.

    Draws ``sample_count`` pairs (x uniform in a uniformly chosen non-blocking
    cell, input uniform over the cell's enabled inputs), integrates one
    period, and records a violation whenever the quantized successor is not
    among the stored abstract successors (or leaves the bounds box).  Also
    asserts that every applied input lies in the input box.  Deterministic
    given the seed; violations are sorted before they are returned.
    """
    if model.lattice is None:
        raise ConfigError("model has no lattice geometry")
    if model.tau != sys.tau or model.lipschitz != sys.lipschitz:
        raise ConfigError(
            f"model built for tau={model.tau}, L={model.lipschitz}; "
            f"system has tau={sys.tau}, L={sys.lipschitz}")
    if sys.dim_x != model.lattice.dim:
        raise ConfigError("system and lattice dimensions differ")

    report = RefinementReport(samples_tested=0)
    if sample_count == 0:
        logger.warning("refinement check invoked with zero samples; "
                       "vacuously passing")
        return report

    lattice = model.lattice
    nonblocking = [sid for sid in range(model.n_states)
                   if model.enabled_ids(sid)]
    if not nonblocking:
        logger.warning("every cell is blocking; nothing to sample")
        return report

    rng = np.random.default_rng(seed)
    boxes = [lattice.cell_box(model.cells[sid]) for sid in nonblocking]
    input_lo = np.array(sys.input_lo)
    input_hi = np.array(sys.input_hi)

    picks = rng.integers(len(nonblocking), size=sample_count)
    lo = np.stack([boxes[p].lo for p in picks])
    hi = np.stack([boxes[p].hi for p in picks])
    xs = rng.uniform(lo, hi)
    uids = np.empty(sample_count, int)
    for k in range(sample_count):
        enabled = model.enabled_ids(nonblocking[picks[k]])
        uids[k] = enabled[rng.integers(len(enabled))]
    us = model.inputs[uids]

    succ = successor_many(sys, xs, us)

    violations = []
    for k in range(sample_count):
        sid = nonblocking[picks[k]]
        cell = model.cells[sid]
        uid = int(uids[k])
        if not ((us[k] >= input_lo).all() and (us[k] <= input_hi).all()):
            report.condition1_failures.append((cell, uid))
        expected = model.successor_ids(sid, uid)
        observed: tuple[int, ...] | None
        try:
            observed = relate(succ[k], lattice)
        except (OutOfDomainError, ValueError):
            observed = None
        if observed is None or model.state_id(observed) not in expected:
            violations.append(RefinementWitness(
                x=xs[k].copy(), u=us[k].copy(), source=cell, input_index=uid,
                observed=observed,
                expected=tuple(model.cells[t] for t in expected)))

    violations.sort(key=lambda w: (w.source, w.input_index, tuple(w.x)))
    report.samples_tested = sample_count
    report.violations = violations
    return report


@dataclass(frozen=True)
class AbstractSafeSet:
    """Cells entirely inside a concrete safe box, plus their enabled inputs."""

    cells: tuple[tuple[int, ...], ...]
    inputs: tuple[int, ...]

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self._cell_set

    def __post_init__(self):
        object.__setattr__(self, "_cell_set", frozenset(self.cells))


def abstract_safe_set(safe_lo, safe_hi, lattice: LogLattice,
                      model: SymbolicModel) -> AbstractSafeSet:
    """Under-approximate a concrete safe box by whole cells.

    A cell qualifies only when its closure is contained in the box, so every
    concrete state related to a qualifying cell is safe.  The input component
    is the union of enabled inputs over the qualifying cells.  An empty
    result is legal.
    """
    safe_lo = np.atleast_1d(np.asarray(safe_lo, float))
    safe_hi = np.atleast_1d(np.asarray(safe_hi, float))
    if safe_lo.shape != (lattice.dim,) or safe_hi.shape != (lattice.dim,):
        raise ValueError("safe box dimension does not match the lattice")
    cells = []
    inputs: set[int] = set()
    for cell in model.cells:
        box = lattice.cell_box(cell)
        if (box.lo >= safe_lo).all() and (box.hi <= safe_hi).all():
            cells.append(cell)
            inputs.update(model.enabled_inputs(cell))
    return AbstractSafeSet(cells=tuple(cells), inputs=tuple(sorted(inputs)))
