"""Safety controller synthesis, controller refinement, planning, simulation.

Safety synthesis iterates the controllable-predecessor operator inside the
abstract safe set until the greatest fixed point is reached:

    W_0 = safe cells,   W_{i+1} = cpre(W_i) ∩ W_0.

``cpre`` quantifies over enabled inputs only, so blocking cells can never
enter the result; the returned controller maps each domain cell to every
enabled input whose successors stay inside the domain, which makes the
controlled abstraction non-blocking and invariant by construction.

The abstract controller refines to a concrete one by composing with the
quantizer: query a state's cell, return that cell's admissible inputs.  Two
states in one cell always receive identical answers.

Planning works on the abstract graph.  The default mode uses only
transitions with singleton successor sets (executable open loop on the
abstraction) and fails if no such path exists.  The relaxed mode instead
searches the deterministic nominal rollout of the sampled dynamics under the
model's input set, restricted to the lattice bounds, deduplicating visited
states on a fine grid; its plans replay exactly in closed loop from the same
start state but carry no abstraction-level guarantee, so they are meant to be
validated by simulation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .abstraction import SymbolicModel
from .dynamics import SampledSystem, Trajectory, successor, successor_many
from .errors import OutOfDomainError, PlanningError
from .quantizer import LogLattice, format_cell, parse_cell
from .refinement import AbstractSafeSet

__all__ = [
    "SafetyController",
    "ConcreteController",
    "Plan",
    "cpre",
    "safety_fixpoint",
    "refine_controller",
    "plan_reach",
    "simulate_closed_loop",
    "save_controller",
    "load_controller",
    "save_plan",
    "load_plan",
]

logger = logging.getLogger(__name__)


def cpre(model: SymbolicModel, target) -> set[tuple[int, ...]]:
    """Controllable predecessor: cells from which some enabled input forces
    every successor into ``target``.  Blocking cells are never members."""
    target_ids = {model.state_id(c) for c in target}
    out = set()
    for sid in range(model.n_states):
        for uid in model.enabled_ids(sid):
            succ = model.successor_ids(sid, uid)
            if succ and all(t in target_ids for t in succ):
                out.add(model.cells[sid])
                break
    return out


@dataclass(frozen=True, eq=False)
class SafetyController:
    """Maximal safety controller on the abstraction.

    ``domain`` is the greatest controlled-invariant subset of the safe cells;
    ``admissible`` maps each domain cell to the (nonempty, sorted) input
    indices whose successors stay inside the domain.  ``iterations`` is the
    number of fixed-point sweeps performed, ``history`` the sweep sizes
    starting from the safe set itself.
    """

    domain: tuple[tuple[int, ...], ...]
    admissible: dict[tuple[int, ...], tuple[int, ...]]
    inputs: np.ndarray
    iterations: int
    history: tuple[int, ...]
    safe_cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        arr = np.asarray(self.inputs, float)
        arr.setflags(write=False)
        object.__setattr__(self, "inputs", arr)

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self.admissible


def safety_fixpoint(model: SymbolicModel, safe: AbstractSafeSet) -> SafetyController:
    """Greatest fixed point of the safety game on the model.

    An empty domain is a legal outcome (the safe set is not controllable at
    this coarseness), not an error.  Lazy models compute transitions on
    demand inside the sweep, so only cells touched by the iteration are ever
    expanded.
    """
    safe_ids = []
    for cell in safe.cells:
        safe_ids.append(model.state_id(cell))  # raises on foreign cells
    safe_ids = sorted(set(safe_ids))

    current = set(safe_ids)
    history = [len(current)]
    iterations = 0
    while True:
        iterations += 1
        nxt = set()
        for sid in safe_ids:
            for uid in model.enabled_ids(sid):
                succ = model.successor_ids(sid, uid)
                if succ and all(t in current for t in succ):
                    nxt.add(sid)
                    break
        history.append(len(nxt))
        if nxt == current:
            break
        current = nxt
        if iterations > model.n_states + 1:  # pragma: no cover - safety net
            raise RuntimeError("fixed point failed to stabilize")

    admissible = {}
    for sid in sorted(current):
        good = tuple(uid for uid in model.enabled_ids(sid)
                     if set(model.successor_ids(sid, uid)) <= current)
        admissible[model.cells[sid]] = good
    domain = tuple(model.cells[sid] for sid in sorted(current))
    return SafetyController(domain=domain, admissible=admissible,
                            inputs=model.inputs, iterations=iterations,
                            history=tuple(history), safe_cells=safe.cells)


class ConcreteController:
    """Quantizer composition of an abstract safety controller.

    ``query(x)`` returns the admissible input indices of the cell containing
    x, or an empty tuple when x is outside the bounds box or outside the
    controller domain (check ``in_domain`` to distinguish).  Constant on each
    cell by construction.
    """

    def __init__(self, controller: SafetyController, lattice: LogLattice):
        self.controller = controller
        self.lattice = lattice

    def query(self, x) -> tuple[int, ...]:
        try:
            cell = self.lattice.quantize(x)
        except (OutOfDomainError, ValueError):
            return ()
        return self.controller.admissible.get(cell, ())

    def in_domain(self, x) -> bool:
        return bool(self.query(x))

    def input_vector(self, index: int) -> np.ndarray:
        return self.controller.inputs[index]


def refine_controller(ctrl: SafetyController, lattice: LogLattice) -> ConcreteController:
    """Concrete-state controller obtained by composing with the quantizer."""
    return ConcreteController(ctrl, lattice)


@dataclass(frozen=True, eq=False)
class Plan:
    """Open-loop input schedule: (input index, hold steps) entries."""

    steps: tuple[tuple[int, int], ...]
    inputs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.inputs, float)
        arr.setflags(write=False)
        object.__setattr__(self, "inputs", arr)
        for uid, hold in self.steps:
            if hold < 1:
                raise ValueError("hold counts must be positive")
            if not (0 <= uid < len(arr)):
                raise ValueError(f"input index {uid} out of range")

    @property
    def total_steps(self) -> int:
        return sum(hold for _, hold in self.steps)

    def input_indices(self):
        """Yield one input index per sampling period."""
        for uid, hold in self.steps:
            for _ in range(hold):
                yield uid


def _compress(uids) -> tuple[tuple[int, int], ...]:
    out: list[list[int]] = []
    for uid in uids:
        if out and out[-1][0] == uid:
            out[-1][1] += 1
        else:
            out.append([uid, 1])
    return tuple((uid, hold) for uid, hold in out)


def _singleton_segment(model: SymbolicModel, start_id: int,
                       goal_id: int) -> list[int] | None:
    """Shortest input sequence using only singleton transitions; ties are
    broken by expanding inputs in ascending index order."""
    if start_id == goal_id:
        return []
    parent: dict[int, tuple[int, int]] = {start_id: (-1, -1)}
    frontier = [start_id]
    while frontier:
        nxt = []
        for sid in frontier:
            for uid in model.enabled_ids(sid):
                succ = model.successor_ids(sid, uid)
                if len(succ) != 1:
                    continue
                dst = succ[0]
                if dst in parent:
                    continue
                parent[dst] = (sid, uid)
                if dst == goal_id:
                    seq = []
                    node = dst
                    while node != start_id:
                        prev, used = parent[node]
                        seq.append(used)
                        node = prev
                    return list(reversed(seq))
                nxt.append(dst)
        frontier = nxt
    return None


class _GridDedup:
    """Flat visited-set over a uniform grid covering the lattice bounds."""

    def __init__(self, lattice: LogLattice, resolution: float):
        self.lo = lattice.lo_array
        self.res = float(resolution)
        spans = lattice.hi_array - lattice.lo_array
        self.shape = np.maximum((spans / self.res).astype(np.int64) + 3, 1)
        total = int(np.prod(self.shape))
        if total > 50_000_000:
            raise PlanningError(
                f"dedup grid of {total} cells is too large; increase the "
                "grid resolution")
        self.strides = np.ones(len(self.shape), np.int64)
        for i in range(len(self.shape) - 2, -1, -1):
            self.strides[i] = self.strides[i + 1] * self.shape[i + 1]
        self.visited = np.zeros(total, bool)

    def codes(self, pts: np.ndarray) -> np.ndarray:
        idx = ((pts - self.lo) / self.res).astype(np.int64) + 1
        idx = np.clip(idx, 0, self.shape - 1)
        return idx @ self.strides


def _rollout_segment(sys: SampledSystem, lattice: LogLattice,
                     inputs: np.ndarray, x_start: np.ndarray, goal_box,
                     resolution: float, max_depth: int):
    """Breadth-first search over nominal rollouts, states deduplicated on a
    uniform grid; returns (input sequence, arrival state) or None."""
    if goal_box.contains(x_start):
        return [], x_start
    dedup = _GridDedup(lattice, resolution)
    frontier = x_start[None, :].copy()
    dedup.visited[dedup.codes(frontier)] = True
    n_inputs = len(inputs)
    layers: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(max_depth):
        n_front = len(frontier)
        stacked_x = np.repeat(frontier, n_inputs, axis=0)
        stacked_u = np.tile(inputs, (n_front, 1))
        succ = successor_many(sys, stacked_x, stacked_u)
        ok = (np.isfinite(succ).all(axis=1)
              & (succ >= lattice.lo_array).all(axis=1)
              & (succ <= lattice.hi_array).all(axis=1))
        rows = np.nonzero(ok)[0]
        if rows.size == 0:
            return None
        codes = dedup.codes(succ[rows])
        fresh = ~dedup.visited[codes]
        rows = rows[fresh]
        codes = codes[fresh]
        # keep the first row (frontier-order, then input-order) per grid cell
        _, first = np.unique(codes, return_index=True)
        rows = np.sort(rows[first])
        if rows.size == 0:
            return None
        dedup.visited[dedup.codes(succ[rows])] = True
        layers.append((rows // n_inputs, rows % n_inputs))
        frontier = succ[rows]
        hits = goal_box.contains_many(frontier)
        if hits.any():
            node = int(np.nonzero(hits)[0][0])
            arrival = frontier[node].copy()
            seq = []
            for parents, uids in reversed(layers):
                seq.append(int(uids[node]))
                node = int(parents[node])
            return list(reversed(seq)), arrival
    return None


def plan_reach(model: SymbolicModel, start, goals, relaxed: bool = False,
               grid_resolution: float = 0.02,
               max_segment_steps: int = 200) -> Plan:
    """Plan an input schedule visiting the goal cells in order.

    Default mode: breadth-first search over the abstract graph using only
    transitions whose successor set is a singleton, concatenating shortest
    segments; raises :class:`PlanningError` naming the first unreachable
    goal.  Callers may then retry with ``relaxed=True``, which searches the
    nominal concrete rollout from the start cell's center instead (see the
    module docstring); relaxed plans must be validated in closed loop.
    """
    start_id = model.state_id(start)
    goal_ids = [model.state_id(g) for g in goals]

    if not relaxed:
        here = start_id
        sequence: list[int] = []
        for gid in goal_ids:
            segment = _singleton_segment(model, here, gid)
            if segment is None:
                raise PlanningError(
                    f"goal {format_cell(model.cells[gid])} unreachable via "
                    "singleton transitions; retry with relaxed=True")
            sequence.extend(segment)
            here = gid
        return Plan(steps=_compress(sequence), inputs=model.inputs)

    if model.system is None:
        raise PlanningError("relaxed planning needs the model's source system")
    if model.lattice is None:
        raise PlanningError("relaxed planning needs the lattice geometry")
    sys = model.system
    lattice = model.lattice
    x = lattice.center(model.cells[start_id])
    sequence = []
    for gid in goal_ids:
        goal_box = lattice.cell_box(model.cells[gid])
        result = _rollout_segment(sys, lattice, model.inputs, x, goal_box,
                                  grid_resolution, max_segment_steps)
        if result is None:
            raise PlanningError(
                f"goal {format_cell(model.cells[gid])} unreachable within "
                f"{max_segment_steps} steps")
        segment, x = result
        sequence.extend(segment)
    return Plan(steps=_compress(sequence), inputs=model.inputs)


def simulate_closed_loop(sys: SampledSystem, policy, x0, max_steps: int,
                         lattice: LogLattice | None = None) -> Trajectory:
    """Run the sampled closed loop under a controller or a plan.

    Controller mode applies the lowest admissible input index at each step
    and stops when the state leaves the controller domain; plan mode applies
    the scheduled inputs (with hold counts) and stops on completion or, when
    a lattice is supplied, on leaving its bounds.  Raises
    :class:`OutOfDomainError` if the initial state is already outside.
    """
    x = np.atleast_1d(np.asarray(x0, float))
    states = [x.copy()]
    applied: list[np.ndarray] = []
    terminated = "max_steps"

    if isinstance(policy, ConcreteController):
        if not policy.in_domain(x):
            raise OutOfDomainError(
                f"initial state {x!r} outside the controller domain")
        for _ in range(max_steps):
            admissible = policy.query(x)
            if not admissible:
                terminated = "out_of_domain"
                break
            u = policy.input_vector(admissible[0])
            x = successor(sys, x, u)
            applied.append(np.atleast_1d(u))
            states.append(x.copy())
        dim_u = sys.dim_u
    elif isinstance(policy, Plan):
        if lattice is not None and not (
                (x >= lattice.lo_array).all() and (x <= lattice.hi_array).all()):
            raise OutOfDomainError(f"initial state {x!r} outside the lattice bounds")
        full = list(policy.input_indices())
        schedule = full[:max_steps]
        terminated = "plan_complete" if len(schedule) == len(full) else "max_steps"
        for uid in schedule:
            u = policy.inputs[uid]
            x = successor(sys, x, u)
            applied.append(np.atleast_1d(u))
            states.append(x.copy())
            if lattice is not None and not (
                    (x >= lattice.lo_array).all() and (x <= lattice.hi_array).all()):
                terminated = "out_of_domain"
                break
        dim_u = policy.inputs.shape[1]
    else:
        raise TypeError(f"unsupported policy type {type(policy)!r}")

    inputs = (np.array(applied) if applied
              else np.empty((0, dim_u)))
    times = sys.tau * np.arange(len(states))
    return Trajectory(times=times, states=np.array(states), inputs=inputs,
                      terminated=terminated)


CONTROLLER_HEADER = "#controller 1"


def save_controller(ctrl: SafetyController, path):
    """One line per domain cell: ``cell <levels> : <input indices>``."""
    with open(path, "w") as fh:
        fh.write(CONTROLLER_HEADER + "\n")
        for cell in ctrl.domain:
            ids = " ".join(str(u) for u in ctrl.admissible[cell])
            fh.write(f"cell {format_cell(cell)} : {ids}\n")


def load_controller(path, inputs) -> SafetyController:
    """Read a controller file; ``inputs`` supplies the input-vector table."""
    admissible: dict[tuple[int, ...], tuple[int, ...]] = {}
    with open(path) as fh:
        first = fh.readline().strip()
        if first != CONTROLLER_HEADER:
            raise ValueError(f"{path}: not a controller file")
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                _, rest = line.split(" ", 1)
                levels, ids = rest.split(":")
                cell = parse_cell(levels.strip())
                admissible[cell] = tuple(int(v) for v in ids.split())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed line") from exc
    domain = tuple(sorted(admissible))
    return SafetyController(domain=domain, admissible=admissible,
                            inputs=np.asarray(inputs, float), iterations=0,
                            history=(), safe_cells=domain)


def save_plan(plan: Plan, path):
    """Lines of ``input_index hold_steps``."""
    with open(path, "w") as fh:
        for uid, hold in plan.steps:
            fh.write(f"{uid} {hold}\n")


def load_plan(path, inputs) -> Plan:
    steps = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                uid, hold = line.split()
                steps.append((int(uid), int(hold)))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed line") from exc
    return Plan(steps=tuple(steps), inputs=np.asarray(inputs, float))
