"""Finite symbolic models of sampled systems over a logarithmic lattice.

The abstract state set is the lattice's cell set.  The abstract input set is
obtained per cell by sampling the input box on a uniform grid, integrating
one period from the cell center, and keeping one representative input per
distinct image under a fine auxiliary logarithmic quantizer (parameter
``mu``); two sampled inputs whose nominal successors land in the same
mu-region are interchangeable at this resolution, and the lexicographically
smallest one is kept.

A transition (cell, input) -> targets is computed by integrating the cell
center one period, inflating the nominal successor by the growth radius
(see :func:`symquant.dynamics.growth_radius`), and collecting every cell that
intersects the inflated box.  If the box leaves the lattice bounds the input
is disabled for that cell (no stored successors), so enabled inputs can never
drive the quantized closed loop out of the working box.

Models are built eagerly or lazily: a lazy model computes a successor set on
first query and memoizes it.  The computation is pure, so the memo table
needs no lock: concurrent first queries of one key store identical values.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import SampledSystem, growth_radius, successor, successor_many
from .errors import ConfigError, DivergenceError, OutOfDomainError
from .quantizer import (LogLattice, LogQuantizerAxis, QuantizerVariant,
                        format_cell, parse_cell)

__all__ = [
    "InputApproxConfig",
    "SymbolicModel",
    "input_grid",
    "approximate_inputs",
    "transition_targets",
    "build_abstraction",
    "enabled_inputs",
    "save_abstraction",
    "load_abstraction",
]

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class InputApproxConfig:
    """Input-set approximation parameters.

    ``mu`` is the density/scale of the auxiliary successor quantizer (finer
    mu separates more inputs); ``input_samples`` is the uniform grid
    resolution per input axis.
    """

    mu: float
    input_samples: int = 51

    def __post_init__(self):
        if not (0.0 < self.mu < 1.0):
            raise ConfigError(f"mu must lie in (0, 1), got {self.mu!r}")
        if self.input_samples < 1:
            raise ConfigError("input_samples must be at least 1")

    def mu_axis(self) -> LogQuantizerAxis:
        return LogQuantizerAxis(eta=self.mu, scale=self.mu,
                                variant=QuantizerVariant.VALUE_ANCHORED)


def input_grid(sys: SampledSystem, samples: int) -> np.ndarray:
    """Uniform grid over the input box, rows in lexicographic order."""
    axes = [np.linspace(lo, hi, samples)
            for lo, hi in zip(sys.input_lo, sys.input_hi)]
    rows = list(itertools.product(*axes))
    return np.array(rows, float).reshape(len(rows), sys.dim_u)


def _mu_signature(x: np.ndarray, mu_axis: LogQuantizerAxis) -> tuple[int, ...]:
    return tuple(mu_axis.quantize(float(v))[0] for v in x)


def approximate_inputs(cell, lattice: LogLattice, sys: SampledSystem,
                       cfg: InputApproxConfig) -> list[np.ndarray]:
    """Abstract input set of a cell: grid samples deduplicated by the
    mu-quantized image of their nominal successors.

    Representatives are the lexicographically smallest input of each image
    class; divergent samples are skipped (and logged).
    """
    lattice.check_index(cell)
    grid = input_grid(sys, cfg.input_samples)
    center = lattice.center(cell)
    succ = successor_many(sys, np.tile(center, (len(grid), 1)), grid)
    mu_axis = cfg.mu_axis()
    seen: dict[tuple[int, ...], int] = {}
    for k in range(len(grid)):
        if not np.isfinite(succ[k]).all():
            logger.warning("skipping divergent input sample %s at cell %s",
                           grid[k], cell)
            continue
        sig = _mu_signature(succ[k], mu_axis)
        if sig not in seen:
            seen[sig] = k
    return [grid[k] for k in sorted(seen.values())]


def transition_targets(cell, u, sys: SampledSystem,
                       lattice: LogLattice) -> tuple[tuple[int, ...], ...]:
    """Cells intersecting the inflated one-period successor box of a cell
    center, sorted; empty when the box leaves the lattice bounds or the
    integration diverges."""
    lattice.check_index(cell)
    center = lattice.center(cell)
    try:
        nominal = successor(sys, center, u)
    except DivergenceError as exc:
        logger.warning("divergence from cell %s under input %s: %s",
                       cell, u, exc)
        return ()
    return _targets_from_nominal(cell, nominal, lattice, sys.lipschitz, sys.tau)


def _targets_from_nominal(cell, nominal: np.ndarray, lattice: LogLattice,
                          lipschitz: float, tau: float):
    radius = growth_radius(lattice.center(cell), lattice.shared_eta,
                           lipschitz, tau)
    box_lo = nominal - radius
    box_hi = nominal + radius
    if (box_lo < lattice.lo_array).any() or (box_hi > lattice.hi_array).any():
        return ()
    per_axis = [lattice.levels_in_interval(i, box_lo[i], box_hi[i])
                for i in range(lattice.dim)]
    return tuple(itertools.product(*per_axis))


class SymbolicModel:
    """Finite transition system over lattice cells.

    States are cell indices, inputs an indexed table of input vectors, and
    the sparse transition map is keyed by (state id, input id).  The output
    map is the identity on cells and is not stored.  Models are immutable
    once fully materialized; lazy models memoize successor sets on first
    query (pure computation, so double computation is harmless).
    """

    def __init__(self, cells, inputs, lattice, tau, eta, mu, lipschitz,
                 candidates, nominal=None, system=None, lazy=False):
        self.cells = [tuple(int(m) for m in c) for c in cells]
        self._id = {c: i for i, c in enumerate(self.cells)}
        if len(self._id) != len(self.cells):
            raise ValueError("duplicate cells")
        self.inputs = np.asarray(inputs, float)
        self.inputs.setflags(write=False)
        self.lattice = lattice
        self.tau = float(tau)
        self.eta = float(eta)
        self.mu = float(mu)
        self.lipschitz = float(lipschitz)
        self.system = system
        self._candidates = [tuple(sorted(int(u) for u in cand))
                            for cand in candidates]
        # nominal successor of each (state, candidate input), filled on
        # demand in lazy mode
        self._nominal = dict(nominal) if nominal else {}
        self._succ: dict[tuple[int, int], tuple[int, ...]] = {}
        self._enabled: list[tuple[int, ...] | None] = [None] * len(self.cells)
        if not lazy:
            self.materialize()

    # -- identifiers ---------------------------------------------------

    @property
    def n_states(self) -> int:
        return len(self.cells)

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[0]

    def state_id(self, cell) -> int:
        try:
            return self._id[tuple(int(m) for m in cell)]
        except KeyError:
            raise OutOfDomainError(f"unknown cell {cell!r}") from None

    # -- transition queries --------------------------------------------

    def _compute_targets(self, sid: int, uid: int) -> tuple[int, ...]:
        cell = self.cells[sid]
        key = (sid, uid)
        if key not in self._nominal:
            if self.system is None:
                raise ValueError("lazy model queries need the source system")
            try:
                self._nominal[key] = successor(self.system, self.lattice.center(cell),
                                               self.inputs[uid])
            except DivergenceError as exc:
                logger.warning("divergence from cell %s under input %s: %s",
                               cell, self.inputs[uid], exc)
                self._nominal[key] = None
        nominal = self._nominal[key]
        if nominal is None or not np.isfinite(nominal).all():
            return ()
        cells = _targets_from_nominal(cell, nominal, self.lattice,
                                      self.lipschitz, self.tau)
        return tuple(sorted(self.state_id(c) for c in cells))

    def _targets(self, sid: int, uid: int) -> tuple[int, ...]:
        key = (sid, uid)
        got = self._succ.get(key)
        if got is None:
            got = self._compute_targets(sid, uid)
            self._succ[key] = got
        return got

    def enabled_ids(self, sid: int) -> tuple[int, ...]:
        cached = self._enabled[sid]
        if cached is None:
            cached = tuple(uid for uid in self._candidates[sid]
                           if self._targets(sid, uid))
            self._enabled[sid] = cached
        return cached

    def successor_ids(self, sid: int, uid: int) -> tuple[int, ...]:
        if uid not in self._candidates[sid]:
            return ()
        return self._targets(sid, uid)

    def enabled_inputs(self, cell) -> tuple[int, ...]:
        """Input indices with at least one successor at this cell; an empty
        result means the cell is blocking."""
        return self.enabled_ids(self.state_id(cell))

    def successors(self, cell, input_index: int) -> tuple[tuple[int, ...], ...]:
        """Sorted successor cells of (cell, input index); empty when the
        input is not enabled there."""
        ids = self.successor_ids(self.state_id(cell), int(input_index))
        return tuple(self.cells[t] for t in ids)

    def is_blocking(self, cell) -> bool:
        return not self.enabled_inputs(cell)

    def materialize(self):
        """Force computation of every successor set (no-op when eager)."""
        for sid in range(self.n_states):
            self.enabled_ids(sid)

    def transition_count(self) -> int:
        self.materialize()
        return sum(len(self._targets(sid, uid))
                   for sid in range(self.n_states)
                   for uid in self.enabled_ids(sid))

    def iter_transitions(self):
        """Yield (src id, dst id, input id) sorted; materializes the model."""
        self.materialize()
        for sid in range(self.n_states):
            for uid in self.enabled_ids(sid):
                for dst in self._targets(sid, uid):
                    yield sid, dst, uid

    def summary(self) -> dict:
        return {
            "states": self.n_states,
            "inputs": self.n_inputs,
            "transitions": self.transition_count(),
        }

    # -- construction without a builder --------------------------------

    @classmethod
    def from_tables(cls, cells, inputs, successors, lattice=None, tau=0.0,
                    eta=0.5, mu=0.5, lipschitz=1.0, system=None):
        """Assemble a model from explicit tables.

        ``successors`` maps (state id, input id) to an iterable of state ids;
        empty entries are dropped.  Candidate inputs per state are those with
        stored successors, so loaded/hand-built models have
        enabled == candidates.
        """
        cells = [tuple(c) for c in cells]
        cand: list[set[int]] = [set() for _ in cells]
        succ: dict[tuple[int, int], tuple[int, ...]] = {}
        for (sid, uid), dsts in successors.items():
            dsts = tuple(sorted(int(d) for d in dsts))
            if not dsts:
                continue
            succ[(int(sid), int(uid))] = dsts
            cand[int(sid)].add(int(uid))
        model = cls.__new__(cls)
        model.cells = cells
        model._id = {c: i for i, c in enumerate(cells)}
        inputs_arr = np.asarray(inputs, float)
        if inputs_arr.size == 0:
            inputs_arr = inputs_arr.reshape(0, 1)
        else:
            inputs_arr = inputs_arr.reshape(len(inputs), -1)
        model.inputs = inputs_arr
        model.inputs.setflags(write=False)
        model.lattice = lattice
        model.tau = float(tau)
        model.eta = float(eta)
        model.mu = float(mu)
        model.lipschitz = float(lipschitz)
        model.system = system
        model._candidates = [tuple(sorted(s)) for s in cand]
        model._nominal = {}
        model._succ = dict(succ)
        model._enabled = [None] * len(cells)
        model.materialize()
        return model

    # -- persistence ----------------------------------------------------

    def save(self, path):
        save_abstraction(self, path)

    @classmethod
    def load(cls, path, system=None) -> "SymbolicModel":
        return load_abstraction(path, system=system)


def enabled_inputs(model: SymbolicModel, cell) -> tuple[int, ...]:
    """Input indices enabled at a cell (empty iff the cell is blocking)."""
    return model.enabled_inputs(cell)


def build_abstraction(sys: SampledSystem, lattice: LogLattice,
                      cfg: InputApproxConfig, lazy: bool = False,
                      threads: int | None = None) -> SymbolicModel:
    """Build the symbolic model of a sampled system over a lattice.

    The result is deterministic and independent of ``threads``: per-cell
    results are computed independently and assembled in cell order.  With
    ``lazy=True`` the per-cell abstract input sets are still computed up
    front (one batched integration), but successor sets are left to be
    computed and memoized on first query.
    """
    if sys.dim_x != lattice.dim:
        raise ConfigError(f"system dimension {sys.dim_x} does not match "
                          f"lattice dimension {lattice.dim}")
    eta = lattice.shared_eta
    cells = lattice.enumerate_cells()
    if not cells:
        raise ConfigError("lattice has no cells")

    grid = input_grid(sys, cfg.input_samples)
    n_cells, n_grid = len(cells), len(grid)
    centers = np.array([lattice.center(c) for c in cells])

    # one batched integration for every (cell center, grid input) pair
    stacked_x = np.repeat(centers, n_grid, axis=0)
    stacked_u = np.tile(grid, (n_cells, 1))
    nominal_all = successor_many(sys, stacked_x, stacked_u)

    mu_axis = cfg.mu_axis()
    rep_rows: list[list[int]] = []
    for ci in range(n_cells):
        block = nominal_all[ci * n_grid:(ci + 1) * n_grid]
        seen: dict[tuple[int, ...], int] = {}
        for k in range(n_grid):
            if not np.isfinite(block[k]).all():
                logger.warning("skipping divergent input sample %s at cell %s",
                               grid[k], cells[ci])
                continue
            sig = _mu_signature(block[k], mu_axis)
            if sig not in seen:
                seen[sig] = k
        rep_rows.append(sorted(seen.values()))

    # global input table: union of representatives, lexicographically sorted
    used = sorted({k for rows in rep_rows for k in rows},
                  key=lambda k: tuple(grid[k]))
    grid_to_uid = {k: uid for uid, k in enumerate(used)}
    inputs = grid[used] if used else np.empty((0, sys.dim_u))
    candidates = [tuple(sorted(grid_to_uid[k] for k in rows))
                  for rows in rep_rows]
    nominal = {(ci, grid_to_uid[k]): nominal_all[ci * n_grid + k]
               for ci in range(n_cells) for k in rep_rows[ci]}

    model = SymbolicModel(cells, inputs, lattice, sys.tau, eta, cfg.mu,
                          sys.lipschitz, candidates, nominal=nominal,
                          system=sys, lazy=True)
    if not lazy:
        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(model.enabled_ids, range(n_cells)))
        else:
            model.materialize()
    return model


def _format_floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_abstraction(model: SymbolicModel, path):
    """Write the versioned line-oriented abstraction file (lossless)."""
    if model.lattice is None:
        raise ValueError("cannot save a model without lattice geometry")
    model.materialize()
    lat = model.lattice
    variants = {axis.variant for axis in lat.axes}
    if len(variants) != 1:
        raise ValueError("mixed-variant lattices are not serializable")
    variant = next(iter(variants)).value
    with open(path, "w") as fh:
        fh.write(f"#version {FORMAT_VERSION}\n")
        fh.write("#lattice variant=%s eta=%s scale=%s lo=%s hi=%s\n" % (
            variant, repr(float(model.eta)),
            _format_floats(axis.scale for axis in lat.axes),
            _format_floats(lat.lo), _format_floats(lat.hi)))
        fh.write("#tau %s #eta %s #mu %s #L %s\n" % (
            repr(float(model.tau)), repr(float(model.eta)),
            repr(float(model.mu)), repr(float(model.lipschitz))))
        for sid, dst, uid in model.iter_transitions():
            fh.write(f"{sid} {dst} {uid}\n")
        for uid in range(model.n_inputs):
            fh.write("input %d %s\n" % (uid, " ".join(
                repr(float(v)) for v in model.inputs[uid])))
        for sid, cell in enumerate(model.cells):
            fh.write(f"state {sid} {format_cell(cell)}\n")


def load_abstraction(path, system=None) -> SymbolicModel:
    """Read an abstraction file written by :func:`save_abstraction`."""
    header: dict[str, str] = {}
    lattice_spec: dict[str, str] = {}
    states: dict[int, tuple[int, ...]] = {}
    inputs: dict[int, tuple[float, ...]] = {}
    transitions: list[tuple[int, int, int]] = []
    version = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                if line.startswith("#version"):
                    version = int(line.split()[1])
                elif line.startswith("#lattice"):
                    for token in line.split()[1:]:
                        key, _, value = token.partition("=")
                        lattice_spec[key] = value
                elif line.startswith("#"):
                    tokens = line.split()
                    for key, value in zip(tokens[0::2], tokens[1::2]):
                        header[key.lstrip("#")] = value
                elif line.startswith("state "):
                    _, sid, levels = line.split(maxsplit=2)
                    states[int(sid)] = parse_cell(levels)
                elif line.startswith("input "):
                    parts = line.split()
                    inputs[int(parts[1])] = tuple(float(v) for v in parts[2:])
                else:
                    src, dst, uid = line.split()
                    transitions.append((int(src), int(dst), int(uid)))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed line {line!r}") from exc
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported abstraction format {version!r}")

    lattice = None
    if lattice_spec:
        lattice = LogLattice.from_params(
            eta=float(lattice_spec["eta"]),
            scales=[float(v) for v in lattice_spec["scale"].split(",")],
            lo=[float(v) for v in lattice_spec["lo"].split(",")],
            hi=[float(v) for v in lattice_spec["hi"].split(",")],
            variant=QuantizerVariant(lattice_spec["variant"]))

    cells = [states[i] for i in range(len(states))]
    input_table = np.array([inputs[i] for i in range(len(inputs))], float) \
        if inputs else np.empty((0, 1))
    succ: dict[tuple[int, int], set[int]] = {}
    for src, dst, uid in transitions:
        succ.setdefault((src, uid), set()).add(dst)
    return SymbolicModel.from_tables(
        cells, input_table, succ, lattice=lattice,
        tau=float(header.get("tau", 0.0)), eta=float(header.get("eta", 0.5)),
        mu=float(header.get("mu", 0.5)),
        lipschitz=float(header.get("L", 1.0)), system=system)
