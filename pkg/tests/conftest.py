"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest

import symquant as sq
from symquant.abstraction import SymbolicModel


@pytest.fixture(scope="session")
def pendulum_scenario():
    """The bundled coarse pendulum scenario: system, lattice, model."""
    sys_ = sq.pendulum_system()
    lattice = sq.LogLattice.from_params(0.2, [0.4, 0.4], [-1, -1], [1, 1],
                                        "edge_anchored")
    model = sq.build_abstraction(sys_, lattice,
                                 sq.InputApproxConfig(mu=0.002, input_samples=51))
    return sys_, lattice, model


@pytest.fixture(scope="session")
def contracting_scenario():
    """Strongly contracting linear system where the growth bound has ample
    slack, so the safety game is winnable on the coarse lattice."""

    def field(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        return np.stack([-x[..., 0] + u[..., 0], -x[..., 1] + u[..., 0]],
                        axis=-1)

    sys_ = sq.SampledSystem(dim_x=2, dim_u=1, field=field, lipschitz=1.0,
                            tau=0.5, input_lo=(-1.0,), input_hi=(1.0,),
                            vectorized=True, name="contracting")
    lattice = sq.LogLattice.from_params(0.2, [0.4, 0.4], [-1, -1], [1, 1],
                                        "edge_anchored")
    model = sq.build_abstraction(sys_, lattice,
                                 sq.InputApproxConfig(mu=0.002, input_samples=21))
    return sys_, lattice, model


def box_intersects(box, lo, hi):
    """Closed box [lo, hi] vs a half-open cell box."""
    for i in range(box.dim):
        lo_ok = hi[i] > box.lo[i] if box.lo_open[i] else hi[i] >= box.lo[i]
        hi_ok = lo[i] < box.hi[i] if box.hi_open[i] else lo[i] <= box.hi[i]
        if not (lo_ok and hi_ok):
            return False
    return True


def targets_oracle(model, sys_, lattice, cell, uid):
    """Exhaustive-intersection reference for transition targets: test every
    cell's box against the inflated successor box."""
    center = lattice.center(cell)
    nominal = sq.successor(sys_, center, model.inputs[uid])
    radius = sq.growth_radius(center, lattice.shared_eta, sys_.lipschitz,
                              sys_.tau)
    lo, hi = nominal - radius, nominal + radius
    if (lo < lattice.lo_array).any() or (hi > lattice.hi_array).any():
        return ()
    return tuple(c for c in model.cells
                 if box_intersects(lattice.cell_box(c), lo, hi))


def max_controlled_invariant(model, safe_cells):
    """Brute-force maximal controlled-invariant subset: delete one
    uncontrollable state at a time and restart the scan."""
    keep = {model.state_id(c) for c in safe_cells}
    changed = True
    while changed:
        changed = False
        for sid in sorted(keep):
            controllable = False
            for uid in model.enabled_ids(sid):
                succ = model.successor_ids(sid, uid)
                if succ and all(t in keep for t in succ):
                    controllable = True
                    break
            if not controllable:
                keep.discard(sid)
                changed = True
                break
    return {model.cells[sid] for sid in keep}


def random_model(rng, max_states=50, max_inputs=5):
    """Random sparse transition system for fixed-point cross-checks."""
    n = int(rng.integers(2, max_states + 1))
    k = int(rng.integers(1, max_inputs + 1))
    cells = [(i,) for i in range(n)]
    succ = {}
    for sid in range(n):
        for uid in range(k):
            if rng.random() < 0.3:
                continue
            size = int(rng.integers(1, 4))
            dsts = sorted(set(int(v) for v in rng.integers(0, n, size=size)))
            succ[(sid, uid)] = tuple(dsts)
    inputs = np.arange(k, dtype=float).reshape(k, 1)
    return SymbolicModel.from_tables(cells, inputs, succ)
