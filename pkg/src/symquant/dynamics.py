"""Sampled-time nonlinear control systems and fixed-step integration.

A :class:`SampledSystem` wraps a continuous vector field ``dx/dt = f(x, u)``
together with its sampling period ``tau``, a Lipschitz constant for ``f``
(user-supplied, not estimated), and the input box.  Inputs are held constant
over each sampling period; the one-period successor map is evaluated by
classical fixed-step 4th-order integration with a configurable number of
substeps, which keeps every evaluation deterministic and bit-reproducible.

The bundled pendulum model is

    dx1/dt = x2
    dx2/dt = -(g/l) sin(x1) - (k/m) x2 + u

with g = 9.8, l = 5, m = 0.5, k = 3, torque bounded in [-2.5, 2.5].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DivergenceError

__all__ = [
    "SampledSystem",
    "Trajectory",
    "successor",
    "successor_many",
    "growth_radius",
    "pendulum_system",
    "linear_system",
    "register_system",
    "make_system",
    "PENDULUM_CONSTANTS",
]


@dataclass(frozen=True, eq=False)
class SampledSystem:
    """Sampled control system: vector field plus integration settings.

    ``field(x, u)`` must be deterministic.  If ``vectorized`` is set the
    field must accept stacked arguments of shape (..., dim_x) / (..., dim_u)
    and broadcast; otherwise batched evaluation falls back to a row loop.

    Immutable after construction; successor evaluation is pure, so concurrent
    use from many workers is safe.
    """

    dim_x: int
    dim_u: int
    field: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz: float
    tau: float
    input_lo: tuple[float, ...]
    input_hi: tuple[float, ...]
    integrator_steps: int = 10
    vectorized: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "input_lo",
                           tuple(float(v) for v in np.atleast_1d(self.input_lo)))
        object.__setattr__(self, "input_hi",
                           tuple(float(v) for v in np.atleast_1d(self.input_hi)))
        if self.dim_x < 1 or self.dim_u < 1:
            raise ValueError("state and input dimensions must be positive")
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if not (math.isfinite(self.lipschitz) and self.lipschitz > 0.0):
            raise ValueError(f"lipschitz must be positive, got {self.lipschitz!r}")
        if self.integrator_steps < 1:
            raise ValueError("integrator_steps must be at least 1")
        if len(self.input_lo) != self.dim_u or len(self.input_hi) != self.dim_u:
            raise ValueError("input box dimension does not match dim_u")
        if any(lo > hi for lo, hi in zip(self.input_lo, self.input_hi)):
            raise ValueError("input box is empty")

    def with_settings(self, **kwargs) -> "SampledSystem":
        """Copy with replaced fields (tau, integrator_steps, ...)."""
        return replace(self, **kwargs)

    def input_box_contains(self, u) -> bool:
        u = np.atleast_1d(np.asarray(u, float))
        return bool((u >= np.array(self.input_lo)).all()
                    and (u <= np.array(self.input_hi)).all())


def _eval_field(sys: SampledSystem, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    if sys.vectorized:
        return np.asarray(sys.field(x, u), float)
    return np.stack([np.asarray(sys.field(x[k], u[k]), float)
                     for k in range(x.shape[0])])


def _rk4_step(sys: SampledSystem, x: np.ndarray, u: np.ndarray,
              h: float) -> np.ndarray:
    k1 = _eval_field(sys, x, u)
    k2 = _eval_field(sys, x + (h / 2.0) * k1, u)
    k3 = _eval_field(sys, x + (h / 2.0) * k2, u)
    k4 = _eval_field(sys, x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def successor_many(sys: SampledSystem, x0: np.ndarray, u: np.ndarray,
                   steps: int | None = None) -> np.ndarray:
    """One-period successors for a batch of (state, input) rows.

    Rows that diverge propagate as non-finite values; callers decide how to
    handle them.  Uses the same elementwise kernel as :func:`successor`, so
    batched and single evaluations agree bit for bit.
    """
    x = np.asarray(x0, float)
    u = np.asarray(u, float)
    if x.ndim != 2 or x.shape[1] != sys.dim_x:
        raise ValueError(f"expected states of shape (N, {sys.dim_x})")
    if u.ndim != 2 or u.shape[1] != sys.dim_u or u.shape[0] != x.shape[0]:
        raise ValueError(f"expected inputs of shape (N, {sys.dim_u})")
    steps = sys.integrator_steps if steps is None else int(steps)
    h = sys.tau / steps
    with np.errstate(all="ignore"):
        for _ in range(steps):
            x = _rk4_step(sys, x, u, h)
    return x


def successor(sys: SampledSystem, x0, u, steps: int | None = None) -> np.ndarray:
    """State reached after one sampling period from x0 under constant input u.

    Raises :class:`DivergenceError` (carrying the substep index) if the
    integration produces a non-finite intermediate state.
    """
    x = np.asarray(x0, float).reshape(1, sys.dim_x)
    uu = np.atleast_1d(np.asarray(u, float)).reshape(1, sys.dim_u)
    steps = sys.integrator_steps if steps is None else int(steps)
    h = sys.tau / steps
    with np.errstate(all="ignore"):
        for k in range(steps):
            x = _rk4_step(sys, x, uu, h)
            if not np.isfinite(x).all():
                raise DivergenceError(k)
    return x[0]


def growth_radius(q_center, eta: float, lipschitz: float, tau: float) -> np.ndarray:
    """Per-axis inflation radius ``theta * exp(L*tau) * qbar`` around the
    nominal successor of a cell center.

    ``theta = eta / (1 - eta)`` and ``qbar_i = |q_i|`` for nonzero components,
    1 for zero components, so the box covers the successor of every point of
    the cell whenever the Lipschitz bound holds.
    """
    q = np.atleast_1d(np.asarray(q_center, float))
    if not (0.0 < eta < 1.0):
        raise ValueError(f"eta must lie in (0, 1), got {eta!r}")
    if lipschitz <= 0.0 or tau < 0.0:
        raise ValueError("need lipschitz > 0 and tau >= 0")
    theta = eta / (1.0 - eta)
    qbar = np.where(q == 0.0, 1.0, np.abs(q))
    return theta * math.exp(lipschitz * tau) * qbar


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Closed-loop sample record.

    ``states`` holds K+1 states at times ``0, tau, ..., K*tau``; ``inputs``
    holds the K inputs applied on the intervals between them.  ``terminated``
    records why the run stopped ("max_steps", "plan_complete" or
    "out_of_domain").
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    terminated: str = "max_steps"

    def __post_init__(self):
        times = np.asarray(self.times, float)
        states = np.asarray(self.states, float)
        inputs = np.asarray(self.inputs, float)
        if states.ndim != 2 or times.shape != (states.shape[0],):
            raise ValueError("times and states lengths do not match")
        if inputs.ndim != 2 or inputs.shape[0] != states.shape[0] - 1:
            raise ValueError("need exactly one input per step")
        if not np.isfinite(states).all():
            raise ValueError("trajectory contains non-finite states")
        if len(times) > 1 and not (np.diff(times) > 0).all():
            raise ValueError("timestamps must strictly increase")
        for name, arr in (("times", times), ("states", states), ("inputs", inputs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def steps(self) -> int:
        return self.inputs.shape[0]

    def write_csv(self, path):
        """CSV with header t,x1,...,xn,u1,...,um; the final row has empty
        input fields (no input is applied after the last recorded state)."""
        n = self.states.shape[1]
        m = self.inputs.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x{i+1}" for i in range(n)]
                            + [f"u{j+1}" for j in range(m)])
            for k in range(self.states.shape[0]):
                row = [repr(float(self.times[k]))]
                row += [repr(float(v)) for v in self.states[k]]
                if k < self.inputs.shape[0]:
                    row += [repr(float(v)) for v in self.inputs[k]]
                else:
                    row += [""] * m
                writer.writerow(row)


PENDULUM_CONSTANTS = {
    "gravity": 9.8,
    "rod_length": 5.0,
    "mass": 0.5,
    "friction": 3.0,
}


def pendulum_system(tau: float = 0.2, lipschitz: float = 6.0,
                    integrator_steps: int = 10) -> SampledSystem:
    """Damped pendulum with torque input bounded in [-2.5, 2.5]."""
    gravity_ratio = PENDULUM_CONSTANTS["gravity"] / PENDULUM_CONSTANTS["rod_length"]
    friction_ratio = PENDULUM_CONSTANTS["friction"] / PENDULUM_CONSTANTS["mass"]

    def field(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        return np.stack(
            [x[..., 1],
             -gravity_ratio * np.sin(x[..., 0]) - friction_ratio * x[..., 1]
             + u[..., 0]],
            axis=-1)

    return SampledSystem(dim_x=2, dim_u=1, field=field, lipschitz=lipschitz,
                         tau=tau, input_lo=(-2.5,), input_hi=(2.5,),
                         integrator_steps=integrator_steps, vectorized=True,
                         name="pendulum")


def linear_system(tau: float = 0.2, integrator_steps: int = 10) -> SampledSystem:
    """Scalar test system dx/dt = -x + u with the closed-form solution
    x(t) = u + (x0 - u) * exp(-t); used as an integration oracle."""

    def field(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        return u - x

    return SampledSystem(dim_x=1, dim_u=1, field=field, lipschitz=1.0,
                         tau=tau, input_lo=(-1.0,), input_hi=(1.0,),
                         integrator_steps=integrator_steps, vectorized=True,
                         name="linear")


_SYSTEMS: dict[str, Callable[..., SampledSystem]] = {
    "pendulum": pendulum_system,
    "linear": linear_system,
}


def register_system(name: str, factory: Callable[..., SampledSystem]):
    """Register a user-defined system factory for selection by name."""
    _SYSTEMS[str(name)] = factory


def make_system(name: str, **kwargs) -> SampledSystem:
    """Instantiate a registered system, forwarding keyword overrides."""
    try:
        factory = _SYSTEMS[name]
    except KeyError:
        known = ", ".join(sorted(_SYSTEMS))
        raise ValueError(f"unknown system {name!r} (registered: {known})") from None
    return factory(**kwargs)
