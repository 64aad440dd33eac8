"""Logarithmic state quantization and lattice cell geometry.

A scalar logarithmic quantizer partitions the real line into a closed
deadzone ``[-s, s]`` around zero plus geometrically spaced half-open regions
on either side.  With density parameter ``eta`` in (0, 1) and
``rho = (1 - eta) / (1 + eta)``, the m-th positive region is

    ( s * rho**(1 - m),  s * rho**(-m) ],      m = 1, 2, ...

and its quantized value is ``(1 + eta) * s * rho**(1 - m)``, which keeps the
relative quantization error within ``eta`` outside the deadzone.  Negative
regions mirror the positive ones, so the quantizer is odd.

Two anchoring conventions for the scale parameter are supported (see
:class:`QuantizerVariant`); they produce the same family of partitions and
only differ in which constant the user fixes.

An n-dimensional :class:`LogLattice` applies one axis quantizer per state
dimension and clips the resulting product cells to a bounding box: a level is
kept on an axis exactly when its quantized value lies inside the bounds, and
the outermost kept cell on each side absorbs the remaining sliver up to the
bound.  The clipped cells therefore partition the bounds box, every cell
contains its own center, and quantization is a well-defined map from the box
onto the cells.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import OutOfDomainError

__all__ = [
    "QuantizerVariant",
    "LogQuantizerAxis",
    "LogLattice",
    "Box",
    "scalar_quantize",
    "vector_quantize",
    "cell_bounds",
    "cell_center",
    "levels_overlapping_interval",
    "enumerate_cells",
    "format_cell",
    "parse_cell",
]

# Relative tolerance used to snap log-domain level estimates onto region
# boundaries before the exact neighbor comparison takes over.
_BOUNDARY_RTOL = 1e-12


class QuantizerVariant(Enum):
    """Which constant anchors the level geometry.

    VALUE_ANCHORED: the scale is the first positive quantized value
        (deadzone edge ``scale / (1 + eta)``).
    EDGE_ANCHORED: the scale is the deadzone edge itself (first positive
        quantized value ``(1 + eta) * scale``).
    """

    VALUE_ANCHORED = "value_anchored"
    EDGE_ANCHORED = "edge_anchored"


@dataclass(frozen=True)
class LogQuantizerAxis:
    """Scalar logarithmic quantizer for one state axis.

    Immutable; all operations are pure functions of (eta, scale, variant).
    """

    eta: float
    scale: float
    variant: QuantizerVariant = QuantizerVariant.VALUE_ANCHORED

    def __post_init__(self):
        if not (math.isfinite(self.eta) and 0.0 < self.eta < 1.0):
            raise ValueError(f"eta must lie in (0, 1), got {self.eta!r}")
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise ValueError(f"scale must be positive, got {self.scale!r}")
        if not isinstance(self.variant, QuantizerVariant):
            object.__setattr__(self, "variant", QuantizerVariant(self.variant))

    @property
    def rho(self) -> float:
        """Quantization density (1 - eta) / (1 + eta)."""
        return (1.0 - self.eta) / (1.0 + self.eta)

    @property
    def deadzone(self) -> float:
        """Upper edge of the closed deadzone [-deadzone, deadzone]."""
        if self.variant is QuantizerVariant.VALUE_ANCHORED:
            return self.scale / (1.0 + self.eta)
        return self.scale

    @property
    def _value_scale(self) -> float:
        # first positive quantized value; equals (1 + eta) * deadzone
        if self.variant is QuantizerVariant.VALUE_ANCHORED:
            return self.scale
        return (1.0 + self.eta) * self.scale

    def level_value(self, level: int) -> float:
        """Quantized value of a signed level (0 maps to 0.0)."""
        if level == 0:
            return 0.0
        v = self._value_scale * self.rho ** (1 - abs(level))
        return v if level > 0 else -v

    def boundary(self, m: int) -> float:
        """Left edge of positive region m (m >= 1); ``boundary(1)`` is the
        deadzone edge and ``boundary(m + 1)`` is region m's right edge."""
        return self.deadzone * self.rho ** (1 - m)

    def region(self, level: int) -> tuple[float, float]:
        """Unclipped region of a signed level as an (lo, hi) pair.

        Boundary ownership: positive regions are left-open/right-closed,
        negative regions left-closed/right-open, the deadzone closed on both
        sides; adjacent regions therefore never share interior points.
        """
        if level == 0:
            return (-self.deadzone, self.deadzone)
        m = abs(level)
        lo, hi = self.boundary(m), self.boundary(m + 1)
        return (lo, hi) if level > 0 else (-hi, -lo)

    def quantize(self, z: float) -> tuple[int, float]:
        """Map a finite scalar to its (signed level, quantized value).

        Oddness is structural: quantize(-z) is exactly the negation of
        quantize(z).
        """
        z = float(z)
        if not math.isfinite(z):
            raise ValueError(f"cannot quantize non-finite value {z!r}")
        if z < 0.0:
            m, v = self.quantize(-z)
            return -m, -v
        if z <= self.deadzone:
            return 0, 0.0
        m = self._positive_level(z)
        return m, self.level_value(m)

    def _positive_level(self, z: float) -> int:
        # closed-form candidate from the log-spaced boundaries ...
        t = math.log(z / self.deadzone) / math.log(1.0 / self.rho)
        nearest = round(t)
        if nearest >= 1 and abs(t - nearest) <= _BOUNDARY_RTOL * max(1.0, abs(t)):
            m = int(nearest)  # boundary points belong to the right-closed side
        else:
            m = max(1, math.ceil(t))
        # ... then exact neighbor comparison settles boundary rounding
        while m > 1 and z <= self.boundary(m):
            m -= 1
        while z > self.boundary(m + 1):
            m += 1
        return m

    def levels_overlapping(self, a: float, b: float) -> list[int]:
        """All signed levels whose regions intersect the closed interval
        [a, b], in ascending order; computed from the log-spaced boundaries,
        not by scanning."""
        a, b = float(a), float(b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("interval endpoints must be finite")
        if a > b:
            raise ValueError(f"empty interval: a={a!r} > b={b!r}")
        out = [-m for m in reversed(self._positive_overlap(-b, -a))]
        dz = self.deadzone
        if b >= -dz and a <= dz:
            out.append(0)
        out.extend(self._positive_overlap(a, b))
        return out

    def _positive_overlap(self, a: float, b: float) -> list[int]:
        # positive level m intersects [a, b] iff b > boundary(m) and
        # a <= boundary(m + 1)
        dz = self.deadzone
        if b <= dz:
            return []
        log_inv_rho = math.log(1.0 / self.rho)
        t_hi = math.log(b / dz) / log_inv_rho
        m_hi = max(1, math.ceil(t_hi))
        while m_hi >= 1 and b <= self.boundary(m_hi):
            m_hi -= 1
        while b > self.boundary(m_hi + 1):
            m_hi += 1
        if a <= dz:
            m_lo = 1
        else:
            t_lo = math.log(a / dz) / log_inv_rho
            m_lo = max(1, math.ceil(t_lo))
            while m_lo > 1 and a <= self.boundary(m_lo):
                m_lo -= 1
            while a > self.boundary(m_lo + 1):
                m_lo += 1
        return list(range(m_lo, m_hi + 1))


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box with per-face openness flags.

    ``lo_open[i]`` / ``hi_open[i]`` record whether the corresponding face is
    excluded, so adjacent quantization cells never double-claim boundary
    points.
    """

    lo: np.ndarray
    hi: np.ndarray
    lo_open: np.ndarray
    hi_open: np.ndarray

    def __post_init__(self):
        for name, dtype in (("lo", float), ("hi", float),
                            ("lo_open", bool), ("hi_open", bool)):
            arr = np.asarray(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x) -> bool:
        return bool(self.contains_many(np.asarray(x, float)[None, :])[0])

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership respecting face openness."""
        pts = np.asarray(pts, float)
        above = np.where(self.lo_open, pts > self.lo, pts >= self.lo)
        below = np.where(self.hi_open, pts < self.hi, pts <= self.hi)
        return (above & below).all(axis=1)

    def __repr__(self):  # pragma: no cover - debugging aid
        sides = []
        for i in range(self.dim):
            lb = "(" if self.lo_open[i] else "["
            rb = ")" if self.hi_open[i] else "]"
            sides.append(f"{lb}{self.lo[i]:g}, {self.hi[i]:g}{rb}")
        return "Box(" + " x ".join(sides) + ")"


@dataclass(frozen=True, eq=False)
class LogLattice:
    """Product of per-axis logarithmic quantizers clipped to a bounds box.

    The bounds must contain every axis deadzone.  On each axis the valid
    levels are 0 plus every signed level whose quantized value lies inside
    [lo_i, hi_i]; the outermost valid cell on each side extends to the bound,
    so the clipped cells partition the bounds box exactly.

    Immutable after construction; all queries are pure functions.
    """

    axes: tuple[LogQuantizerAxis, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        axes = tuple(self.axes)
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        n = len(axes)
        if n < 1:
            raise ValueError("lattice needs at least one axis")
        if len(lo) != n or len(hi) != n:
            raise ValueError("bounds dimension does not match axis count")
        pos_max, neg_max = [], []
        for i, axis in enumerate(axes):
            if not (lo[i] < hi[i]):
                raise ValueError(f"axis {i}: need lo < hi, got [{lo[i]}, {hi[i]}]")
            dz = axis.deadzone
            if lo[i] > -dz or hi[i] < dz:
                raise ValueError(
                    f"axis {i}: bounds [{lo[i]}, {hi[i]}] must contain the "
                    f"deadzone [-{dz}, {dz}]")
            pos_max.append(self._max_level(axis, hi[i]))
            neg_max.append(self._max_level(axis, -lo[i]))
        object.__setattr__(self, "_pos_max", tuple(pos_max))
        object.__setattr__(self, "_neg_max", tuple(neg_max))
        lo_arr = np.array(lo, float)
        hi_arr = np.array(hi, float)
        lo_arr.setflags(write=False)
        hi_arr.setflags(write=False)
        object.__setattr__(self, "lo_array", lo_arr)
        object.__setattr__(self, "hi_array", hi_arr)

    @staticmethod
    def _max_level(axis: LogQuantizerAxis, limit: float) -> int:
        # largest m >= 1 whose quantized value fits below `limit`, else 0
        first = axis.level_value(1)
        if limit < first:
            return 0
        t = math.log(limit / first) / math.log(1.0 / axis.rho)
        m = int(t) + 1
        while axis.level_value(m + 1) <= limit:
            m += 1
        while m > 1 and axis.level_value(m) > limit:
            m -= 1
        return m

    @classmethod
    def from_params(cls, eta, scales, lo, hi,
                    variant=QuantizerVariant.VALUE_ANCHORED) -> "LogLattice":
        """Build a lattice with one shared density `eta` and per-axis scales."""
        scales = np.atleast_1d(np.asarray(scales, float))
        axes = tuple(LogQuantizerAxis(float(eta), float(s), QuantizerVariant(variant))
                     for s in scales)
        return cls(axes, tuple(np.atleast_1d(lo)), tuple(np.atleast_1d(hi)))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shared_eta(self) -> float:
        """The single density shared by all axes (raises if heterogeneous)."""
        etas = {axis.eta for axis in self.axes}
        if len(etas) != 1:
            raise ValueError("lattice axes use different eta values")
        return next(iter(etas))

    def axis_levels(self, i: int) -> range:
        """Valid signed levels on axis i, ascending."""
        return range(-self._neg_max[i], self._pos_max[i] + 1)

    def is_valid(self, idx) -> bool:
        if len(idx) != self.dim:
            return False
        return all(-self._neg_max[i] <= m <= self._pos_max[i]
                   for i, m in enumerate(idx))

    def check_index(self, idx):
        if not self.is_valid(idx):
            raise OutOfDomainError(f"invalid cell index {idx!r} for this lattice")

    def center(self, idx) -> np.ndarray:
        """Quantized value (lattice point) of a cell."""
        self.check_index(idx)
        return np.array([axis.level_value(m) for axis, m in zip(self.axes, idx)])

    def cell_box(self, idx) -> Box:
        """Clipped cell geometry with per-face openness metadata."""
        self.check_index(idx)
        lo, hi, lo_open, hi_open = [], [], [], []
        for i, (axis, m) in enumerate(zip(self.axes, idx)):
            pos_max, neg_max = self._pos_max[i], self._neg_max[i]
            if m == 0:
                dz = axis.deadzone
                lo.append(-dz if neg_max > 0 else self.lo[i])
                hi.append(dz if pos_max > 0 else self.hi[i])
                lo_open.append(False)
                hi_open.append(False)
            elif m > 0:
                lo.append(axis.boundary(m))
                hi.append(axis.boundary(m + 1) if m < pos_max else self.hi[i])
                lo_open.append(True)
                hi_open.append(False)
            else:
                mm = -m
                lo.append(-axis.boundary(mm + 1) if mm < neg_max else self.lo[i])
                hi.append(-axis.boundary(mm))
                lo_open.append(False)
                hi_open.append(True)
        return Box(lo, hi, lo_open, hi_open)

    def quantize(self, x) -> tuple[int, ...]:
        """Cell index of a point inside the bounds box.

        Raw per-axis levels beyond the outermost valid level are absorbed
        into the outermost cell (whose box extends to the bound).
        """
        x = np.asarray(x, float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}")
        levels = []
        for i, axis in enumerate(self.axes):
            xi = float(x[i])
            if not (self.lo[i] <= xi <= self.hi[i]):
                raise OutOfDomainError(
                    f"component {i} = {xi!r} outside [{self.lo[i]}, {self.hi[i]}]")
            m = axis.quantize(xi)[0]
            levels.append(min(max(m, -self._neg_max[i]), self._pos_max[i]))
        return tuple(levels)

    def enumerate_cells(self) -> list[tuple[int, ...]]:
        """All valid cells in lexicographic level order."""
        return list(itertools.product(*(self.axis_levels(i)
                                        for i in range(self.dim))))

    def cell_count(self) -> int:
        count = 1
        for i in range(self.dim):
            count *= self._neg_max[i] + 1 + self._pos_max[i]
        return count

    def levels_in_interval(self, i: int, a: float, b: float) -> list[int]:
        """Valid levels on axis i whose clipped cells intersect [a, b]."""
        a2, b2 = max(a, self.lo[i]), min(b, self.hi[i])
        if a2 > b2:
            return []
        raw = self.axes[i].levels_overlapping(a2, b2)
        out: list[int] = []
        for m in raw:
            mc = min(max(m, -self._neg_max[i]), self._pos_max[i])
            if not out or out[-1] != mc:
                out.append(mc)
        return out

    def sample_in_cell(self, idx, rng, count: int = 1) -> np.ndarray:
        """Uniform samples from a cell's box (boundary hits have measure zero)."""
        box = self.cell_box(idx)
        return rng.uniform(box.lo, box.hi, size=(count, self.dim))


def scalar_quantize(z: float, axis: LogQuantizerAxis) -> tuple[int, float]:
    """Quantize a scalar: returns (signed level, quantized value)."""
    return axis.quantize(z)


def vector_quantize(x, lattice: LogLattice) -> tuple[int, ...]:
    """Quantize a point inside the lattice bounds to its cell index."""
    return lattice.quantize(x)


def cell_bounds(idx, lattice: LogLattice) -> Box:
    """Clipped box of a cell, with half-open side metadata."""
    return lattice.cell_box(idx)


def cell_center(idx, lattice: LogLattice) -> np.ndarray:
    """Lattice point (quantized value) of a cell."""
    return lattice.center(idx)


def levels_overlapping_interval(a: float, b: float,
                                axis: LogQuantizerAxis) -> list[int]:
    """Signed levels whose (unclipped) regions intersect [a, b], ascending."""
    return axis.levels_overlapping(a, b)


def enumerate_cells(lattice: LogLattice) -> list[tuple[int, ...]]:
    """All valid cells of the lattice in lexicographic order."""
    return lattice.enumerate_cells()


def format_cell(idx) -> str:
    """Serialize a cell index as comma-separated signed integers."""
    return ",".join(str(int(m)) for m in idx)


def parse_cell(text: str) -> tuple[int, ...]:
    """Inverse of :func:`format_cell`."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError(f"empty cell index {text!r}")
    return tuple(int(p) for p in parts)
