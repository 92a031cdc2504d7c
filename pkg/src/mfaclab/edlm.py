"""Equivalent dynamic linearization: PG vectors, regressors and conversions.

The incremental model is

    dy(k+1) = phi(k)^T dH(k) + dw(k+1)

with ``dH(k) = [dy(k..k-Ly+1), du(k..k-Lu+1), dv(k..k-Lv+1), dw(k..k-Lw+1)]``,
newest sample first inside each segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .poly import ONE, ZERO, Polynomial, as_poly

__all__ = [
    "Orders",
    "PGVector",
    "HistoryBuffer",
    "build_delta_h",
    "predict_delta_y",
    "darma_to_pg",
    "armax_to_pg",
    "pg_to_darma",
]

SIGNALS = ("y", "u", "v", "w", "r")


@dataclass(frozen=True)
class Orders:
    """Pseudo orders of the output, input, measured and unmeasured segments."""

    ly: int = 1
    lu: int = 1
    lv: int = 0
    lw: int = 0

    def __post_init__(self):
        for name in ("ly", "lu", "lv", "lw"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"order {name} must be an integer")
        if self.ly < 1 or self.lu < 1:
            raise ValueError(f"need ly >= 1 and lu >= 1, got ly={self.ly}, lu={self.lu}")
        if self.lv < 0 or self.lw < 0:
            raise ValueError(f"need lv, lw >= 0, got lv={self.lv}, lw={self.lw}")

    @property
    def size(self) -> int:
        return self.ly + self.lu + self.lv + self.lw

    def slices(self):
        """Index slices of the y, u, v and w segments."""
        a = self.ly
        b = a + self.lu
        c = b + self.lv
        d = c + self.lw
        return slice(0, a), slice(a, b), slice(b, c), slice(c, d)

    @property
    def max_lag(self) -> int:
        return max(self.ly, self.lu, self.lv, self.lw)


@dataclass(frozen=True, eq=False)
class PGVector:
    """Partitioned pseudo-gradient vector.

    ``values`` is stored as a read-only float array.  When ``bound_b`` is set
    the Euclidean norm must not exceed it.
    """

    orders: Orders
    values: np.ndarray
    bound_b: Optional[float] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.orders.size:
            raise ValueError(
                f"PG vector has {v.size} entries, orders require {self.orders.size}"
            )
        if self.bound_b is not None:
            if self.bound_b <= 0:
                raise ValueError("bound_b must be positive")
            if np.linalg.norm(v) > self.bound_b:
                raise ValueError(
                    f"||phi|| = {np.linalg.norm(v):.6g} exceeds bound b = {self.bound_b}"
                )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, orders: Orders) -> "PGVector":
        return cls(orders, np.zeros(orders.size))

    def with_values(self, values) -> "PGVector":
        return PGVector(self.orders, values, self.bound_b)

    def __len__(self):
        return self.orders.size

    def __eq__(self, other):
        if not isinstance(other, PGVector):
            return NotImplemented
        return self.orders == other.orders and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"PGVector({self.orders}, {list(self.values)})"

    def segment(self, name: str) -> np.ndarray:
        sy, su, sv, sw = self.orders.slices()
        return self.values[{"y": sy, "u": su, "v": sv, "w": sw}[name]]

    def _poly(self, name: str) -> Polynomial:
        seg = self.segment(name)
        return Polynomial(seg) if seg.size else ZERO

    @property
    def phi_ly(self) -> Polynomial:
        return self._poly("y")

    @property
    def phi_lu(self) -> Polynomial:
        return self._poly("u")

    @property
    def phi_lv(self) -> Polynomial:
        return self._poly("v")

    @property
    def phi_lw(self) -> Polynomial:
        return self._poly("w")

    @property
    def gain(self) -> float:
        """The leading input coefficient phi_{Ly+1}."""
        return float(self.values[self.orders.ly])


class HistoryBuffer:
    """Ring buffers of the loop signals indexed by absolute time.

    Signals: ``y`` output, ``u`` input, ``v`` measured disturbance, ``w``
    unmeasured disturbance (its estimate in closed loop) and ``r`` the
    reference, where ``r`` at time j holds y*(j).  Times before ``start``
    read as zero; reading further back than ``depth`` samples from the
    newest write raises.
    """

    def __init__(self, depth: int = 16, start: int = 0):
        if depth < 2:
            raise ValueError("depth must be at least 2")
        self.depth = int(depth)
        self.start = int(start)
        self._buf = {s: [0.0] * self.depth for s in SIGNALS}
        self._latest = {s: self.start - 1 for s in SIGNALS}

    @classmethod
    def for_orders(cls, orders: Orders, margin: int = 4, start: int = 0) -> "HistoryBuffer":
        return cls(depth=orders.max_lag + margin + 2, start=start)

    @property
    def k(self) -> int:
        """Newest time at which the output is known."""
        return self._latest["y"]

    def latest(self, name: str) -> int:
        return self._latest[name]

    def set(self, name: str, j: int, value: float) -> None:
        if j < self.start:
            raise IndexError(f"time {j} precedes buffer start {self.start}")
        last = self._latest[name]
        buf = self._buf[name]
        if j > last + 1:
            # Gap: samples in between are treated as zero.
            for t in range(max(last + 1, j - self.depth + 1), j):
                buf[t % self.depth] = 0.0
        elif j <= last - self.depth:
            raise IndexError(f"time {j} is older than the buffer depth")
        buf[j % self.depth] = float(value)
        if j > last:
            self._latest[name] = j

    def get(self, name: str, j: int) -> float:
        if j < self.start:
            return 0.0
        last = self._latest[name]
        if j > last:
            raise IndexError(f"{name}({j}) requested but newest sample is {name}({last})")
        if last - j >= self.depth:
            raise IndexError(f"{name}({j}) fell out of a buffer of depth {self.depth}")
        return self._buf[name][j % self.depth]

    def delta(self, name: str, j: int) -> float:
        return self.get(name, j) - self.get(name, j - 1)

    def preload(self, name: str, values: Sequence[float], newest: int) -> None:
        """Write ``values`` (oldest first) so the last one lands at ``newest``."""
        n = len(values)
        for i, x in enumerate(values):
            self.set(name, newest - n + 1 + i, x)


def build_delta_h(h: HistoryBuffer, o: Orders, k: Optional[int] = None) -> np.ndarray:
    """Regressor dH(k) ordered [dy | du | dv | dw], newest first per segment."""
    if k is None:
        k = h.k
    out = np.empty(o.size)
    i = 0
    for name, n in (("y", o.ly), ("u", o.lu), ("v", o.lv), ("w", o.lw)):
        for lag in range(n):
            out[i] = h.delta(name, k - lag)
            i += 1
    return out


def predict_delta_y(phi: PGVector, delta_h, delta_w_next: float = 0.0) -> float:
    dh = np.asarray(delta_h, dtype=float).reshape(-1)
    if dh.size != phi.values.size:
        raise ValueError(f"regressor length {dh.size} != PG length {phi.values.size}")
    return float(phi.values @ dh) + float(delta_w_next)


def _segment(poly: Polynomial, n: int, name: str) -> list:
    c = list(as_poly(poly).coeffs)
    if as_poly(poly).is_zero():
        c = []
    if len(c) > n:
        raise ValueError(f"order {name}={n} too small for {len(c)} coefficients")
    return c + [0.0] * (n - len(c))


def armax_to_pg(a, b, c=None, o: Orders = None, bv=None) -> PGVector:
    """PG vector of ``A y(k+1) = B u(k) + Bv v(k) + C zeta(k)``.

    Uses the identification w(k+1) = zeta(k), exact for monic C, so that the
    w segment holds c1..c_nc.  ``bv`` fills the measured-disturbance segment.
    """
    if o is None:
        raise TypeError("orders are required")
    a = as_poly(a)
    if abs(a[0] - 1.0) > 1e-12:
        raise ValueError(f"A must be monic, got constant term {a[0]!r}")
    alpha = Polynomial([-x for x in a.coeffs[1:]] or (0.0,))
    values = _segment(alpha, o.ly, "ly") + _segment(b, o.lu, "lu")
    values += _segment(bv if bv is not None else ZERO, o.lv, "lv")
    if c is None:
        c = ONE
    c = as_poly(c)
    if abs(c[0] - 1.0) > 1e-12:
        raise ValueError(f"C must be monic, got constant term {c[0]!r}")
    gamma_tail = Polynomial(c.coeffs[1:] or (0.0,))
    values += _segment(gamma_tail, o.lw, "lw")
    return PGVector(o, values)


def darma_to_pg(a, b, o: Orders) -> PGVector:
    """PG vector of the DARMA plant ``A y(k+1) = B u(k)``."""
    return armax_to_pg(a, b, None, o)


def pg_to_darma(phi: PGVector):
    """Inverse of :func:`darma_to_pg`: returns (A, B) with A = 1 - z^-1 phi_Ly."""
    return ONE - phi.phi_ly.shift(1), phi.phi_lu
