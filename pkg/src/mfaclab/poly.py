"""Polynomials in the backward-shift operator z^-1.

A :class:`Polynomial` stores ``c0 + c1 z^-1 + ... + cd z^-d`` as the tuple
``(c0, ..., cd)``.  Roots are always reported in the z-plane, i.e. as the
roots of ``z^d p(z^-1) = c0 z^d + c1 z^(d-1) + ... + cd``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import IllPosedIdentityError

__all__ = [
    "Polynomial",
    "as_poly",
    "poly_add",
    "poly_sub",
    "poly_mul",
    "poly_roots",
    "is_stable",
    "diophantine_g",
    "ONE",
    "ZERO",
    "DELTA",
]

# Trailing coefficients below this magnitude are dropped.
CANON_TOL = 1e-14

Number = Union[int, float]


def _canonical(coeffs: Iterable[float]) -> tuple:
    c = [float(x) for x in coeffs]
    if not c:
        return (0.0,)
    while len(c) > 1 and abs(c[-1]) < CANON_TOL:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in z^-1; entry ``i`` of ``coeffs`` multiplies z^-i."""

    coeffs: tuple
    # numpy scalars on the left would otherwise try to broadcast over us
    __array_ufunc__ = None

    def __init__(self, coeffs: Union[Sequence[float], np.ndarray, Number] = (0.0,)):
        if isinstance(coeffs, (int, float, np.number)):
            coeffs = (coeffs,)
        object.__setattr__(self, "coeffs", _canonical(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __getitem__(self, i):
        """Coefficient of z^-i; zero beyond the degree."""
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return 0.0

    def is_zero(self) -> bool:
        return self.coeffs == (0.0,) or all(abs(c) < CANON_TOL for c in self.coeffs)

    def to_array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)

    def shift(self, n: int = 1) -> "Polynomial":
        """Multiply by z^-n."""
        if self.is_zero():
            return self
        return Polynomial((0.0,) * n + self.coeffs)

    def __add__(self, other):
        return poly_add(self, as_poly(other))

    __radd__ = __add__

    def __sub__(self, other):
        return poly_sub(self, as_poly(other))

    def __rsub__(self, other):
        return poly_sub(as_poly(other), self)

    def __neg__(self):
        return Polynomial([-c for c in self.coeffs])

    def __mul__(self, other):
        return poly_mul(self, as_poly(other))

    __rmul__ = __mul__

    def __call__(self, z_inv):
        """Evaluate at a value of z^-1 (Horner)."""
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * z_inv + c
        return acc

    def __repr__(self):
        terms = []
        for i, c in enumerate(self.coeffs):
            if i == 0:
                terms.append(f"{c:g}")
            elif c != 0.0:
                terms.append(f"{c:+g}z^-{i}")
        return "Polynomial(" + " ".join(terms) + ")"


def as_poly(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    return Polynomial(p)


ONE = Polynomial((1.0,))
ZERO = Polynomial((0.0,))
# The difference operator 1 - z^-1.
DELTA = Polynomial((1.0, -1.0))


def poly_add(a: Polynomial, b: Polynomial) -> Polynomial:
    n = max(len(a.coeffs), len(b.coeffs))
    return Polynomial([a[i] + b[i] for i in range(n)])


def poly_sub(a: Polynomial, b: Polynomial) -> Polynomial:
    n = max(len(a.coeffs), len(b.coeffs))
    return Polynomial([a[i] - b[i] for i in range(n)])


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    x, y = a.coeffs, b.coeffs
    # Plain convolution; the degrees here are far too small for FFTs or numpy
    # call overhead to pay off.
    out = [0.0] * (len(x) + len(y) - 1)
    for i, xi in enumerate(x):
        if xi != 0.0:
            for j, yj in enumerate(y):
                out[i + j] += xi * yj
    return Polynomial(out)


def poly_roots(p: Polynomial) -> list:
    """z-plane roots of ``z^d p(z^-1)`` via companion-matrix eigenvalues.

    A constant polynomial has no roots and yields ``[]``.  Vanishing leading
    coefficients ``c0, c1, ...`` correspond to roots at infinity and are not
    listed; :func:`is_stable` treats them as unstable.
    """
    p = as_poly(p)
    if p.degree < 1:
        return []
    return [complex(r) for r in np.roots(p.coeffs)]


# Companion-matrix roots carry ~1e-15 relative error, so a root exactly on
# the boundary can come back a hair inside it; anything this close counts
# as on the circle.
BOUNDARY_TOL = 1e-9


def is_stable(p: Polynomial, margin: float = 0.0) -> bool:
    """True iff every z-plane root lies strictly inside radius ``1 - margin``.

    Roots within ``BOUNDARY_TOL`` of that radius are treated as on it.
    """
    p = as_poly(p)
    if p.is_zero():
        return False
    scale = max(abs(c) for c in p.coeffs)
    if abs(p.coeffs[0]) <= CANON_TOL * scale:
        return False
    return all(abs(r) < 1.0 - margin - BOUNDARY_TOL for r in poly_roots(p))


def diophantine_g(phi_lw: Polynomial, phi_ly: Polynomial, p: Polynomial) -> Polynomial:
    """Solve ``z^-1 G = (1 + z^-1 phi_lw) P - (1 - z^-1 phi_ly)`` for G.

    P must be monic so that the constant terms of the right-hand side cancel.
    """
    phi_lw, phi_ly, p = as_poly(phi_lw), as_poly(phi_ly), as_poly(p)
    if abs(p[0] - 1.0) > 1e-12:
        raise IllPosedIdentityError(
            f"P must have constant term 1 to solve for G, got {p[0]!r}"
        )
    rhs = (ONE + phi_lw.shift(1)) * p - (ONE - phi_ly.shift(1))
    # rhs[0] = P(0) - 1, zero up to rounding.
    return Polynomial(rhs.coeffs[1:] or (0.0,))
