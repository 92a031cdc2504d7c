"""The MFAC controller family and closed-loop characteristic polynomials.

Every law is evaluated at time ``k = h.k``: the history must hold y up to
y(k), u up to u(k-1), v up to v(k) and the reference y* up to y*(k).  The
next reference y*(k+1) is passed explicitly.  Operator products such as
``Lambda(z^-1) du(k)`` are expanded over the buffered past; only the lag-0
coefficient of du(k) is inverted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .edlm import HistoryBuffer, Orders, PGVector
from .errors import GainSingularError
from .poly import DELTA, ONE, ZERO, Polynomial, as_poly, diophantine_g

__all__ = [
    "VARIANTS",
    "VARIANT_ALIASES",
    "ControllerConfig",
    "SDesign",
    "canonical_variant",
    "mfac_basic",
    "mfac_lambda",
    "gmfac_stochastic",
    "gmfac_poly",
    "gmfac_measured",
    "design_s",
    "char_poly_basic",
    "char_poly_general",
    "mvc_baseline",
    "control_increment",
    "one_step_residual",
]

VARIANTS = (
    "basic",
    "lambda_weighted",
    "stochastic",
    "poly_cost",
    "measured_disturbance",
    "mvc_baseline",
)

VARIANT_ALIASES = {
    "mfac_basic": "basic",
    "mfac_lambda": "lambda_weighted",
    "gmfac_stochastic": "stochastic",
    "gmfac_poly": "poly_cost",
    "gmfac_measured": "measured_disturbance",
    "mvc": "mvc_baseline",
}


def canonical_variant(name: str) -> str:
    name = VARIANT_ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ValueError(f"unknown controller variant {name!r}")
    return name


@dataclass(frozen=True)
class ControllerConfig:
    """Tuning of one controller.

    ``lam`` weights du in the basic/lambda laws; ``p_poly``, ``r_poly``,
    ``lambda_poly`` and ``s_poly`` are the costing polynomials of the
    generalized laws.  With ``design_s`` set, the measured-disturbance law
    recomputes S from the current estimate every step.
    """

    orders: Orders = field(default_factory=Orders)
    variant: str = "lambda_weighted"
    lam: float = 0.0
    p_poly: Polynomial = ONE
    r_poly: Polynomial = ONE
    lambda_poly: Polynomial = ZERO
    s_poly: Polynomial = ZERO
    epsilon_gain: float = 1e-8
    design_s: bool = False
    s_max_degree: int = 10

    def __post_init__(self):
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        for name in ("p_poly", "r_poly", "lambda_poly", "s_poly"):
            object.__setattr__(self, name, as_poly(getattr(self, name)))
        if abs(self.p_poly[0] - 1.0) > 1e-12:
            raise ValueError(f"P must have constant term 1, got {self.p_poly[0]}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.lambda_poly[0] < 0:
            raise ValueError("Lambda's leading coefficient must be non-negative")
        if not self.epsilon_gain > 0:
            raise ValueError("epsilon_gain must be positive")

    @property
    def lambda0(self) -> float:
        return self.lambda_poly[0]

    def with_(self, **changes) -> "ControllerConfig":
        return replace(self, **changes)


class SDesign(NamedTuple):
    s: Polynomial
    residual: float


def _conv(coeffs, h: HistoryBuffer, name: str, k: int) -> float:
    """sum_j c_j x(k - j)."""
    return sum(c * h.get(name, k - j) for j, c in enumerate(coeffs) if c != 0.0)


def _conv_delta(coeffs, h: HistoryBuffer, name: str, k: int) -> float:
    """sum_j c_j dx(k - j)."""
    return sum(c * h.delta(name, k - j) for j, c in enumerate(coeffs) if c != 0.0)


def _ref(h: HistoryBuffer, j: int, k: int, y_star_next: float) -> float:
    return y_star_next if j == k + 1 else h.get("r", j)


def _conv_ref(coeffs, h, k, y_star_next) -> float:
    """sum_j c_j y*(k + 1 - j)."""
    return sum(c * _ref(h, k + 1 - j, k, y_star_next) for j, c in enumerate(coeffs) if c != 0.0)


def _bracket(phi: PGVector, h: HistoryBuffer, y_star_next: float) -> float:
    """y*(k+1) - y(k) minus the known y and u parts of phi^T dH(k)."""
    k = h.k
    o = phi.orders
    v = phi.values
    acc = y_star_next - h.get("y", k)
    for i in range(o.ly):
        acc -= v[i] * h.delta("y", k - i)
    for i in range(1, o.lu):
        acc -= v[o.ly + i] * h.delta("u", k - i)
    return acc


def mfac_basic(phi: PGVector, h: HistoryBuffer, y_star_next: float,
               epsilon_gain: float = 1e-8) -> float:
    """Dead-beat increment: exact inversion of the EDLM one step ahead."""
    g = phi.gain
    if abs(g) <= epsilon_gain:
        raise GainSingularError(f"|phi_Ly+1| = {abs(g):.3g} <= {epsilon_gain:.3g}")
    return _bracket(phi, h, y_star_next) / g


def mfac_lambda(phi: PGVector, h: HistoryBuffer, y_star_next: float, lam: float,
                epsilon_gain: float = 1e-8) -> float:
    """Minimizer of |y*(k+1) - y(k+1)|^2 + lam |du(k)|^2."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam == 0:
        return mfac_basic(phi, h, y_star_next, epsilon_gain)
    g = phi.gain
    return g / (lam + g * g) * _bracket(phi, h, y_star_next)


def gmfac_stochastic(phi: PGVector, h: HistoryBuffer, y_star_next: float,
                     epsilon_gain: float = 1e-8) -> float:
    """Increment that leaves only dw(k+1) in the tracking error.

    The tracking error is filtered by (1 + z^-1 phi_Lw), so the unmeasured
    noise never has to be estimated by the law itself.
    """
    g = phi.gain
    if abs(g) <= epsilon_gain:
        raise GainSingularError(f"|phi_Ly+1| = {abs(g):.3g} <= {epsilon_gain:.3g}")
    k = h.k
    o = phi.orders
    w = phi.segment("w")
    acc = _bracket(phi, h, y_star_next)
    for i, c in enumerate(w, start=1):
        acc += c * (_ref(h, k + 1 - i, k, y_star_next) - h.get("y", k - i))
        acc -= c * h.delta("y", k - i + 1)
    return acc / g


def _gmfac(phi: PGVector, cfg: ControllerConfig, h: HistoryBuffer, y_star_next: float,
           s_poly: Polynomial = None, v_terms: bool = False) -> float:
    g = phi.gain
    lam0 = cfg.lambda0
    if math.hypot(lam0, g) <= cfg.epsilon_gain:
        raise GainSingularError("instantaneous coefficient of du(k) vanishes")
    k = h.k
    cw = ONE + phi.phi_lw.shift(1)
    G = diophantine_g(phi.phi_lw, phi.phi_ly, cfg.p_poly)
    # Everything is multiplied through by phi_Ly+1 so that lam0/phi_Ly+1
    # never has to be formed.
    m = (lam0 * (cw * cfg.lambda_poly) + g * phi.phi_lu).coeffs
    rhs = _conv_ref((cw * cfg.r_poly).coeffs, h, k, y_star_next)
    rhs -= _conv((cw * cfg.p_poly).coeffs, h, "y", k)
    rhs -= _conv_delta(G.coeffs, h, "y", k)
    if v_terms:
        if s_poly is not None and not s_poly.is_zero():
            rhs -= _conv((cw * s_poly).coeffs, h, "v", k)
        rhs -= _conv_delta(phi.segment("v"), h, "v", k)
    rhs *= g
    for j in range(1, len(m)):
        if m[j] != 0.0:
            rhs -= m[j] * h.delta("u", k - j)
    return rhs / m[0]


def gmfac_poly(phi: PGVector, cfg: ControllerConfig, h: HistoryBuffer,
               y_star_next: float) -> float:
    """Generalized law for the cost [R y* - P y(k+1)]^2 + [Lambda du(k)]^2."""
    return _gmfac(phi, cfg, h, y_star_next)


def gmfac_measured(phi: PGVector, cfg: ControllerConfig, h: HistoryBuffer,
                   y_star_next: float, s_poly: Polynomial = None) -> float:
    """Generalized law with feedforward of the measured disturbance v.

    ``s_poly`` overrides ``cfg.s_poly``; v(k) must already be in ``h``.
    """
    s = cfg.s_poly if s_poly is None else as_poly(s_poly)
    return _gmfac(phi, cfg, h, y_star_next, s_poly=s, v_terms=True)


def design_s(cfg: ControllerConfig, phi: PGVector, max_degree: int = None) -> SDesign:
    """Feedforward polynomial S cancelling v in the closed loop.

    Target: (lam0/phi_Ly+1) Lambda phi_Lv (1 - z^-1) = phi_Lu S.  S is the
    long-division quotient truncated at ``max_degree``; ``residual`` is the
    max-norm of the coefficients left over.
    """
    if max_degree is None:
        max_degree = cfg.s_max_degree
    lam0 = cfg.lambda0
    phi_lv = phi.phi_lv
    if lam0 == 0.0 or phi_lv.is_zero() or cfg.lambda_poly.is_zero():
        return SDesign(ZERO, 0.0)
    g = phi.gain
    if abs(g) <= cfg.epsilon_gain:
        raise GainSingularError("phi_Ly+1 too small to form lam0/phi_Ly+1")
    lead = phi.phi_lu[0]
    if abs(lead) <= cfg.epsilon_gain:
        raise GainSingularError("phi_Lu has a vanishing leading coefficient")
    target = (lam0 / g) * cfg.lambda_poly * phi_lv * DELTA
    den = phi.phi_lu.coeffs
    n = list(target.coeffs)
    q = []
    for i in range(max_degree + 1):
        acc = n[i] if i < len(n) else 0.0
        for j in range(1, min(i, len(den) - 1) + 1):
            acc -= den[j] * q[i - j]
        q.append(acc / lead)
    s = Polynomial(q)
    rest = target - phi.phi_lu * s
    return SDesign(s, max(abs(c) for c in rest.coeffs))


def char_poly_basic(phi: PGVector, lam: float) -> Polynomial:
    """T = lam (1 - z^-1)(1 - z^-1 phi_Ly) + phi_Ly+1 phi_Lu."""
    a = ONE - phi.phi_ly.shift(1)
    return lam * (DELTA * a) + phi.gain * phi.phi_lu


def char_poly_general(phi: PGVector, cfg: ControllerConfig) -> Polynomial:
    """T3 = (1 - z^-1 phi_Ly)(lam0/phi_Ly+1) Lambda (1 - z^-1) + P phi_Lu."""
    base = cfg.p_poly * phi.phi_lu
    lam0 = cfg.lambda0
    if lam0 == 0.0 or cfg.lambda_poly.is_zero():
        return base
    g = phi.gain
    if abs(g) <= cfg.epsilon_gain:
        raise GainSingularError("phi_Ly+1 too small to form lam0/phi_Ly+1")
    a = ONE - phi.phi_ly.shift(1)
    return (lam0 / g) * (a * cfg.lambda_poly * DELTA) + base


def mvc_baseline(a: Polynomial, b: Polynomial, h: HistoryBuffer, y_star_next: float,
                 epsilon_gain: float = 1e-8) -> float:
    """One-step minimum-variance law for A y(k+1) = B u(k); returns u(k)."""
    a, b = as_poly(a), as_poly(b)
    b1 = b[0]
    if abs(b1) <= epsilon_gain:
        raise GainSingularError(f"|b1| = {abs(b1):.3g} <= {epsilon_gain:.3g}")
    k = h.k
    acc = y_star_next
    for i in range(1, len(a)):
        acc += a[i] * h.get("y", k + 1 - i)
    for j in range(1, len(b)):
        acc -= b[j] * h.get("u", k - j)
    return acc / b1


def control_increment(cfg: ControllerConfig, phi: PGVector, h: HistoryBuffer,
                      y_star_next: float, s_poly: Polynomial = None) -> float:
    """Dispatch on ``cfg.variant``; always returns du(k)."""
    v = cfg.variant
    eps = cfg.epsilon_gain
    if v == "basic":
        return mfac_basic(phi, h, y_star_next, eps)
    if v == "lambda_weighted":
        return mfac_lambda(phi, h, y_star_next, cfg.lam, eps)
    if v == "stochastic":
        return gmfac_stochastic(phi, h, y_star_next, eps)
    if v == "poly_cost":
        return gmfac_poly(phi, cfg, h, y_star_next)
    if v == "measured_disturbance":
        return gmfac_measured(phi, cfg, h, y_star_next, s_poly)
    if v == "mvc_baseline":
        from .edlm import pg_to_darma

        a, b = pg_to_darma(phi)
        u = mvc_baseline(a, b, h, y_star_next, eps)
        return u - h.get("u", h.k - 1)
    raise ValueError(f"unknown variant {v!r}")


def one_step_residual(phi: PGVector, cfg: ControllerConfig, h: HistoryBuffer,
                      y_star_next: float, y_hat_next: float, delta_u: float,
                      s_poly: Polynomial = None) -> float:
    """R y*(k+1) - P yhat(k+1) [- S v(k)] - (lam0/phi_Ly+1) Lambda du(k).

    Zero when ``delta_u`` minimizes the generalized cost; ``y_hat_next`` is
    the EDLM prediction of y(k+1).
    """
    k = h.k
    g = phi.gain
    r = _conv_ref(cfg.r_poly.coeffs, h, k, y_star_next)
    p = cfg.p_poly.coeffs
    py = p[0] * y_hat_next + sum(p[j] * h.get("y", k + 1 - j) for j in range(1, len(p)))
    lam = cfg.lambda_poly.coeffs
    ldu = lam[0] * delta_u + sum(lam[j] * h.delta("u", k - j) for j in range(1, len(lam)))
    out = r - py
    if s_poly is not None:
        out -= _conv(as_poly(s_poly).coeffs, h, "v", k)
    if cfg.lambda0 != 0.0:
        out -= cfg.lambda0 / g * ldu
    return out
