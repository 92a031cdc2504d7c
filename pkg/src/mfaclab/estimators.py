"""Online PG-vector estimation.

All updates are pure: they take a state and return a new one.  The
regression is ``dy(k) = phi^T dH(k-1)``; no component of the estimate is
ever reset or sign-projected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .edlm import PGVector
from .errors import CovarianceBreakdownError

__all__ = [
    "EstimatorConfig",
    "ProjectionState",
    "RLSState",
    "projection_update",
    "rls_update",
    "update",
    "estimate_disturbance",
    "ESTIMATOR_KINDS",
]


ESTIMATOR_KINDS = ("projection", "rls", "none")


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator choice and tuning.

    ``kind`` is ``projection`` (``eta``, ``mu``), ``rls`` (``p0``,
    ``forgetting``) or ``none`` (estimate frozen at ``phi0``).
    """

    kind: str = "projection"
    eta: float = 1.0
    mu: float = 1.0
    p0: float = 1e6
    forgetting: float = 1.0
    phi0: tuple = ()

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        object.__setattr__(self, "phi0", tuple(float(x) for x in self.phi0))

    def initial_state(self, phi: PGVector):
        if self.kind == "projection":
            return ProjectionState(phi, self.eta, self.mu)
        if self.kind == "rls":
            return RLSState.initial(phi, self.p0, self.forgetting)
        return None


@dataclass(frozen=True)
class ProjectionState:
    phi_hat: PGVector
    eta: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True, eq=False)
class RLSState:
    phi_hat: PGVector
    covariance: np.ndarray
    forgetting: float = 1.0

    def __post_init__(self):
        p = np.array(self.covariance, dtype=float)
        n = self.phi_hat.values.size
        if p.shape != (n, n):
            raise ValueError(f"covariance must be {n}x{n}, got {p.shape}")
        if not 0.0 < self.forgetting <= 1.0:
            raise ValueError(f"forgetting must lie in (0, 1], got {self.forgetting}")
        p.setflags(write=False)
        object.__setattr__(self, "covariance", p)

    @classmethod
    def initial(cls, phi_hat: PGVector, p0: float = 1e6, forgetting: float = 1.0):
        return cls(phi_hat, p0 * np.eye(phi_hat.values.size), forgetting)


def _check(phi: PGVector, dh) -> np.ndarray:
    dh = np.asarray(dh, dtype=float).reshape(-1)
    if dh.size != phi.values.size:
        raise ValueError(f"regressor length {dh.size} != PG length {phi.values.size}")
    return dh


def projection_update(s: ProjectionState, delta_h_prev, delta_y_now: float) -> ProjectionState:
    """Normalized projection step.

    phi(k) = phi(k-1) + eta dH (dy(k) - phi(k-1)^T dH) / (mu + ||dH||^2)
    """
    dh = _check(s.phi_hat, delta_h_prev)
    phi = s.phi_hat.values
    err = float(delta_y_now) - float(phi @ dh)
    if err == 0.0:
        return s
    new = phi + (s.eta * err / (s.mu + float(dh @ dh))) * dh
    return ProjectionState(s.phi_hat.with_values(new), s.eta, s.mu)


def rls_update(s: RLSState, delta_h_prev, delta_y_now: float) -> RLSState:
    """Recursive least squares with exponential forgetting."""
    dh = _check(s.phi_hat, delta_h_prev)
    p = s.covariance
    phi = s.phi_hat.values
    p_h = p @ dh
    denom = s.forgetting + float(dh @ p_h)
    gain = p_h / denom
    err = float(delta_y_now) - float(phi @ dh)
    new_phi = phi + gain * err
    new_p = (p - np.outer(gain, p_h)) / s.forgetting
    new_p = 0.5 * (new_p + new_p.T)
    try:
        np.linalg.cholesky(new_p)
    except np.linalg.LinAlgError:
        raise CovarianceBreakdownError(
            "RLS covariance is no longer positive definite"
        ) from None
    return RLSState(s.phi_hat.with_values(new_phi), new_p, s.forgetting)


def update(state, delta_h_prev, delta_y_now: float):
    """Dispatch to the update matching ``state``'s type."""
    if isinstance(state, ProjectionState):
        return projection_update(state, delta_h_prev, delta_y_now)
    if isinstance(state, RLSState):
        return rls_update(state, delta_h_prev, delta_y_now)
    raise TypeError(f"not an estimator state: {type(state).__name__}")


def estimate_disturbance(phi_hat: PGVector, delta_h_prev, delta_y_now: float,
                         w_hat_prev: float) -> float:
    """Accumulate the one-step prediction residual into a level estimate of w."""
    dh = _check(phi_hat, delta_h_prev)
    return float(w_hat_prev) + (float(delta_y_now) - float(phi_hat.values @ dh))
