"""Simulation targets: plants, reference trajectories, disturbance sources
and the experiment presets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .controllers import ControllerConfig
from .edlm import HistoryBuffer, Orders, armax_to_pg, PGVector
from .estimators import EstimatorConfig
from .poly import ONE, ZERO, Polynomial, as_poly

__all__ = [
    "LinearRegime",
    "NonlinearRegime",
    "Regime",
    "PlantModel",
    "Reference",
    "DisturbanceSpec",
    "VariantSetup",
    "ExamplePreset",
    "PRESET_IDS",
    "step_plant",
    "reference",
    "sample_disturbance",
    "make_example",
]


@dataclass(frozen=True)
class LinearRegime:
    """A y(k+1) = B u(k) + Bv v(k) + C xi(k) + d."""

    a: Polynomial = ONE
    b: Polynomial = ONE
    c: Polynomial = ONE
    bv: Polynomial = ZERO
    d: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "c", "bv"):
            object.__setattr__(self, name, as_poly(getattr(self, name)))
        if self.a[0] == 0.0:
            raise ValueError("A must have a non-zero constant term")

    @property
    def lags(self) -> int:
        return max(len(self.a), len(self.b), len(self.c), len(self.bv))

    def __call__(self, h: HistoryBuffer, k: int) -> float:
        a, b, c, bv = self.a.coeffs, self.b.coeffs, self.c.coeffs, self.bv.coeffs
        acc = self.d
        for i in range(1, len(a)):
            acc -= a[i] * h.get("y", k + 1 - i)
        for j, x in enumerate(b):
            acc += x * h.get("u", k - j)
        for j, x in enumerate(bv):
            if x != 0.0:
                acc += x * h.get("v", k - j)
        for j, x in enumerate(c):
            if x != 0.0:
                acc += x * h.get("w", k - j)
        return acc / a[0]

    def pg(self, orders: Orders) -> PGVector:
        """Exact PG vector of this regime (w(k+1) identified with xi(k)).

        A zero order for the v or w segment drops that channel instead of
        raising; the result is then the PG vector of a model that ignores it.
        """
        a0 = self.a[0]
        c = self.c * (1.0 / self.c[0]) if orders.lw > 0 else None
        bv = self.bv * (1.0 / a0) if orders.lv > 0 else None
        return armax_to_pg(self.a * (1.0 / a0), self.b * (1.0 / a0), c, orders, bv)


def _cubic_example(h: HistoryBuffer, k: int) -> float:
    y0, y1 = h.get("y", k), h.get("y", k - 1)
    u0, u1 = h.get("u", k), h.get("u", k - 1)
    return (0.6 * y0 - 0.1 * y1 + 1.8 * u0 - 1.8 * u0 ** 2 + 0.6 * u0 ** 3
            - 0.15 * u1 + 0.15 * u1 ** 2 - 0.05 * u1 ** 3)


NONLINEAR_MAPS: Dict[str, Callable[[HistoryBuffer, int], float]] = {
    "cubic": _cubic_example,
}


@dataclass(frozen=True)
class NonlinearRegime:
    name: str = "cubic"
    lags: int = 2

    def __post_init__(self):
        if self.name not in NONLINEAR_MAPS:
            raise ValueError(f"unknown nonlinear map {self.name!r}")

    def __call__(self, h: HistoryBuffer, k: int) -> float:
        return NONLINEAR_MAPS[self.name](h, k)


@dataclass(frozen=True)
class Regime:
    """Difference equation active for lo < k <= hi."""

    lo: int
    hi: int
    law: Union[LinearRegime, NonlinearRegime]

    def contains(self, k: int) -> bool:
        return self.lo < k <= self.hi


class PlantModel:
    """Regime-switching difference-equation plant.

    The plant keeps its own copy of y, u, v and the noise xi (stored in the
    ``w`` slot of a :class:`HistoryBuffer`).
    """

    def __init__(self, regimes: Sequence[Regime], y_init: Sequence[float] = (),
                 u_init: Sequence[float] = (), start: int = 1):
        regimes = sorted(regimes, key=lambda r: r.lo)
        for r in regimes:
            if r.hi <= r.lo:
                raise ValueError(f"empty regime range ({r.lo}, {r.hi}]")
        for r0, r1 in zip(regimes, regimes[1:]):
            if r1.lo != r0.hi:
                raise ValueError("regime ranges must tile the horizon without overlap")
        self.regimes = tuple(regimes)
        self.start = start
        depth = max(r.law.lags for r in regimes) + 4
        self.y_init = tuple(y_init)
        self.u_init = tuple(u_init)
        self.history = HistoryBuffer(depth=max(depth, len(y_init) + 2, len(u_init) + 2),
                                     start=start - max(len(y_init), len(u_init), 1) - depth)
        if y_init:
            self.history.preload("y", y_init, newest=start)
        else:
            self.history.set("y", start, 0.0)
        if u_init:
            self.history.preload("u", u_init, newest=start - 1)

    @property
    def horizon(self) -> Tuple[int, int]:
        return self.regimes[0].lo, self.regimes[-1].hi

    def regime_index(self, k: int) -> int:
        """1-based index of the regime active at step k."""
        for i, r in enumerate(self.regimes, start=1):
            if r.contains(k):
                return i
        raise ValueError(f"step {k} lies outside every regime range")

    def regime(self, k: int) -> Regime:
        return self.regimes[self.regime_index(k) - 1]

    def step(self, u_now: float, k: int, noise: float = 0.0, v_now: float = 0.0,
             load: float = 0.0) -> float:
        return step_plant(self, u_now, k, noise, v_now, load)


def step_plant(p: PlantModel, u_now: float, k: int, noise: float = 0.0,
               v_now: float = 0.0, load: float = 0.0) -> float:
    """Apply u(k) (with xi(k), v(k)) and return y(k+1)."""
    law = p.regime(k).law
    h = p.history
    h.set("u", k, u_now)
    h.set("v", k, v_now)
    h.set("w", k, noise)
    y_next = law(h, k) + load
    h.set("y", k + 1, y_next)
    return y_next


def _round_half_away(x: float) -> float:
    return math.copysign(math.floor(abs(x) + 0.5), x)


@dataclass(frozen=True)
class Reference:
    """Desired trajectory; ``value(k)`` is y*(k+1).

    ``square``: amplitude * (-1)^round(k / half_period), ties rounded away
    from zero.  ``constant``: amplitude.
    """

    kind: str = "square"
    amplitude: float = 1.0
    half_period: float = 1.0

    def __post_init__(self):
        if self.kind not in ("square", "constant"):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if self.kind == "square" and not self.half_period > 0:
            raise ValueError("half_period must be positive")

    def value(self, k: int) -> float:
        return reference(self, k)


def reference(kind: Reference, k: int) -> float:
    if kind.kind == "constant":
        return float(kind.amplitude)
    n = int(_round_half_away(k / kind.half_period))
    return float(kind.amplitude) * (-1.0 if n % 2 else 1.0)


@dataclass(frozen=True)
class DisturbanceSpec:
    """One disturbance channel.

    kinds: ``none``; ``white_noise`` (zero-mean Gaussian, ``variance``,
    optional ``seed``); ``constant_schedule`` with ``schedule`` a tuple of
    (lo, hi, level) meaning ``level`` for lo < k <= hi; ``sinusoid``
    amplitude * sin(rate * k).
    """

    kind: str = "none"
    variance: float = 0.0
    seed: Optional[int] = None
    schedule: Tuple[Tuple[int, int, float], ...] = ()
    amplitude: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "white_noise", "constant_schedule", "sinusoid"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.variance < 0:
            raise ValueError("variance must be non-negative")
        object.__setattr__(self, "schedule",
                           tuple((int(a), int(b), float(c)) for a, b, c in self.schedule))

    def rng(self, fallback_seed: int = 0) -> np.random.Generator:
        return np.random.default_rng(self.seed if self.seed is not None else fallback_seed)


def sample_disturbance(spec: DisturbanceSpec, k: int,
                       rng: Optional[np.random.Generator] = None) -> float:
    if spec.kind == "none":
        return 0.0
    if spec.kind == "white_noise":
        if spec.variance == 0.0:
            return 0.0
        if rng is None:
            raise ValueError("white noise needs a random generator")
        return float(rng.normal(0.0, math.sqrt(spec.variance)))
    if spec.kind == "constant_schedule":
        for lo, hi, level in spec.schedule:
            if lo < k <= hi:
                return level
        return 0.0
    return spec.amplitude * math.sin(spec.rate * k)


@dataclass(frozen=True)
class VariantSetup:
    """A controller together with its estimator and initial estimate."""

    label: str
    controller: ControllerConfig
    estimator: EstimatorConfig


@dataclass
class ExamplePreset:
    id: str
    make_plant: Callable[[], PlantModel]
    reference: Reference
    horizon: int
    noise: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    measured: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    load: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    variants: Dict[str, VariantSetup] = field(default_factory=dict)
    primary: str = ""
    y_init: Tuple[float, ...] = ()
    u_init: Tuple[float, ...] = ()
    description: str = ""

    @property
    def setup(self) -> VariantSetup:
        return self.variants[self.primary]

    def plant(self) -> PlantModel:
        return self.make_plant()

    def switch_steps(self):
        plant = self.make_plant()
        return [r.hi for r in plant.regimes[:-1]]


PRESET_IDS = ("ex1", "ex2-case1", "ex2-case2", "ex3", "ex4", "nl")

_Y_INIT_TABLE1 = (0.0, 0.0, 0.0, 0.5, 0.2)
_U_INIT_TABLE1 = (0.0,) * 6


def _ex1() -> ExamplePreset:
    regimes = (
        Regime(0, 350, LinearRegime(a=(1, -0.2, -0.8), b=(-0.5, 0.3, 0.2))),
        Regime(350, 700, LinearRegime(a=(1, 0.4), b=(-0.5, -0.2))),
    )
    orders = Orders(1, 2)
    est = EstimatorConfig("projection", eta=3.0, mu=1.0, phi0=(-0.8, -0.5, -0.2))
    variants = {
        "mfac": VariantSetup("MFAC", ControllerConfig(orders, "basic"), est),
        "mvc": VariantSetup("MVC", ControllerConfig(orders, "mvc_baseline"), est),
    }
    return ExamplePreset(
        "ex1", lambda: PlantModel(regimes, _Y_INIT_TABLE1, _U_INIT_TABLE1),
        Reference("square", 5.0, 80.0), 700, variants=variants, primary="mfac",
        y_init=_Y_INIT_TABLE1, u_init=_U_INIT_TABLE1,
        description="structure-varying linear plant, dead-beat MFAC vs MVC",
    )


def _ex2(d1: float, d2: float, pid: str) -> ExamplePreset:
    regimes = (
        Regime(0, 350, LinearRegime(a=(1, 0.4), b=(-0.5, -0.6), d=d1)),
        Regime(350, 700, LinearRegime(a=(1, -0.4), b=(0.5, 0.6), d=d2)),
    )
    orders = Orders(1, 2)
    est = EstimatorConfig("projection", eta=3.0, mu=1.0, phi0=(-0.1, -0.1, -0.1))
    variants = {
        "mfac": VariantSetup("MFAC", ControllerConfig(orders, "lambda_weighted", lam=0.2), est),
        "mvc": VariantSetup("MVC", ControllerConfig(orders, "mvc_baseline"), est),
    }
    return ExamplePreset(
        pid, lambda: PlantModel(regimes, _Y_INIT_TABLE1, _U_INIT_TABLE1),
        Reference("square", 5.0, 80.0), 700, variants=variants, primary="mfac",
        y_init=_Y_INIT_TABLE1, u_init=_U_INIT_TABLE1,
        description=f"sign-switching plant with constant disturbance d1={d1:g}, d2={d2:g}",
    )


def _ex3() -> ExamplePreset:
    law = LinearRegime(a=(1, -1.7, 0.7), b=(1, 1.4), c=(1, 0.2))
    regimes = (Regime(0, 400, law),)
    y0, u0 = (0.0, 0.0), (0.0, 0.0, 0.0)
    proposed = ControllerConfig(Orders(2, 2, 0, 1), "poly_cost", lambda_poly=(0.5, 0.2))
    current = ControllerConfig(Orders(2, 2), "lambda_weighted", lam=0.25)
    variants = {
        "proposed": VariantSetup(
            "Proposed MFAC", proposed,
            EstimatorConfig("rls", p0=1e6, phi0=(0.001,) * 5)),
        "current": VariantSetup(
            "Current MFAC", current,
            EstimatorConfig("rls", p0=1e6, phi0=(0.001,) * 4)),
    }
    return ExamplePreset(
        "ex3", lambda: PlantModel(regimes, y0, u0),
        Reference("square", 10.0, 100.0), 400,
        noise=DisturbanceSpec("white_noise", variance=0.1),
        variants=variants, primary="proposed", y_init=y0, u_init=u0,
        description="ARMAX plant with coloured noise, generalized vs lambda MFAC",
    )


def _ex4() -> ExamplePreset:
    law = LinearRegime(a=(1, -1.7, 0.7), b=(1, 0.2), bv=(1, 0.4))
    regimes = (Regime(0, 400, law),)
    y0, u0 = (0.0, 0.0), (0.0, 0.0, 0.0)
    ff = ControllerConfig(Orders(2, 2, 2, 1), "measured_disturbance",
                          lambda_poly=(0.5, 0.2), design_s=True)
    blind = ControllerConfig(Orders(2, 2, 0, 1), "poly_cost", lambda_poly=(0.5, 0.2))
    variants = {
        "feedforward": VariantSetup(
            "MFAC with feedforward", ff,
            EstimatorConfig("rls", p0=1e6, phi0=(0.001,) * 7)),
        "no_feedforward": VariantSetup(
            "MFAC ignoring v", blind,
            EstimatorConfig("rls", p0=1e6, phi0=(0.001,) * 5)),
    }
    return ExamplePreset(
        "ex4", lambda: PlantModel(regimes, y0, u0),
        Reference("square", 10.0, 100.0), 400,
        noise=DisturbanceSpec("white_noise", variance=0.1),
        measured=DisturbanceSpec("sinusoid", amplitude=5.0, rate=1.0 / 20.0),
        variants=variants, primary="feedforward", y_init=y0, u_init=u0,
        description="measured sinusoidal disturbance with designed feedforward",
    )


def _nl() -> ExamplePreset:
    regimes = (
        Regime(0, 200, NonlinearRegime("cubic")),
        Regime(200, 400, LinearRegime(a=(1, -1, -1), b=(1, 1))),
    )
    orders = Orders(2, 2)
    y0, u0 = (0.0, 0.0), (0.0, 0.0, 0.0)
    est = EstimatorConfig("projection", eta=1.0, mu=1.0, phi0=(0.1, 0.1, 0.5, 0.1))
    variants = {
        "mfac": VariantSetup("MFAC", ControllerConfig(orders, "lambda_weighted", lam=0.5), est),
    }
    return ExamplePreset(
        "nl", lambda: PlantModel(regimes, y0, u0),
        Reference("square", 1.0, 50.0), 400, variants=variants, primary="mfac",
        y_init=y0, u_init=u0,
        description="nonlinear cubic-input plant switching to an unstable linear one",
    )


_BUILDERS = {
    "ex1": _ex1,
    "ex2-case1": lambda: _ex2(1.0, 100.0, "ex2-case1"),
    "ex2-case2": lambda: _ex2(0.0, 0.0, "ex2-case2"),
    "ex3": _ex3,
    "ex4": _ex4,
    "nl": _nl,
}

_NUMERIC_IDS = {1: "ex1", 2: "ex2-case1", 3: "ex3", 4: "ex4", "nl": "nl"}


def make_example(n) -> ExamplePreset:
    """Fully wired experiment preset; ``n`` is 1-4, "nl" or a preset id."""
    if isinstance(n, str) and n.isdigit():
        n = int(n)
    pid = _NUMERIC_IDS.get(n, n)
    if pid not in _BUILDERS:
        raise ValueError(f"unknown preset {n!r}; choose from {', '.join(PRESET_IDS)}")
    return _BUILDERS[pid]()
