"""Closed-loop orchestration, traces, metrics and frozen-loop oracles.

One step k of :func:`run_experiment`:

1. update the estimate from (dH(k-1), dy(k)), refreshing w_hat(k) first;
2. sample v(k) and evaluate the control law for du(k);
3. apply u(k) and step the plant to y(k+1).

A trace row for step k carries u(k), du(k), phi_hat(k), w_hat(k), v(k) and
the output/reference pair y(k+1), y*(k+1); ``e`` is their difference.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import estimators as est
from .controllers import (ControllerConfig, char_poly_basic, char_poly_general,
                          control_increment, design_s)
from .edlm import HistoryBuffer, PGVector, build_delta_h
from .errors import (ConfigError, CovarianceBreakdownError, DivergenceError,
                     GainSingularError, MFACError)
from .estimators import EstimatorConfig
from .plants import (DisturbanceSpec, ExamplePreset, PlantModel, Reference,
                     make_example, sample_disturbance)
from .poly import Polynomial, is_stable, poly_roots

__all__ = [
    "ExperimentConfig",
    "TraceRow",
    "Metrics",
    "experiment_from_preset",
    "run_experiment",
    "eitae",
    "itae",
    "segment_errors",
    "frozen_loop_response",
    "closed_loop_poly",
    "pole_trace",
    "identify_poles",
    "write_trace_csv",
    "read_trace_csv",
    "trace_to_csv",
]

OVERFLOW_GUARD = 1e9
START = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one closed-loop run depends on.

    ``true_phi`` freezes the estimate at the given PG vector and disables
    adaptation.
    """

    make_plant: Callable[[], PlantModel]
    controller: ControllerConfig
    estimator: EstimatorConfig
    reference: Reference
    horizon: int
    seed: int = 0
    noise: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    measured: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    load: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    record_poles: bool = False
    true_phi: Optional[PGVector] = None
    label: str = ""

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1", key="horizon")
        n = self.controller.orders.size
        if self.true_phi is not None:
            if self.true_phi.orders != self.controller.orders:
                raise ConfigError("true_phi orders differ from controller orders",
                                  key="controller.orders")
        elif len(self.estimator.phi0) != n:
            raise ConfigError(
                f"estimator.phi0 has {len(self.estimator.phi0)} entries, "
                f"controller orders need {n}", key="estimator.phi0")

    def initial_phi(self) -> PGVector:
        if self.true_phi is not None:
            return self.true_phi
        return PGVector(self.controller.orders, self.estimator.phi0)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class TraceRow:
    k: int
    y: float
    y_star: float
    u: float
    delta_u: float
    e: float
    phi_hat: Tuple[float, ...]
    w_hat: float
    v: float
    regime: int
    roots: Optional[Tuple[complex, ...]] = None


@dataclass
class Metrics:
    eitae: float
    itae: float
    steady_state_error: List[Tuple[int, int, float, float]]
    stable_steps: Optional[List[bool]] = None
    status: str = "ok"
    message: str = ""
    steps: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def mean_steady_state_error(self, skip_after=()) -> float:
        """Mean of the per-segment tail errors, skipping segments that start
        within a step of any k in ``skip_after``."""
        vals = [err for lo, hi, _lvl, err in self.steady_state_error
                if not any(lo <= s + 1 <= hi and lo >= s - 1 for s in skip_after)]
        return float(np.mean(vals)) if vals else float("nan")


def experiment_from_preset(preset, variant: Optional[str] = None, seed: int = 0,
                           **overrides) -> ExperimentConfig:
    """ExperimentConfig for a preset id (or :class:`ExamplePreset`).

    ``variant`` picks one of the preset's named setups; a bare controller
    variant name (e.g. ``mvc_baseline``) is also accepted and reuses the
    primary setup's orders, tuning and estimator.
    """
    if not isinstance(preset, ExamplePreset):
        preset = make_example(preset)
    setup = preset.setup
    if variant is not None:
        if variant in preset.variants:
            setup = preset.variants[variant]
        else:
            match = [s for s in preset.variants.values()
                     if s.controller.variant == _canon(variant)]
            if match:
                setup = match[0]
            else:
                setup = replace(setup, label=variant,
                                controller=setup.controller.with_(variant=variant))
    kw = dict(
        make_plant=preset.make_plant,
        controller=setup.controller,
        estimator=setup.estimator,
        reference=preset.reference,
        horizon=preset.horizon,
        seed=seed,
        noise=preset.noise,
        measured=preset.measured,
        load=preset.load,
        label=setup.label,
    )
    kw.update(overrides)
    return ExperimentConfig(**kw)


def _canon(name):
    from .controllers import canonical_variant

    try:
        return canonical_variant(name)
    except ValueError:
        return None


def closed_loop_poly(phi: PGVector, cfg: ControllerConfig) -> Polynomial:
    """Frozen-coefficient characteristic polynomial for ``cfg``'s law."""
    if cfg.variant in ("basic", "lambda_weighted"):
        return char_poly_basic(phi, cfg.lam if cfg.variant == "lambda_weighted" else 0.0)
    if cfg.variant == "mvc_baseline":
        return phi.phi_lu
    return char_poly_general(phi, cfg)


def _roots_at(phi: PGVector, cfg: ControllerConfig):
    try:
        t = closed_loop_poly(phi, cfg)
    except GainSingularError:
        return None, False
    return tuple(poly_roots(t)), is_stable(t)


def _history_depth(cfg: ControllerConfig) -> int:
    o = cfg.orders
    extra = (cfg.p_poly.degree + cfg.r_poly.degree + cfg.lambda_poly.degree
             + cfg.s_poly.degree + (cfg.s_max_degree if cfg.design_s else 0))
    return o.size + extra + 8


def run_experiment(cfg: ExperimentConfig):
    """Simulate the closed loop; returns ``(trace, metrics)``.

    Estimator, controller or divergence failures stop the run early; the
    partial trace is returned and ``metrics.status`` names the failure.
    """
    ctrl = cfg.controller
    orders = ctrl.orders
    plant = cfg.make_plant()
    last = START + cfg.horizon - 1
    if not (plant.horizon[0] < START and last <= plant.horizon[1]):
        raise ConfigError(f"horizon of {cfg.horizon} steps exceeds the plant's regime range "
                          f"({plant.horizon[0]}, {plant.horizon[1]}]", key="horizon")
    h = HistoryBuffer(depth=_history_depth(ctrl), start=START - 64)
    if plant.y_init:
        h.preload("y", plant.y_init, newest=START)
    else:
        h.set("y", START, 0.0)
    if plant.u_init:
        h.preload("u", plant.u_init, newest=START - 1)
    else:
        h.set("u", START - 1, 0.0)
    h.set("v", START - 1, 0.0)
    h.set("r", START, 0.0)
    h.set("w", START, 0.0)

    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    rng_noise = np.random.default_rng(cfg.noise.seed if cfg.noise.seed is not None else seeds[0])
    rng_meas = np.random.default_rng(cfg.measured.seed if cfg.measured.seed is not None else seeds[1])
    rng_load = np.random.default_rng(cfg.load.seed if cfg.load.seed is not None else seeds[2])

    phi = cfg.initial_phi()
    adapt = cfg.true_phi is None and cfg.estimator.kind != "none"
    state = cfg.estimator.initial_state(phi) if adapt else None
    track_w = orders.lw > 0

    trace: List[TraceRow] = []
    status, message = "ok", ""
    k = START
    try:
        for k in range(START, START + cfg.horizon):
            if k > START:
                dh_prev = build_delta_h(h, orders, k - 1)
                dy = h.delta("y", k)
                if track_w:
                    h.set("w", k, est.estimate_disturbance(phi, dh_prev, dy, h.get("w", k - 1)))
                if adapt:
                    state = est.update(state, dh_prev, dy)
                    phi = state.phi_hat
            v_now = sample_disturbance(cfg.measured, k, rng_meas)
            h.set("v", k, v_now)
            y_star_next = cfg.reference.value(k)
            s_poly = None
            if ctrl.variant == "measured_disturbance" and ctrl.design_s:
                s_poly = design_s(ctrl, phi).s
            du = control_increment(ctrl, phi, h, y_star_next, s_poly)
            u = h.get("u", k - 1) + du
            noise = sample_disturbance(cfg.noise, k, rng_noise)
            load = sample_disturbance(cfg.load, k, rng_load)
            regime = plant.regime_index(k)
            y_next = plant.step(u, k, noise, v_now, load)
            h.set("u", k, u)
            h.set("y", k + 1, y_next)
            h.set("r", k + 1, y_star_next)
            roots = _roots_at(phi, ctrl)[0] if cfg.record_poles else None
            trace.append(TraceRow(k, y_next, y_star_next, u, du, y_star_next - y_next,
                                  tuple(float(x) for x in phi.values),
                                  h.get("w", k) if track_w else 0.0,
                                  v_now, regime, roots))
            if not (math.isfinite(y_next) and abs(y_next) <= OVERFLOW_GUARD
                    and math.isfinite(u)):
                raise DivergenceError(f"|y({k + 1})| exceeded {OVERFLOW_GUARD:g}")
    except DivergenceError as exc:
        status, message = "diverged", str(exc)
    except GainSingularError as exc:
        status, message = "gain_singular", f"step {k}: {exc}"
    except CovarianceBreakdownError as exc:
        status, message = "covariance_breakdown", f"step {k}: {exc}"
    except FloatingPointError as exc:
        status, message = "diverged", f"step {k}: {exc}"

    metrics = Metrics(
        eitae=eitae(trace) if trace else 0.0,
        itae=itae(trace) if trace else 0.0,
        steady_state_error=segment_errors(trace),
        status=status,
        message=message,
        steps=len(trace),
    )
    if cfg.record_poles:
        metrics.stable_steps = [stable for _k, _r, stable in pole_trace(trace, ctrl)]
    return trace, metrics


def eitae(trace: Sequence[TraceRow]) -> float:
    """Sum of squared tracking errors (named eITAE after its usual table label)."""
    if not trace:
        raise ValueError("empty trace")
    return math.fsum(r.e * r.e for r in trace)


def itae(trace: Sequence[TraceRow]) -> float:
    """Time-weighted absolute error sum k |e(k)|; an alternative metric."""
    if not trace:
        raise ValueError("empty trace")
    return math.fsum(r.k * abs(r.e) for r in trace)


def segment_errors(trace: Sequence[TraceRow], tail: int = 10):
    """Mean |e| over the last ``tail`` rows of each constant-reference segment.

    Returns a list of (first k, last k, reference level, error).
    """
    out = []
    i = 0
    n = len(trace)
    while i < n:
        j = i
        while j + 1 < n and trace[j + 1].y_star == trace[i].y_star:
            j += 1
        rows = trace[max(i, j - tail + 1): j + 1]
        out.append((trace[i].k, trace[j].k, trace[i].y_star,
                    float(np.mean([abs(r.e) for r in rows]))))
        i = j + 1
    return out


def pole_trace(trace: Sequence[TraceRow], cfg: ControllerConfig):
    """Per-step (k, roots, stable) of the characteristic polynomial at phi_hat(k).

    A step whose polynomial cannot be formed (vanishing gain) is reported
    with roots ``None`` and flagged unstable.
    """
    out = []
    last = None
    for row in trace:
        if row.phi_hat != last:
            roots, stable = _roots_at(PGVector(cfg.orders, row.phi_hat), cfg)
            last = row.phi_hat
        out.append((row.k, roots, stable))
    return out


def frozen_loop_response(phi: PGVector, cfg: ControllerConfig, y_star_seq,
                         v_seq=None, s_poly: Optional[Polynomial] = None) -> np.ndarray:
    """Closed-loop output from the rational filter T y(k+1) = N y*(k+1).

    ``y_star_seq[i]`` is y*(k+1) for the i-th step and the result's entry i
    is y(k+1); the loop starts at rest.  For the basic and lambda laws
    T = lam (1 - z^-1)(1 - z^-1 phi_Ly) + phi_Ly+1 phi_Lu with numerator
    phi_Ly+1 phi_Lu.  The generalized laws use T3 with numerator phi_Lu R
    and, when ``v_seq`` is given, the measured-disturbance path
    (lam0/phi_Ly+1) Lambda phi_Lv (1 - z^-1) - phi_Lu S acting on v(k).
    """
    from .poly import DELTA, ZERO

    ys = np.asarray(y_star_seq, dtype=float)
    t = closed_loop_poly(phi, cfg)
    if cfg.variant in ("basic", "lambda_weighted"):
        num = phi.gain * phi.phi_lu
    elif cfg.variant == "mvc_baseline":
        raise ValueError("no frozen-loop filter for the MVC baseline")
    else:
        num = phi.phi_lu * cfg.r_poly
    nv = ZERO
    if v_seq is not None and cfg.variant == "measured_disturbance":
        s = cfg.s_poly if s_poly is None else s_poly
        lam_term = ZERO
        if cfg.lambda0 != 0.0:
            lam_term = (cfg.lambda0 / phi.gain) * cfg.lambda_poly * phi.phi_lv * DELTA
        nv = lam_term - phi.phi_lu * s
    vs = np.zeros_like(ys) if v_seq is None else np.asarray(v_seq, dtype=float)
    tc, nc, vc = t.coeffs, num.coeffs, nv.coeffs
    if tc[0] == 0.0:
        raise GainSingularError("characteristic polynomial has a vanishing constant term")
    out = np.zeros(ys.size)
    for i in range(ys.size):
        acc = 0.0
        for j, c in enumerate(nc):
            if i - j >= 0:
                acc += c * ys[i - j]
        for j, c in enumerate(vc):
            if i - j >= 0:
                acc += c * vs[i - j]
        for j in range(1, len(tc)):
            if i - j >= 0:
                acc -= tc[j] * out[i - j]
        out[i] = acc / tc[0]
        if not abs(out[i]) <= OVERFLOW_GUARD:
            raise DivergenceError(f"frozen-loop response exceeded {OVERFLOW_GUARD:g} at step {i}")
    return out


def identify_poles(y, order: int) -> List[complex]:
    """Poles of a homogeneous linear recursion fitted to ``y`` by least squares."""
    y = np.asarray(y, dtype=float)
    rows = [y[i - order:i][::-1] for i in range(order, y.size)]
    a, *_ = np.linalg.lstsq(np.array(rows), y[order:], rcond=None)
    # y(i) = a1 y(i-1) + ... + an y(i-n)  ->  z^n - a1 z^(n-1) - ... - an
    return [complex(r) for r in np.roots(np.concatenate(([1.0], -a)))]


TRACE_FIELDS = ("k", "y", "y_star", "u", "delta_u", "e")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trace_to_csv(trace: Sequence[TraceRow]) -> str:
    n_phi = len(trace[0].phi_hat) if trace else 0
    header = list(TRACE_FIELDS) + [f"phi_hat_{i}" for i in range(n_phi)] + ["w_hat", "v", "regime"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in trace:
        w.writerow([r.k] + [_fmt(x) for x in (r.y, r.y_star, r.u, r.delta_u, r.e)]
                   + [_fmt(x) for x in r.phi_hat] + [_fmt(r.w_hat), _fmt(r.v), r.regime])
    return buf.getvalue()


def write_trace_csv(trace: Sequence[TraceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv(trace))


def read_trace_csv(path) -> List[TraceRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        phi_cols = [i for i, name in enumerate(header) if name.startswith("phi_hat_")]
        idx = {name: i for i, name in enumerate(header)}
        out = []
        for rec in reader:
            out.append(TraceRow(
                k=int(rec[idx["k"]]),
                y=float(rec[idx["y"]]),
                y_star=float(rec[idx["y_star"]]),
                u=float(rec[idx["u"]]),
                delta_u=float(rec[idx["delta_u"]]),
                e=float(rec[idx["e"]]),
                phi_hat=tuple(float(rec[i]) for i in phi_cols),
                w_hat=float(rec[idx["w_hat"]]),
                v=float(rec[idx["v"]]),
                regime=int(rec[idx["regime"]]),
            ))
    return out
