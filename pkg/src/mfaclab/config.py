"""Flat ``key = value`` experiment files.

Keys are dotted: ``plant.*``, ``reference.*``, ``controller.*``,
``estimator.*``, ``noise.*``, ``measured.*``, ``load.*`` plus a few
top-level keys.  Polynomials and vectors are comma lists, newest
coefficient first (``controller.Lambda = 0.5, 0.2`` is 0.5 + 0.2 z^-1).
Unset keys inherit from ``preset`` when one is named.  See README.md for
the full schema.
"""

from __future__ import annotations

import configparser
from dataclasses import replace
from typing import Dict, Optional

from .controllers import ControllerConfig
from .edlm import Orders
from .errors import ConfigError
from .estimators import EstimatorConfig
from .plants import (DisturbanceSpec, LinearRegime, PlantModel, Reference, Regime,
                     make_example)
from .simloop import ExperimentConfig, experiment_from_preset

_SECTION = "experiment"

SCHEMA = {
    "preset": str,
    "variant": str,
    "horizon": int,
    "seed": int,
    "label": str,
    "plant.a": "poly",
    "plant.b": "poly",
    "plant.c": "poly",
    "plant.bv": "poly",
    "plant.d": float,
    "plant.y_init": "vec",
    "plant.u_init": "vec",
    "reference.kind": str,
    "reference.amplitude": float,
    "reference.half_period": float,
    "controller.variant": str,
    "controller.lambda": float,
    "controller.ly": int,
    "controller.lu": int,
    "controller.lv": int,
    "controller.lw": int,
    "controller.p": "poly",
    "controller.r": "poly",
    "controller.Lambda": "poly",
    "controller.s": "poly",
    "controller.design_s": bool,
    "controller.s_max_degree": int,
    "controller.epsilon_gain": float,
    "estimator.kind": str,
    "estimator.eta": float,
    "estimator.mu": float,
    "estimator.p0": float,
    "estimator.forgetting": float,
    "estimator.phi0": "vec",
}
for _ch in ("noise", "measured", "load"):
    SCHEMA.update({
        f"{_ch}.kind": str,
        f"{_ch}.variance": float,
        f"{_ch}.seed": int,
        f"{_ch}.amplitude": float,
        f"{_ch}.rate": float,
        f"{_ch}.schedule": "schedule",
    })

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, raw: str):
    kind = SCHEMA[key]
    try:
        if kind == "poly" or kind == "vec":
            vals = tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
            if kind == "poly" and not vals:
                raise ValueError("empty polynomial")
            return vals
        if kind == "schedule":
            # "lo:hi:level; lo:hi:level"
            out = []
            for item in raw.split(";"):
                if item.strip():
                    lo, hi, level = item.split(":")
                    out.append((int(lo), int(hi), float(level)))
            return tuple(out)
        if kind is bool:
            low = raw.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}", key=key) from None


def parse_config_text(text: str) -> Dict[str, object]:
    """Parse and type-check; unknown keys are an error naming the key."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".splitlines()[0], key=None) from None
    out = {}
    for key, raw in cp.items(_SECTION):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        out[key] = _convert(key, raw)
    return out


def load_config(path) -> Dict[str, object]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", key=None) from None
    return parse_config_text(text)


def _section(values, prefix):
    n = len(prefix) + 1
    return {k[n:]: v for k, v in values.items() if k.startswith(prefix + ".")}


def _guard(key, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: {exc}", key=key) from None


def _apply(obj, vals: dict, prefix: str, rename=None):
    """Apply overrides one key at a time so a failure names its own key."""
    rename = rename or {}
    # kind first: it decides how the remaining fields are validated.
    for key in sorted(vals, key=lambda k: (k not in ("kind", "variant"), k)):
        obj = _guard(f"{prefix}.{key}", replace, obj, **{rename.get(key, key): vals[key]})
    return obj


def _disturbance(base: DisturbanceSpec, vals: dict, prefix: str) -> DisturbanceSpec:
    return _apply(base, vals, prefix)


def experiment_from_config(values: Dict[str, object], preset: Optional[str] = None,
                           seed: Optional[int] = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from parsed config values.

    ``preset`` and ``seed`` (e.g. from the command line) take precedence over
    the file's own entries.
    """
    pid = preset or values.get("preset")
    plant_vals = _section(values, "plant")
    if pid is None and "a" not in plant_vals and "b" not in plant_vals:
        raise ConfigError("config names neither a preset nor plant.a/plant.b", key="preset")
    run_seed = seed if seed is not None else int(values.get("seed", 0))

    if pid is not None:
        try:
            make_example(pid)
        except ValueError as exc:
            raise ConfigError(str(exc), key="preset") from None
        cfg = _guard("variant", experiment_from_preset, pid, values.get("variant"), run_seed)
    else:
        cfg = None

    horizon = int(values.get("horizon", cfg.horizon if cfg else 400))

    # plant
    if "a" in plant_vals or "b" in plant_vals:
        law = _guard("plant.a", LinearRegime,
                     a=plant_vals.get("a", (1.0,)), b=plant_vals.get("b", (1.0,)),
                     c=plant_vals.get("c", (1.0,)), bv=plant_vals.get("bv", (0.0,)),
                     d=plant_vals.get("d", 0.0))
        y0 = tuple(plant_vals.get("y_init", ()))
        u0 = tuple(plant_vals.get("u_init", ()))

        def make_plant(law=law, y0=y0, u0=u0, hi=horizon):
            return PlantModel((Regime(0, hi, law),), y0, u0)
    elif plant_vals:
        bad = sorted(plant_vals)[0]
        raise ConfigError(f"plant.{bad} needs plant.a/plant.b to define a plant", key=f"plant.{bad}")
    else:
        make_plant = cfg.make_plant

    # reference
    ref_vals = _section(values, "reference")
    ref = cfg.reference if cfg else Reference()
    ref = _apply(ref, ref_vals, "reference")

    # controller
    cv = _section(values, "controller")
    ctrl = cfg.controller if cfg else ControllerConfig()
    o = ctrl.orders
    if any(k in cv for k in ("ly", "lu", "lv", "lw")):
        o = _guard("controller.ly", Orders, cv.get("ly", o.ly), cv.get("lu", o.lu),
                   cv.get("lv", o.lv), cv.get("lw", o.lw))
    ctrl = _guard("controller.ly", replace, ctrl, orders=o)
    cv = {k: v for k, v in cv.items() if k not in ("ly", "lu", "lv", "lw")}
    ctrl = _apply(ctrl, cv, "controller",
                  {"lambda": "lam", "p": "p_poly", "r": "r_poly", "Lambda": "lambda_poly",
                   "s": "s_poly"})

    # estimator
    ev = _section(values, "estimator")
    est = cfg.estimator if cfg else EstimatorConfig(phi0=(0.001,) * o.size)
    est = _apply(est, ev, "estimator")

    fields = dict(
        make_plant=make_plant, controller=ctrl, estimator=est, reference=ref,
        horizon=horizon, seed=run_seed,
        noise=_disturbance(cfg.noise if cfg else DisturbanceSpec(), _section(values, "noise"), "noise"),
        measured=_disturbance(cfg.measured if cfg else DisturbanceSpec(),
                              _section(values, "measured"), "measured"),
        load=_disturbance(cfg.load if cfg else DisturbanceSpec(), _section(values, "load"), "load"),
        label=str(values.get("label", cfg.label if cfg else "custom")),
    )
    out = ExperimentConfig(**fields)
    # Catch a horizon the plant cannot cover before the run starts.
    lo, hi = out.make_plant().horizon
    if not (lo < 1 and horizon <= hi):
        raise ConfigError(f"horizon {horizon} exceeds the plant's range ({lo}, {hi}]", key="horizon")
    return out
