"""Command-line experiment runner.

    mfaclab run     --preset ex3 --seed 0 --out out/ex3
    mfaclab compare --preset ex3 --variants proposed,current --seeds 0-19 --out out/cmp
    mfaclab poles   --preset ex2-case1 --lambda-grid 0.01:1:0.01 --out out/poles

Exit status: 0 success, 2 configuration error, 3 a simulation halted
(divergence, vanishing gain or covariance breakdown).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import experiment_from_config, load_config
from .controllers import char_poly_basic
from .edlm import Orders, PGVector
from .errors import ConfigError, DivergenceError, MFACError
from .plants import PRESET_IDS, LinearRegime, make_example
from .poly import is_stable, poly_roots
from .simloop import (ExperimentConfig, experiment_from_preset, run_experiment,
                      trace_to_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HALTED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message, key=None)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _write_manifest(out: str, command: str, experiments, seeds, files: Sequence[str]) -> str:
    manifest = {
        "command": command,
        "experiments": list(experiments),
        "seeds": list(seeds),
        "output_dir": out,
        "files": [{"name": f, "sha256": _sha256(os.path.join(out, f))} for f in files],
    }
    path = os.path.join(out, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _parse_seeds(text: str) -> List[int]:
    seeds = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if "-" in item:
                lo, hi = item.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(item))
        except ValueError:
            raise ConfigError(f"bad seed list entry {item!r}", key="--seeds") from None
    if not seeds:
        raise ConfigError("empty seed list", key="--seeds")
    return seeds


def _parse_grid(text: str) -> List[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 12) for i in range(n)]
        vals = [float(x) for x in text.split(",") if x.strip()]
        if not vals:
            raise ValueError
        return vals
    except ValueError:
        raise ConfigError(f"bad lambda grid {text!r}; use a:b:step or a comma list",
                          key="--lambda-grid") from None


def _variants_arg(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    out = [v.strip() for v in text.split(",") if v.strip()]
    if not out:
        raise ConfigError("empty variant list", key="--variants")
    return out


def _build(preset: Optional[str], config_values, variant: Optional[str], seed: int) -> ExperimentConfig:
    if config_values is not None:
        vals = dict(config_values)
        if variant is not None:
            vals["variant"] = variant
        return experiment_from_config(vals, preset=preset, seed=seed)
    try:
        return experiment_from_preset(preset, variant, seed)
    except ValueError as exc:
        raise ConfigError(str(exc), key="--variants" if variant else "--preset") from None


def _experiments(args, seed: int):
    """(key, ExperimentConfig) for every variant requested on the command line."""
    values = load_config(args.config) if args.config else None
    preset = args.preset or (values or {}).get("preset")
    if preset is not None and preset not in PRESET_IDS:
        try:
            make_example(preset)
        except ValueError as exc:
            raise ConfigError(str(exc), key="--preset") from None
    variants = _variants_arg(args.variants)
    if variants is None:
        if values is not None:
            variants = [values.get("variant")]
        else:
            p = make_example(preset)
            variants = [p.primary] + [v for v in p.variants if v != p.primary]
    out = []
    for v in variants:
        cfg = _build(preset, values, v, seed)
        out.append((v or cfg.label or "custom", cfg))
    return preset or "custom", values, out


def _pg_names(o: Orders) -> List[str]:
    return [f"phi_{i + 1}" for i in range(o.size)]


def _summary_table(title: str, cols: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(r[i]) for r in [["metric"] + list(cols)] + list(rows)) for i in range(len(cols) + 1)]
    head = ["metric"] + list(cols)
    lines = [title, ""]
    lines.append("  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else "nan" if math.isnan(x) else f"{x:.4g}"


def cmd_run(args) -> int:
    pid, _values, exps = _experiments(args, args.seed)
    os.makedirs(args.out, exist_ok=True)
    results = []
    for key, cfg in exps:
        trace, metrics = run_experiment(cfg)
        results.append((key, cfg, trace, metrics))

    files = []
    key0, cfg0, trace0, _m0 = results[0]
    with open(os.path.join(args.out, "trace.csv"), "w", newline="") as fh:
        fh.write(trace_to_csv(trace0))
    files.append("trace.csv")

    cols = [cfg.label or key for key, cfg, _t, _m in results]
    rows = [
        ["eITAE = sum e(k)^2"] + [_fmt(m.eitae) for *_x, m in results],
        ["ITAE = sum k|e(k)| (alternate)"] + [_fmt(m.itae) for *_x, m in results],
        ["mean steady-state |e|"] + [_fmt(m.mean_steady_state_error()) for *_x, m in results],
        ["steps completed"] + [f"{m.steps}/{cfg.horizon}" for _k, cfg, _t, m in results],
        ["status"] + [m.status for *_x, m in results],
    ]
    title = f"Performance indexes: {pid}, seed {args.seed}, trace.csv holds '{key0}'"
    summary = _summary_table(title, cols, rows)
    notes = [f"{key}: {m.message}" for key, _c, _t, m in results if not m.ok]
    if notes:
        summary += "\n" + "\n".join(notes) + "\n"
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(summary)
    files.append("summary.txt")

    if not args.no_plots:
        from . import plotting

        traces = {cfg.label or key: t for key, cfg, t, _m in results}
        plotting.plot_tracking(traces, os.path.join(args.out, "tracking.svg"))
        plotting.plot_control(traces, os.path.join(args.out, "control.svg"))
        plotting.plot_pg(trace0, _pg_names(cfg0.controller.orders),
                         os.path.join(args.out, "pg_estimate.svg"),
                         title=f"Estimated PG components ({cfg0.label or key0})")
        files += ["tracking.svg", "control.svg", "pg_estimate.svg"]

    _write_manifest(args.out, "run", [f"{pid}:{key}" for key, *_r in results], [args.seed], files)
    sys.stdout.write(summary)
    halted = [key for key, _c, _t, m in results if not m.ok]
    if halted:
        print(f"simulation halted for: {', '.join(halted)} (partial traces kept)", file=sys.stderr)
        return EXIT_HALTED
    return EXIT_OK


def _compare_job(job):
    preset, values, variant, seed = job
    cfg = _build(preset, values, variant, seed)
    _trace, m = run_experiment(cfg)
    return (variant, seed, cfg.label, m.eitae, m.itae, m.mean_steady_state_error(), m.status, m.steps)


def cmd_compare(args) -> int:
    variants = _variants_arg(args.variants)
    if variants is None or len(variants) < 2:
        raise ConfigError("compare needs at least two variants", key="--variants")
    seeds = _parse_seeds(args.seeds) if args.seeds else [args.seed]
    values = load_config(args.config) if args.config else None
    preset = args.preset or (values or {}).get("preset")
    # Fail fast on bad names before fanning out.
    for v in variants:
        _build(preset, values, v, seeds[0])
    jobs = [(preset, values, v, s) for v in variants for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_compare_job, jobs))
    else:
        rows = [_compare_job(j) for j in jobs]
    # Assembly is independent of worker completion order.
    rows.sort(key=lambda r: (variants.index(r[0]), seeds.index(r[1])))

    os.makedirs(args.out, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "seed", "eitae", "itae", "steady_state_error", "status", "steps"])
    for v, s, _label, e, it, sse, status, steps in rows:
        w.writerow([v, s, format(e, ".17g"), format(it, ".17g"), format(sse, ".17g"), status, steps])
    with open(os.path.join(args.out, "compare.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())

    by = {v: [r for r in rows if r[0] == v] for v in variants}
    e = {v: np.array([r[3] for r in by[v]]) for v in variants}
    first = variants[0]
    table_rows = [
        ["mean eITAE"] + [_fmt(float(np.mean(e[v]))) for v in variants],
        ["std eITAE"] + [_fmt(float(np.std(e[v]))) for v in variants],
        [f"win-rate vs {first}"] + ["-"] + [_fmt(float(np.mean(e[v] < e[first]))) for v in variants[1:]],
        ["mean steady-state |e|"] + [_fmt(float(np.mean([r[5] for r in by[v]]))) for v in variants],
        ["halted runs"] + [str(sum(r[6] != "ok" for r in by[v])) for v in variants],
    ]
    title = f"Comparison: {preset or 'custom'}, {len(seeds)} seed(s) {seeds[0]}..{seeds[-1]}"
    text = _summary_table(title, variants, table_rows)
    with open(os.path.join(args.out, "compare.txt"), "w") as fh:
        fh.write(text)
    _write_manifest(args.out, "compare", [f"{preset or 'custom'}:{v}" for v in variants], seeds,
                    ["compare.csv", "compare.txt"])
    sys.stdout.write(text)
    if any(r[6] != "ok" for r in rows):
        print("some runs halted; see the status column of compare.csv", file=sys.stderr)
        return EXIT_HALTED
    return EXIT_OK


def _coeff_file(path):
    """``ly``, ``lu`` and ``phi`` (comma list) in the config-file syntax."""
    import configparser

    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", key=None) from None
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[coeffs]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed coefficient file: {exc}".splitlines()[0], key=None) from None
    vals = dict(cp.items("coeffs"))
    for k in vals:
        if k not in ("ly", "lu", "phi"):
            raise ConfigError(f"unknown coefficient key {k!r}", key=k)
    if "phi" not in vals:
        raise ConfigError("coefficient file needs phi", key="phi")
    try:
        phi = [float(x) for x in vals["phi"].split(",") if x.strip()]
    except ValueError:
        raise ConfigError("phi must be a comma list of numbers", key="phi") from None
    try:
        ly = int(vals.get("ly", 1))
        lu = int(vals.get("lu", len(phi) - ly))
        o = Orders(ly, lu)
        return PGVector(o, phi)
    except ValueError as exc:
        raise ConfigError(str(exc), key="phi") from None


def _preset_phi(pid: str) -> PGVector:
    p = make_example(pid)
    o = p.setup.controller.orders
    for r in p.plant().regimes:
        if isinstance(r.law, LinearRegime):
            return r.law.pg(Orders(o.ly, o.lu))
    raise ConfigError(f"preset {pid} has no linear regime to analyse", key="--preset")


def cmd_poles(args) -> int:
    if args.coeffs:
        phi = _coeff_file(args.coeffs)
        source = os.path.basename(args.coeffs)
    elif args.preset:
        try:
            phi = _preset_phi(args.preset)
        except ValueError as exc:
            raise ConfigError(str(exc), key="--preset") from None
        source = args.preset
    else:
        raise ConfigError("poles needs --preset or --coeffs", key="--preset")
    grid = _parse_grid(args.lambda_grid)
    for lam in grid:
        if lam < 0:
            raise ConfigError("lambda must be non-negative", key="--lambda-grid")

    roots, stable = [], []
    for lam in grid:
        t = char_poly_basic(phi, lam)
        rs = sorted(poly_roots(t), key=lambda z: (round(z.real, 12), round(z.imag, 12)))
        roots.append(rs)
        stable.append(is_stable(t))
    width = max((len(r) for r in roots), default=0)

    os.makedirs(args.out, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["lambda"]
    for i in range(width):
        head += [f"root_{i + 1}_re", f"root_{i + 1}_im"]
    w.writerow(head + ["max_modulus", "stable"])
    for lam, rs, ok in zip(grid, roots, stable):
        cells = [format(lam, ".17g")]
        for i in range(width):
            if i < len(rs):
                cells += [format(rs[i].real, ".17g"), format(rs[i].imag, ".17g")]
            else:
                cells += ["", ""]
        mod = max((abs(z) for z in rs), default=0.0)
        w.writerow(cells + [format(mod, ".17g"), "yes" if ok else "no"])
    with open(os.path.join(args.out, "poles.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())
    files = ["poles.csv"]
    if not args.no_plots:
        from .plotting import plot_root_locus

        plot_root_locus(grid, roots, os.path.join(args.out, "poles.svg"))
        files.append("poles.svg")
    _write_manifest(args.out, "poles", [source], [], files)
    n_bad = sum(not s for s in stable)
    print(f"{len(grid)} lambda values from {source}: {len(grid) - n_bad} stable, {n_bad} unstable")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mfaclab", description="Model-free adaptive control experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seeds=False):
        src = p.add_argument_group("experiment")
        src.add_argument("--preset", help=f"preset id: {', '.join(PRESET_IDS)}")
        src.add_argument("--config", help="key = value experiment file")
        p.add_argument("--seed", type=int, default=0)
        if seeds:
            p.add_argument("--seeds", help="comma list, ranges allowed (0-19)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--variants", help="comma list of preset variant keys or controller names")
        p.add_argument("--no-plots", action="store_true", help="skip the SVG figures")

    run = sub.add_parser("run", help="simulate one preset or config")
    common(run)
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="eITAE statistics of several variants over seeds")
    common(cmp_, seeds=True)
    cmp_.add_argument("--jobs", type=int, default=1, help="worker processes")
    cmp_.set_defaults(func=cmd_compare)

    poles = sub.add_parser("poles", help="closed-loop roots of T over a lambda grid")
    poles.add_argument("--preset")
    poles.add_argument("--coeffs", help="file with ly, lu and phi")
    poles.add_argument("--lambda-grid", default="0.01:1:0.01")
    poles.add_argument("--out", required=True)
    poles.add_argument("--no-plots", action="store_true")
    poles.set_defaults(func=cmd_poles)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "command", None) in ("run", "compare"):
            if not args.preset and not args.config:
                raise ConfigError("give --preset or --config", key="--preset")
        return args.func(args)
    except ConfigError as exc:
        where = f" [{exc.key}]" if exc.key else ""
        print(f"mfaclab: config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"mfaclab: diverged: {exc}", file=sys.stderr)
        return EXIT_HALTED
    except MFACError as exc:
        print(f"mfaclab: {exc}", file=sys.stderr)
        return EXIT_HALTED


if __name__ == "__main__":
    sys.exit(main())
