"""Batch front-end: pnloops run | validate-config | list-presets.

Config files are flat ``key=value`` lines with dotted namespaces, e.g.::

    preset=circle-law
    sim.eps=0.025
    geom.radii=1.0,0.7,0.4
    barrier.radii_sets=1.0;1.0,0.5

and any key can be overridden with ``--set key=value``.  Exit codes: 0 all
checks PASS, 1 some check FAIL, 2 invalid configuration, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .barriers import BarrierError
from .corrector import CorrectorError
from .evolve import FrontTrace, SimulationError
from .experiments import PRESETS, preset_defaults, run_preset
from .layer import ProfileSolveError

log = logging.getLogger("pnloops")

ENV_OUTPUT = "PNLOOPS_OUTPUT"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

PRESET_HELP = {
    "operator-validation": "spectral eigenvalue, spectral vs quadrature, layer residual, constants",
    "circle-law": "single shrinking circle against R0^2 - 2 mu t",
    "nested-independence": "nested circles: plateaus and inner front vs its single-front control",
    "abar-convergence": "projected curvature term on a circle across eps",
    "corrector-study": "kernel, manufactured solution, orthogonality and decay of the corrector",
    "barrier-check": "subsolution slack and plateau bound of shrinking-circle barriers",
    "interaction-drift": "inner-front deviation caused by an outer front across eps and separation",
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str
    params: dict
    out_dir: str
    seed: int = 0
    sources: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parsing


def parse_config_text(text: str) -> dict:
    """Flat key=value pairs; '#' starts a comment, blank lines ignored."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        if key in out:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        out[key] = val
    return out


def _coerce(key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple) and default and isinstance(default[0], tuple):
            groups = [g for g in raw.split(";") if g.strip()]
            return tuple(tuple(float(v) for v in g.split(",")) for g in groups)
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        kind = type(default).__name__ if not isinstance(default, tuple) else "list of numbers"
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from None


def _validate(params: dict) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    for key, val in params.items():
        if key in ("sim.eps", "barrier.sigma_tilde", "aeps.gamma", "aeps.rho", "sim.T_final",
                   "sim.L", "op.sigma", "geom.radius", "layer.Xi", "sim.dt_factor"):
            need(val > 0, f"{key} must be positive")
        if key in ("sim.M", "op.M", "layer.m", "sim.output_every", "workers"):
            need(val >= 1, f"{key} must be >= 1")
        if key in ("geom.radii", "aeps.eps_list", "circle.trend_eps", "drift.separations"):
            need(all(v > 0 for v in val), f"{key} entries must be positive")
        if key == "geom.radii":
            need(len(val) >= 1, "geom.radii needs at least one radius")
    need(params.get("sim.eps", 0.1) < 0.5, "sim.eps must be < 0.5")
    need(params.get("aeps.gamma", 0.5) < 1, "aeps.gamma must be < 1")
    need(params.get("sim.dt_factor", 1.0) <= 1.0, "sim.dt_factor must be <= 1 (stability cap)")
    need(params["layer.kind"] in ("exact", "solved"), "layer.kind must be 'exact' or 'solved'")
    need(params.get("barrier.rho", 0.0) >= 0, "barrier.rho must be >= 0 (0 selects the default)")
    if "barrier.radii_sets" in params:
        need(all(len(g) >= 1 for g in params["barrier.radii_sets"]),
             "barrier.radii_sets groups must be non-empty")
    if params["potential"] != "calibrated-cosine":
        need(os.path.isfile(params["potential"]), f"potential table {params['potential']!r} not found")
        need(params["layer.kind"] == "solved", "a tabulated potential needs layer.kind=solved")


def build_config(raw: dict, overrides: dict | None = None, out: str | None = None,
                 preset: str | None = None, seed: int | None = None) -> ExperimentConfig:
    """Merge file values and overrides, type-check everything, resolve the output root."""
    merged = dict(raw)
    merged.update(overrides or {})
    if preset is not None:
        merged["preset"] = preset
    name = merged.pop("preset", None)
    if name is None:
        raise ConfigError("no preset given (preset=... or --preset)")
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    params = preset_defaults(name)
    out_dir = merged.pop("out.dir", None)
    sources = {}
    for key, val in merged.items():
        if key not in params:
            raise ConfigError(f"unknown key {key!r} for preset {name}")
        params[key] = _coerce(key, val, params[key])
        sources[key] = "override" if overrides and key in overrides else "file"
    if seed is not None:
        params["seed"] = int(seed)
    _validate(params)
    if out is not None:
        out_dir = out
    if out_dir is None:
        out_dir = os.path.join(os.environ.get(ENV_OUTPUT, "pnloops-output"), name)
    return ExperimentConfig(name, params, out_dir, params["seed"], sources)


def _parse_sets(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_table(path, table) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(table.columns)
        for row in table.rows:
            wr.writerow([_fmt(v) for v in row])


def emit_plot_data(trace: FrontTrace, kind: str, path) -> str:
    """Long-format CSV of a front trace.

    kind: 'radius' (t, front, radius), 'plateau' (t, region, value) with region
    = number of enclosing fronts, or 'contours' (frame, t, front, vertex, x, y).
    """
    if trace is None or not trace.times:
        raise ValueError("empty trace: nothing to emit")
    if kind not in ("radius", "plateau", "contours"):
        raise ValueError(f"unknown plot-data kind {kind!r}")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        if kind == "radius":
            wr.writerow(["t", "front", "radius"])
            R = trace.radius_array()
            for k, t in enumerate(trace.times):
                for i in range(trace.N):
                    wr.writerow([_fmt(t), i + 1, _fmt(R[k, i])])
        elif kind == "plateau":
            wr.writerow(["t", "region", "value"])
            P = trace.plateau_array()
            for k, t in enumerate(trace.times):
                for j in range(trace.N + 1):
                    wr.writerow([_fmt(t), j, _fmt(P[k, j])])
        else:
            wr.writerow(["frame", "t", "front", "vertex", "x", "y"])
            for k, (t, fronts) in enumerate(zip(trace.times, trace.fronts)):
                for i, f in enumerate(fronts):
                    for v, (x, y) in enumerate(f):
                        wr.writerow([k, _fmt(t), i + 1, v, _fmt(x), _fmt(y)])
    return str(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_outputs(cfg: ExperimentConfig, res, plots: bool = True) -> list:
    os.makedirs(cfg.out_dir, exist_ok=True)
    files = []
    for name, table in res.tables.items():
        path = os.path.join(cfg.out_dir, f"{name}.csv")
        write_table(path, table)
        files.append(path)
    for name, trace in res.traces.items():
        if isinstance(trace, FrontTrace):
            for kind in ("radius", "plateau", "contours"):
                files.append(emit_plot_data(trace, kind,
                                            os.path.join(cfg.out_dir, f"{name}_{kind}.csv")))
    for rep in res.traces.get("slack", []):
        path = os.path.join(cfg.out_dir, f"slack_N{len(rep.band_worst)}.csv")
        rep.write_csv(path)
        files.append(path)
    if plots:
        from .plotting import render_figures
        files.extend(render_figures(res, cfg.out_dir))
    summary = [c.line() for c in res.checks]
    overall = "PASS" if res.passed else "FAIL"
    with open(os.path.join(cfg.out_dir, "summary.txt"), "w") as fh:
        fh.write("\n".join(summary + [f"{overall} {cfg.preset}"]) + "\n")
    with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
        json.dump(_jsonable({"preset": cfg.preset, "passed": res.passed,
                             "checks": [c.__dict__ for c in res.checks]}),
                  fh, indent=2, sort_keys=True)
    manifest = {
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "preset": cfg.preset,
        "seed": cfg.seed,
        "params": cfg.params,
        "overridden": cfg.sources,
        "constants": res.constants,
        "runtime_seconds": round(res.runtime, 3),
        "files": sorted(os.path.basename(f) for f in files),
    }
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
    return files


# ---------------------------------------------------------------------------
# entry point


def run_experiment(cfg: ExperimentConfig, plots: bool = True) -> int:
    log.info("preset %s -> %s", cfg.preset, cfg.out_dir)
    try:
        res = run_preset(cfg.preset, cfg.params)
    except (SimulationError, CorrectorError, BarrierError, ProfileSolveError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical abort in {cfg.preset}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_outputs(cfg, res, plots)
    for c in res.checks:
        print(c.line())
    print(f"{'PASS' if res.passed else 'FAIL'} {cfg.preset} ({res.runtime:.1f} s) -> {cfg.out_dir}")
    return EXIT_OK if res.passed else EXIT_FAIL


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pnloops", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    run = sub.add_parser("run", help="run a preset")
    run.add_argument("config", nargs="?", help="key=value config file")
    run.add_argument("--preset")
    run.add_argument("--set", action="append", metavar="KEY=VALUE")
    run.add_argument("--out", help=f"output directory (default ${ENV_OUTPUT}/<preset>)")
    run.add_argument("--seed", type=int)
    run.add_argument("--no-plots", action="store_true")
    val = sub.add_parser("validate-config", help="type-check a config without computing")
    val.add_argument("config", nargs="?")
    val.add_argument("--preset")
    val.add_argument("--set", action="append", metavar="KEY=VALUE")
    sub.add_parser("list-presets", help="list presets and their default parameters")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "list-presets":
        for name in sorted(PRESETS):
            print(f"{name}: {PRESET_HELP[name]}")
            for k, v in sorted(preset_defaults(name).items()):
                print(f"    {k}={_show(v)}")
        return EXIT_OK
    try:
        raw = {}
        if args.config:
            with open(args.config) as fh:
                raw = parse_config_text(fh.read())
        cfg = build_config(raw, _parse_sets(args.set), getattr(args, "out", None), args.preset,
                           getattr(args, "seed", None))
    except (ConfigError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.verb == "validate-config":
        print(f"OK {cfg.preset}")
        for k, v in sorted(cfg.params.items()):
            print(f"    {k}={_show(v)}")
        return EXIT_OK
    return run_experiment(cfg, plots=not args.no_plots)


def _show(v) -> str:
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return ";".join(",".join(f"{x:g}" for x in g) for g in v)
    if isinstance(v, tuple):
        return ",".join(f"{x:g}" for x in v)
    return str(v)


if __name__ == "__main__":
    sys.exit(main())
