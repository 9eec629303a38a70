"""Command-line front end.

Every command resolves its parameters into one JSON config (defaults, then
``--config``, then explicit flags), runs, and writes CSV or JSON whose header
embeds that config, so ``--config <previous output>`` reproduces a run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__, ode, sim, theory, tree
from .distributions import Uniform, from_json
from .errors import ConfigError, QsimError
from .streams import spawn

CONFIG_PREFIX = "# config: "

DEFAULTS = {
    "phase": {"a_grid": [0.5, 1.0, 1.5, 2.0, 2.5], "r_grid": [0.0, 0.25, 0.5, 0.75, 1.0]},
    "threshold": {"a_grid": [1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0]},
    "mr-curve": {"a": 2.0, "r_grid": "0.5:1:51"},
    "simulate": {
        "dist": {"kind": "uniform", "a": 1.5},
        "r": 0.4,
        "caps": {"t_max": 200.0, "pop_max": 100000, "event_max": 100000000},
        "replicates": 1000,
    },
    "tree": {
        "dist": {"kind": "uniform", "a": 1.5},
        "r": 0.8,
        "n_samples": 100000,
        "cap": tree.DEFAULT_LINEAGE_CAP,
        "n_trees": 1000,
        "node_cap": 100000,
    },
    "ode": {"a1": 2.0, "a2": 1.0, "r": 0.25, "v1_0": 1.0, "v2_0": 0.0, "t_end": 10.0, "n_points": 101},
}


# ----------------------------------------------------------------- formatting


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _meta(command, config):
    return {"program": "qsim", "version": __version__, "command": command,
            "seed": config.get("seed", 0), "config": config}


def render_csv(command, config, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# qsim {__version__} {command}\n")
    buf.write(CONFIG_PREFIX + json.dumps(config, sort_keys=True) + "\n")
    buf.write(f"# seed: {config.get('seed', 0)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def render_json(command, config, payload) -> str:
    doc = {"meta": _meta(command, config), **payload}
    return json.dumps(_json_safe(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


# ------------------------------------------------------------- config handling


def parse_grid(grid, name):
    """List of floats from ``[..]``, ``"x,y,z"`` or inclusive ``"start:stop:num"``."""
    if isinstance(grid, str):
        if ":" in grid:
            parts = grid.split(":")
            if len(parts) != 3:
                raise ConfigError(f"{name}: expected start:stop:num, got {grid!r}")
            try:
                lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError:
                raise ConfigError(f"{name}: bad range {grid!r}") from None
            if n < 1:
                raise ConfigError(f"{name}: need at least one point")
            values = np.linspace(lo, hi, n).tolist()
        else:
            try:
                values = [float(v) for v in grid.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"{name}: bad list {grid!r}") from None
    elif isinstance(grid, (list, tuple)):
        try:
            values = [float(v) for v in grid]
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: grid entries must be numbers") from None
    else:
        raise ConfigError(f"{name}: unsupported grid {grid!r}")
    if not values:
        raise ConfigError(f"{name}: empty grid")
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"{name}: grid must be finite")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name}: grid must be strictly increasing")
    return values


def load_config(path):
    """Config object from a JSON file or from the header of an earlier output."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    if text.startswith("#"):
        for line in text.splitlines():
            if line.startswith(CONFIG_PREFIX):
                return json.loads(line[len(CONFIG_PREFIX):])
        raise ConfigError(f"{path!r} has a comment header but no embedded config")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
    if isinstance(doc, dict) and isinstance(doc.get("meta"), dict) and "config" in doc["meta"]:
        return doc["meta"]["config"]
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _merge(base, override):
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(command, args):
    cfg = json.loads(json.dumps(DEFAULTS[command]))
    if args.config:
        cfg = _merge(cfg, load_config(args.config))
    flags = {}
    for key, dest in FLAG_KEYS.get(command, {}).items():
        value = getattr(args, dest, None)
        if value is not None:
            flags[key] = value
    if args.seed is not None:
        flags["seed"] = args.seed
    if "dist" in flags and isinstance(flags["dist"], str):
        try:
            flags["dist"] = json.loads(flags["dist"])
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--dist is not valid JSON: {exc}") from None
    caps = {k: flags.pop(k) for k in ("t_max", "pop_max", "event_max") if k in flags}
    cfg = _merge(cfg, flags)
    if caps:
        cfg["caps"] = _merge(cfg.get("caps", {}), caps)
    cfg.setdefault("seed", 0)
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or not (0 <= cfg["seed"] < 2**64):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg['seed']!r}")
    for key in ("a_grid", "r_grid"):
        if key in cfg:
            cfg[key] = parse_grid(cfg[key], key)
    return cfg


FLAG_KEYS = {
    "phase": {"a_grid": "a_grid", "r_grid": "r_grid"},
    "threshold": {"a_grid": "a_grid"},
    "mr-curve": {"a": "a", "r_grid": "r_grid"},
    "simulate": {"dist": "dist", "r": "r", "replicates": "replicates",
                 "t_max": "t_max", "pop_max": "pop_max", "event_max": "event_max"},
    "tree": {"dist": "dist", "r": "r", "n_samples": "n_samples", "cap": "cap",
             "n_trees": "n_trees", "node_cap": "node_cap"},
    "ode": {"a1": "a1", "a2": "a2", "r": "r", "v1_0": "v1_0", "v2_0": "v2_0",
            "t_end": "t_end", "n_points": "n_points"},
}


def _dist(cfg):
    try:
        return from_json(cfg["dist"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad distribution descriptor: {exc}") from None


def _positive_int(cfg, key):
    v = cfg.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"{key} must be a positive integer, got {v!r}")
    return v


def _unit(cfg, key="r"):
    v = cfg.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not (0.0 <= v <= 1.0):
        raise ConfigError(f"{key} must lie in [0, 1], got {v!r}")
    return float(v)


# -------------------------------------------------------------------- commands


def cmd_phase(cfg, fmt_):
    rows, failed = [], 0
    for a in cfg["a_grid"]:
        for r in cfg["r_grid"]:
            if not (a > 0):
                raise ConfigError(f"a must be positive, got {a!r}")
            if not (0.0 <= r <= 1.0):
                raise ConfigError(f"r must lie in [0, 1], got {r!r}")
            try:
                v = theory.classify_phase(Uniform(a), r)
                rows.append((a, r, v.phase.value, v.witness.m_of_r, v.r_I_boundary, v.r_c, None))
            except QsimError as exc:
                failed += 1
                rows.append((a, r, "error", None, None, None, f"{type(exc).__name__}: {exc}"))
    header = ["a", "r", "phase", "m", "r_I_boundary", "r_c", "error"]
    if fmt_ == "json":
        payload = {"rows": [dict(zip(header, row)) for row in rows]}
        return render_json("phase", cfg, payload), failed
    return render_csv("phase", cfg, header, rows), failed


def cmd_threshold(cfg, fmt_):
    rows, failed = [], 0
    for a in cfg["a_grid"]:
        r_i = 1.0 - 1.0 / a if a > 1 else None
        try:
            rows.append((a, theory.critical_threshold(a), r_i, None))
        except QsimError as exc:
            failed += 1
            rows.append((a, None, r_i, f"{type(exc).__name__}: {exc}"))
    header = ["a", "r_c", "r_I_boundary", "error"]
    if fmt_ == "json":
        return render_json("threshold", cfg, {"rows": [dict(zip(header, r)) for r in rows]}), failed
    return render_csv("threshold", cfg, header, rows), failed


def cmd_mr_curve(cfg, fmt_):
    a = cfg["a"]
    if not isinstance(a, (int, float)) or not a > 0:
        raise ConfigError(f"a must be positive, got {a!r}")
    rows = []
    for r in cfg["r_grid"]:
        if not (0.0 <= r <= 1.0):
            raise ConfigError(f"r must lie in [0, 1], got {r!r}")
        cond = theory.evaluate_conditions(Uniform(float(a)), r)
        rows.append((r, cond.m_of_r, cond.condition_I_holds))
    header = ["r", "m_of_r", "condition_I"]
    if fmt_ == "json":
        return render_json("mr-curve", cfg, {"rows": [dict(zip(header, r)) for r in rows]}), 0
    return render_csv("mr-curve", cfg, header, rows), 0


def cmd_simulate(cfg, fmt_, threads=None, summary_path=None):
    dist = _dist(cfg)
    r = _unit(cfg)
    n = _positive_int(cfg, "replicates")
    try:
        caps = sim.SimCaps(t_max=float(cfg["caps"]["t_max"]), pop_max=int(cfg["caps"]["pop_max"]),
                           event_max=int(cfg["caps"]["event_max"]), n_samples=0)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad caps: {exc}") from None
    result = sim.simulate_batch(sim.ModelParams(dist, r), caps, n, cfg["seed"], threads=threads)
    summary = result.summary()
    summary["phase"] = theory.classify_phase(dist, r).to_json()
    if summary_path:
        with open(summary_path, "w") as fh:
            fh.write(render_json("simulate", cfg, {"summary": summary}))
    if fmt_ == "json":
        return render_json("simulate", cfg, {"summary": summary}), 0
    header = ["replicate", "verdict", "reason", "final_time", "final_pop", "genotypes_created"]
    rows = [(row.replicate, row.verdict.value, row.reason.value if row.reason else None,
             row.final_time, row.final_pop, row.genotypes_created) for row in result.rows]
    return render_csv("simulate", cfg, header, rows), 0


def cmd_tree(cfg, fmt_):
    dist = _dist(cfg)
    r = _unit(cfg)
    params = sim.ModelParams(dist, r)
    n_samples = _positive_int(cfg, "n_samples")
    if n_samples < 2:
        raise ConfigError("n_samples must be >= 2")
    est = tree.estimate_m(params, n_samples, _positive_int(cfg, "cap"), spawn(cfg["seed"], 0),
                          strict=False)
    ts = tree.tree_statistics(params, _positive_int(cfg, "n_trees"), _positive_int(cfg, "node_cap"),
                              spawn(cfg["seed"], 1), lineage_cap=cfg["cap"])
    m_theory = theory.evaluate_conditions(dist, r).m_of_r
    header = ["r", "m_theory", "m_hat", "m_se", "lineage_truncated_fraction", "n_trees",
              "tree_truncated_fraction", "mean_finite_tree_size", "max_tree_size"]
    row = (r, m_theory, est.m, est.se, est.truncated_fraction, ts.n_trees,
           ts.truncated_fraction, ts.mean_size_finite, ts.max_size)
    if fmt_ == "json":
        return render_json("tree", cfg, {"stats": dict(zip(header, row))}), 0
    return render_csv("tree", cfg, header, [row]), 0


def cmd_ode(cfg, fmt_):
    try:
        p = ode.OdeParams(float(cfg["a1"]), float(cfg["a2"]), float(cfg["r"]),
                          float(cfg["v1_0"]), float(cfg["v2_0"]))
        t_end = float(cfg["t_end"])
        n_points = _positive_int(cfg, "n_points")
        if not (t_end >= 0 and math.isfinite(t_end)):
            raise ConfigError(f"t_end must be finite and >= 0, got {t_end!r}")
        verdict = ode.ratio_limit(p)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad ode config: {exc}") from None
    if fmt_ == "json":
        payload = {"verdict": {**verdict.to_json(), "threshold": p.threshold}}
        return render_json("ode", cfg, payload), 0
    return render_csv("ode", cfg, ["t", "v1", "v2", "ratio"], ode.trajectory(p, t_end, n_points)), 0


# ------------------------------------------------------------------------ main


def build_parser():
    parser = argparse.ArgumentParser(prog="qsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file or a previous qsim output")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        return p

    p = common(sub.add_parser("phase", help="phase of the uniform law on an (a, r) grid"))
    p.add_argument("--a-grid", dest="a_grid")
    p.add_argument("--r-grid", dest="r_grid")

    p = common(sub.add_parser("threshold", help="critical mutation probability for each a"))
    p.add_argument("--a-grid", dest="a_grid")

    p = common(sub.add_parser("mr-curve", help="m(r) for the uniform law on [0, a]"))
    p.add_argument("--a", type=float)
    p.add_argument("--r-grid", dest="r_grid")

    p = common(sub.add_parser("simulate", help="Monte Carlo survival of the evolution process"))
    p.add_argument("--dist", help='JSON descriptor, e.g. \'{"kind":"uniform","a":1.5}\'')
    p.add_argument("--r", type=float)
    p.add_argument("--replicates", type=int)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--pop-max", dest="pop_max", type=int)
    p.add_argument("--event-max", dest="event_max", type=int)
    p.add_argument("--threads", type=int, help="worker threads (overrides QSIM_THREADS)")
    p.add_argument("--summary", help="also write the JSON summary here")

    p = common(sub.add_parser("tree", help="genotype-tree statistics"))
    p.add_argument("--dist")
    p.add_argument("--r", type=float)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--node-cap", dest="node_cap", type=int)

    p = common(sub.add_parser("ode", help="two-genome ODE trajectory and ratio limit"))
    for name in ("a1", "a2", "r", "v1_0", "v2_0"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--n-points", dest="n_points", type=int)
    return parser


COMMANDS = {
    "phase": cmd_phase,
    "threshold": cmd_threshold,
    "mr-curve": cmd_mr_curve,
    "simulate": cmd_simulate,
    "tree": cmd_tree,
    "ode": cmd_ode,
}


def _fail(exc, code=2):
    err = {"error": str(exc), "type": type(exc).__name__}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        kwargs = {}
        if args.command == "simulate":
            kwargs = {"threads": args.threads, "summary_path": args.summary}
        text, failed = COMMANDS[args.command](cfg, args.format, **kwargs)
    except (ConfigError, ValueError, TypeError) as exc:
        return _fail(exc)
    except QsimError as exc:
        return _fail(exc, code=1)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
