"""Command-line front end: ``plaplace <command> [--config FILE] [flags]``.

Configuration precedence is flags, then the config file (JSON or TOML),
then defaults. Every report is JSON with a fixed envelope; all values
that change between identical runs live under the ``timestamp`` key.
Exit status: 0 success, 1 computation error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
import time
from datetime import datetime, timezone

import jsonschema
import numpy as np
import pyamg
import scipy

from plaplace import __version__
from plaplace import acceptance as acc
from plaplace import capacity as cap
from plaplace import spectra as sp
from plaplace.conformal import SingularityError, curvature_at, p_laplace_residual
from plaplace.descriptors import DescriptorError, build_condenser, build_factor, build_measure, build_region, load_document
from plaplace.dimension import PointCloud, Theorem4Config, box_counting_dim, frostman_point, theorem4_experiment
from plaplace.geometry import Ball
from plaplace.thinness import ThinOptions, find_escape_ray, p_thin_partial_sums, wiener_partial_sums
from plaplace.wolff import WolffParams, wolff_potential, wolff_upper_report

__all__ = ["main", "CONFIG_SCHEMAS", "REPORT_SCHEMA", "ConfigError", "canonical_json"]

REPORT_FORMAT = "plaplace-report/1"


class ConfigError(ValueError):
    """The run configuration does not validate."""


_num = {"type": "number"}
_int = {"type": "integer"}
_bool = {"type": "boolean"}
_vec = {"type": "array", "items": {"type": "number"}}
_obj = {"type": "object"}
_str = {"type": "string"}


def _schema(props: dict, required=()) -> dict:
    base = {"seed": _int, "output": _str, "csv": _str}
    return {"type": "object", "properties": {**base, **props}, "required": list(required), "additionalProperties": False}


CONFIG_SCHEMAS: dict[str, dict] = {
    "wolff": _schema(
        {
            "mode": {"enum": ["potential", "upper"]},
            "measure": _obj,
            "points": {"type": "array", "items": _vec},
            "p": _num, "r": _num, "tol": _num,
            "x0": _vec, "m": _num, "eps": _num, "r0": _num,
            "i_min": _int, "i_max": _int, "samples": _int,
        },
        ["measure", "p"],
    ),
    "capacity": _schema(
        {
            "preset": {"enum": ["spherical"]},
            "n": _int, "p": _num, "r": _num, "R": _num, "h": _num,
            "grid": {"enum": ["meridian", "cartesian"]},
            "condenser": _obj,
        },
        ["p"],
    ),
    "thin": _schema(
        {
            "region": {"type": ["string", "object"]},
            "n": _int, "p": _num, "i_min": _int, "i_max": _int,
            "series": {"enum": ["annulus", "wiener", "both"]},
            "escape": _bool, "t0": _num, "directions": _int,
            "h_max": _num, "cells_per_radius": _num, "truncation": _num,
        },
        ["p"],
    ),
    "curvature": _schema({"factor": _obj, "points": {"type": "array", "items": _vec}, "p": _num, "residual": _bool}, ["factor", "points", "p"]),
    "cone": _schema({"spectrum": _vec, "p": _num, "r": _int, "tol": _num}, ["spectrum"]),
    "dimension": _schema(
        {
            "mode": {"enum": ["box", "frostman"]},
            "set": _obj, "scales": _vec, "n_scales": _int,
            "d": _num, "candidates": {"type": "array", "items": _vec}, "t_range": _vec, "cap": _num,
        },
        ["set"],
    ),
    "theorem4": _schema(
        {
            "n": _int, "k": _int, "n_points": _int, "n_rays": _int, "count": _int,
            "scales": _vec, "n_scales": _int, "dim_tol": _num, "wolff": _bool, "wolff_eps": _num,
        }
    ),
    "verify": _schema({"suite": _str, "quick": _bool}),
}

DEFAULTS: dict[str, dict] = {
    "wolff": {"mode": "potential", "r": 1.0, "tol": 1e-8, "eps": 0.2, "r0": 0.5, "i_min": 4, "i_max": 12, "samples": 64},
    "capacity": {"n": 3, "r": 1.0, "R": 2.0, "h": 1.0 / 32.0, "grid": "meridian"},
    "thin": {"region": "ball-chain(2, 1)", "n": 4, "i_min": 1, "i_max": 10, "series": "annulus", "escape": True, "t0": 0.5, "directions": 1024},
    "curvature": {"residual": False},
    "cone": {"tol": 0.0},
    "dimension": {"mode": "box", "n_scales": 6},
    "theorem4": {"n": 5, "k": 2},
    "verify": {"suite": "all", "quick": False},
}

REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "format": {"const": REPORT_FORMAT},
        "command": {"enum": sorted(CONFIG_SCHEMAS)},
        "ok": _bool,
        "seed": _int,
        "config": _obj,
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "versions": {"type": "object", "additionalProperties": {"type": "string"}},
        "result": {"type": ["object", "array"]},
        "timestamp": _obj,
    },
    "required": ["format", "command", "ok", "seed", "config", "config_hash", "versions", "result", "timestamp"],
    "additionalProperties": False,
}


def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if k != "_summary"}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=1)


# Command implementations; each returns (ok, result, csv_rows | None).


def _cmd_wolff(cfg):
    mu = build_measure(cfg["measure"])
    n = mu.dim
    if cfg["mode"] == "upper":
        x0 = np.asarray(cfg.get("x0", [0.0] * n), dtype=float)
        if "m" not in cfg:
            raise ConfigError("upper mode needs 'm'")
        rep = wolff_upper_report(mu, x0, cfg["p"], cfg["m"], cfg["eps"], cfg["r0"], range(cfg["i_min"], cfg["i_max"] + 1),
                                 cfg["samples"], seed=cfg["seed"], tol=cfg["tol"])
        rows = list(csv.reader(io.StringIO(rep.to_csv())))
        return bool(rep.uniform_ok and rep.certificate["summable"]), rep.to_dict(), rows
    points = cfg.get("points") or [[0.0] * n]
    params = WolffParams(cfg["p"], cfg["r"], cfg["tol"])
    out = []
    for x in points:
        v = wolff_potential(mu, x, params)
        out.append({"x": list(x), "value": v.value, "lower": v.lower, "upper": v.upper, "intervals": v.intervals,
                    "head_exact": v.head_exact, "diagnostic": v.diagnostic})
    rows = [["x", "value", "lower", "upper"]] + [[" ".join(map(repr, r["x"])), repr(r["value"]), repr(r["lower"]), repr(r["upper"])] for r in out]
    return True, {"values": out}, rows


def _cmd_capacity(cfg):
    p = cfg["p"]
    if cfg.get("preset") == "spherical":
        n, r, R, h = cfg["n"], cfg["r"], cfg["R"], cfg["h"]
        oracle = cap.spherical_condenser_oracle(n, p, r, R)
        omega, K = Ball((0.0,) * n, R), Ball((0.0,) * n, r)
        if cfg["grid"] == "meridian":
            grid = cap.MeridianGrid.uniform(n, -R - 4 * h, R + 4 * h, R + 4 * h, h)
        else:
            grid = cap.Grid.from_bounds((-R,) * n, (R,) * n, h)
        res = cap.solve_condenser(cap.Condenser((K,), omega, grid), p)
        rel = res.value / oracle - 1.0
        d = res.to_dict()
        d.pop("feasible_u", None)
        return True, {"oracle": oracle, "value": res.value, "relative_error": rel, "solve": d}, None
    if "condenser" not in cfg:
        raise ConfigError("capacity needs 'preset' or 'condenser'")
    res = cap.solve_condenser(build_condenser(cfg["condenser"]), p)
    d = res.to_dict()
    d.pop("feasible_u", None)
    rows = [["iteration", "energy"]] + [[i, repr(float(e))] for i, e in enumerate(res.energy_history)]
    return bool(res.converged), d, rows


def _cmd_thin(cfg):
    n, p = cfg["n"], cfg["p"]
    region = cfg["region"]
    if isinstance(region, str):
        from plaplace.descriptors import parse_call

        name, args = parse_call(region)
        region = {"family": name, "args": args, "n": n} if name == "ball-chain" else {"family": name, "n": n, "p": p}
    E = build_region(region)
    opts = ThinOptions()
    for key in ("h_max", "cells_per_radius", "truncation"):
        if key in cfg:
            setattr(opts, key, float(cfg[key]))
    x0 = np.zeros(n)
    i_range = range(cfg["i_min"], cfg["i_max"] + 1)
    out, rows = {}, [["series", "i", "term", "partial_sum", "capacity"]]
    kinds = ["annulus", "wiener"] if cfg["series"] == "both" else [cfg["series"]]
    for kind in kinds:
        fn = p_thin_partial_sums if kind == "annulus" else wiener_partial_sums
        s = fn(E, x0, p, i_range, opts)
        out[kind] = s.to_dict()
        rows += [[kind, r.i, repr(r.term), repr(r.partial_sum), repr(r.capacity)] for r in s.rows]
    if cfg["escape"]:
        esc = find_escape_ray(E, x0, cfg["t0"], cfg["directions"], cfg["seed"])
        out["escape"] = {"found": esc.found, "direction": None if esc.direction is None else list(esc.direction),
                         "blocked_fraction": esc.blocked_fraction, "n_tested": esc.n_tested, "verified": esc.verified}
    return True, out, rows


def _cmd_curvature(cfg):
    f = build_factor(cfg["factor"])
    out = []
    for x in cfg["points"]:
        rep = curvature_at(f, x, cfg["p"]).to_dict()
        if cfg["residual"]:
            rep["residual"] = p_laplace_residual(f, x)
        out.append(rep)
    return True, {"points": out}, None


def _cmd_cone(cfg):
    s = sp.EigenSpectrum.from_values(cfg["spectrum"])
    out = {"spectrum": list(s.values), "J": s.trace}
    ok = True
    if "p" in cfg:
        out["ap_spectrum"] = list(sp.ap_spectrum(s, cfg["p"]).values)
        out["ap_functional"] = sp.ap_functional(s, cfg["p"])
        out["ap_member"] = sp.cone_membership(s, sp.ConeSpec.ap(cfg["p"]), cfg["tol"])
    if "r" in cfg:
        out["bochner"] = sp.bochner_form_eigenvalue(s, cfg["r"])
        out["rr_member"] = sp.cone_membership(s, sp.ConeSpec.rr(cfg["r"]), cfg["tol"])
    if "p" not in cfg and "r" not in cfg:
        raise ConfigError("cone needs 'p' or 'r'")
    return ok, out, None


def _cmd_dimension(cfg):
    mu = build_measure(cfg["set"])
    if cfg["mode"] == "frostman":
        for key in ("d", "candidates", "t_range"):
            if key not in cfg:
                raise ConfigError(f"frostman mode needs '{key}'")
        res = frostman_point(mu, cfg["d"], cfg["candidates"], tuple(cfg["t_range"]), cfg.get("cap", math.inf))
        return res.found, {"found": res.found, "x0": res.x0, "C": res.C, "constants": list(res.constants)}, None
    if "scales" not in cfg or len(cfg["scales"]) != 2:
        raise ConfigError("box mode needs 'scales' = [delta_min, delta_max]")
    bc = box_counting_dim(PointCloud(mu.points, getattr(mu, "descriptor", {})), tuple(cfg["scales"]), cfg["n_scales"], seed=cfg["seed"])
    rows = [["delta", "count"]] + [[repr(d), c] for d, c in zip(bc.scales, bc.counts)]
    return True, {"dim": bc.dim, "fit_residual": bc.fit_residual, "scales": list(bc.scales), "counts": list(bc.counts), "spacing": bc.spacing}, rows


def _cmd_theorem4(cfg):
    keys = ("n", "k", "n_points", "n_rays", "count", "n_scales", "dim_tol", "wolff", "wolff_eps")
    kw = {k: cfg[k] for k in keys if k in cfg}
    if "scales" in cfg:
        kw["scales"] = tuple(cfg["scales"])
    rep = theorem4_experiment(Theorem4Config(seed=cfg["seed"], **kw))
    return bool(rep["ok"]), rep, None


_COMMANDS = {
    "wolff": _cmd_wolff,
    "capacity": _cmd_capacity,
    "thin": _cmd_thin,
    "curvature": _cmd_curvature,
    "cone": _cmd_cone,
    "dimension": _cmd_dimension,
    "theorem4": _cmd_theorem4,
}


# Argument parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _json_or_path(text: str):
    text = text.strip()
    if text.startswith("{") or text.startswith("["):
        try:
            return json.loads(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"invalid inline JSON: {exc}") from exc
    return load_document(text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="plaplace", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"plaplace {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON or TOML config file")
        p.add_argument("--output", "-o", help="report path (default: standard output)")
        p.add_argument("--csv", help="CSV table path, where the command has one")
        p.add_argument("--seed", type=int)
        return p

    w = common(sub.add_parser("wolff", help="Wolff potentials and the upper-bound report"))
    w.add_argument("--measure", type=_json_or_path, help="measure descriptor (inline JSON or file)")
    w.add_argument("--mode", choices=["potential", "upper"])
    w.add_argument("--x", type=_floats, action="append", dest="points", help="evaluation point; repeatable")
    for name in ("p", "r", "tol", "m", "eps", "r0"):
        w.add_argument(f"--{name}", type=float)
    w.add_argument("--x0", type=_floats)
    for name in ("i-min", "i-max", "samples"):
        w.add_argument(f"--{name}", type=int)

    c = common(sub.add_parser("capacity", help="condenser capacity"))
    c.add_argument("--preset", choices=["spherical"])
    c.add_argument("--n", type=int)
    for name in ("p", "r", "R", "h"):
        c.add_argument(f"--{name}", type=float)
    c.add_argument("--grid", choices=["meridian", "cartesian"])
    c.add_argument("--condenser", type=_json_or_path)

    t = common(sub.add_parser("thin", help="thinness series and escape rays"))
    t.add_argument("--region")
    t.add_argument("--n", type=int)
    t.add_argument("--p", type=float)
    t.add_argument("--i-min", type=int)
    t.add_argument("--i-max", type=int)
    t.add_argument("--series", choices=["annulus", "wiener", "both"])
    t.add_argument("--escape", action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--t0", type=float)
    t.add_argument("--directions", type=int)
    for name in ("h-max", "cells-per-radius", "truncation"):
        t.add_argument(f"--{name}", type=float)

    k = common(sub.add_parser("curvature", help="curvature spectra of a conformal factor"))
    k.add_argument("--factor", type=_json_or_path)
    k.add_argument("--x", type=_floats, action="append", dest="points")
    k.add_argument("--p", type=float)
    k.add_argument("--residual", action=argparse.BooleanOptionalAction, default=None)

    o = common(sub.add_parser("cone", help="A^(p) and Bochner cone membership of a spectrum"))
    o.add_argument("--spectrum", type=_floats)
    o.add_argument("--p", type=float)
    o.add_argument("--r", type=int)
    o.add_argument("--tol", type=float)

    d = common(sub.add_parser("dimension", help="box counting and Frostman points"))
    d.add_argument("--set", type=_json_or_path, dest="set")
    d.add_argument("--mode", choices=["box", "frostman"])
    d.add_argument("--scales", type=_floats)
    d.add_argument("--n-scales", type=int)
    d.add_argument("--d", type=float)
    d.add_argument("--candidate", type=_floats, action="append", dest="candidates")
    d.add_argument("--t-range", type=_floats)
    d.add_argument("--cap", type=float)

    e = common(sub.add_parser("theorem4", help="singular-set dimension experiment"))
    for name in ("n", "k", "n-points", "n-rays", "count", "n-scales"):
        e.add_argument(f"--{name}", type=int)
    e.add_argument("--scales", type=_floats)
    e.add_argument("--dim-tol", type=float)
    e.add_argument("--wolff", action=argparse.BooleanOptionalAction, default=None)
    e.add_argument("--wolff-eps", type=float)

    v = common(sub.add_parser("verify", help="run the acceptance suite"))
    v.add_argument("--suite", help=f"'all', a suite ({', '.join(acc.SUITES)}) or comma-separated criterion ids")
    v.add_argument("--quick", action=argparse.BooleanOptionalAction, default=None)
    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and flags, then validate."""
    cmd = args.command
    cfg = dict(DEFAULTS.get(cmd, {}))
    cfg["seed"] = 0
    if args.config:
        try:
            doc = load_document(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not doc:
            raise ConfigError("config file is empty")
        try:
            jsonschema.validate(doc, CONFIG_SCHEMAS[cmd])
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config schema: {exc.message}") from exc
        cfg.update(doc)
    skip = {"command", "config"}
    for key, val in vars(args).items():
        if key in skip or val is None:
            continue
        cfg[key] = val
    try:
        jsonschema.validate(_plain(cfg), CONFIG_SCHEMAS[cmd])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema: {exc.message}") from exc
    missing = [k for k in CONFIG_SCHEMAS[cmd]["required"] if k not in cfg]
    if missing:
        raise ConfigError(f"missing required settings: {missing}")
    return cfg


def _versions() -> dict:
    return {"plaplace": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pyamg": pyamg.__version__}


def make_report(cmd: str, cfg: dict, ok: bool, result, started: float, extra_time: dict | None = None) -> dict:
    public = {k: v for k, v in cfg.items() if k not in ("output", "csv")}
    body = canonical_json(public)
    report = {
        "format": REPORT_FORMAT,
        "command": cmd,
        "ok": bool(ok),
        "seed": int(cfg.get("seed", 0)),
        "config": _plain(public),
        "config_hash": hashlib.sha256(body.encode()).hexdigest(),
        "versions": _versions(),
        "result": _plain(result),
        "timestamp": {
            "utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "elapsed_s": round(time.perf_counter() - started, 3),
            **(extra_time or {}),
        },
    }
    jsonschema.validate(json.loads(canonical_json(report)), REPORT_SCHEMA)
    return report


def _emit(report: dict, cfg: dict, rows) -> None:
    text = canonical_json(report) + "\n"
    if cfg.get("output"):
        with open(cfg["output"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.get("csv") and rows:
        with open(cfg["csv"], "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)


def _run_verify(cfg: dict, started: float) -> int:
    try:
        ids = acc.resolve_suite(cfg["suite"])
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    echo = (lambda line: print(line, file=sys.stderr, flush=True)) if not cfg.get("output") else (lambda line: print(line, flush=True))
    results = acc.run_suite(ids, cfg["seed"], cfg["quick"], echo)
    passed = all(r.passed for r in results)
    budgets = all(r.within_budget for r in results)
    echo(f"{sum(r.passed and r.within_budget for r in results)}/{len(results)} criteria passed")
    timing = {"criterion_seconds": {str(r.id): round(r.seconds, 3) for r in results},
              "within_budget": {str(r.id): r.within_budget for r in results}}
    report = make_report("verify", cfg, passed, {"criteria": [r.to_dict() for r in results]}, started, timing)
    rows = [["id", "name", "passed", "seconds", "budget_s"]] + [[r.id, r.name, r.passed, f"{r.seconds:.1f}", r.budget_s] for r in results]
    _emit(report, cfg, rows)
    return 0 if passed and budgets else 1


def _join_negative_values(argv: list[str]) -> list[str]:
    """Attach values such as ``-0.5,0.5`` to the preceding ``--flag``.

    argparse would otherwise read a leading minus as the start of an option.
    """
    out: list[str] = []
    for a in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and len(a) > 1 and a[0] == "-" and (a[1].isdigit() or a[1] == "."):
            out[-1] = f"{out[-1]}={a}"
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    started = time.perf_counter()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
    except (ConfigError, DescriptorError, argparse.ArgumentTypeError) as exc:
        print(f"plaplace: configuration error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    cmd = args.command
    try:
        if cmd == "verify":
            return _run_verify(cfg, started)
        ok, result, rows = _COMMANDS[cmd](cfg)
    except (ConfigError, DescriptorError, sp.InvalidParameterError) as exc:
        print(f"plaplace: configuration error: {exc}", file=sys.stderr)
        return 2
    except (SingularityError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"plaplace: {cmd} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _emit(make_report(cmd, cfg, ok, result, started), cfg, rows)
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
