"""Build measures, shapes, condensers, region sets and conformal factors from descriptors.

Descriptors are plain dicts as read from JSON or TOML. Parametric
families may also be written as call strings such as ``"ball-chain(2, 1.0)"``
or ``"cantor-dust(0.3333, 8)"``.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from plaplace.capacity import Condenser, Grid
from plaplace.conformal import GridField, LogForm, PlaneDistPower, RadialPower
from plaplace.geometry import Annulus, Ball, BallUnion, Box, CellMask, HalfSpace, PlanePatch
from plaplace.measures import Atomic, GridDensity, RadialProfile, cantor_dust, k_plane_patch, segment
from plaplace.thinness import ball_chain, separating_chain

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = [
    "DescriptorError",
    "load_document",
    "parse_call",
    "build_measure",
    "build_shape",
    "build_grid",
    "build_condenser",
    "build_region",
    "build_factor",
]


class DescriptorError(ValueError):
    """Malformed or unknown descriptor."""


_CALL = re.compile(r"^\s*([A-Za-z][\w-]*)\s*\((.*)\)\s*$")


def load_document(path) -> dict:
    """Read a JSON or TOML file (chosen by suffix) into a dict."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise DescriptorError(f"{path} is empty")
    try:
        if path.suffix.lower() == ".toml":
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise DescriptorError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise DescriptorError(f"{path} must contain a table/object at top level")
    return doc


def parse_call(text: str) -> tuple[str, list[float]]:
    """``"name(1, 2.5)" -> ("name", [1.0, 2.5])``; a bare name has no arguments."""
    m = _CALL.match(text)
    if m is None:
        return text.strip(), []
    name, body = m.groups()
    try:
        args = [float(a) for a in body.split(",") if a.strip()]
    except ValueError as exc:
        raise DescriptorError(f"non-numeric argument in {text!r}") from exc
    return name, args


def _take(d: dict, allowed: set[str], where: str) -> dict:
    extra = set(d) - allowed
    if extra:
        raise DescriptorError(f"unknown keys in {where}: {sorted(extra)}")
    return d


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise DescriptorError(f"{where} needs '{key}'")
    return d[key]


def _vec(v, where: str) -> np.ndarray:
    try:
        return np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DescriptorError(f"{where}: expected numbers") from exc


# Measures


def _surface(d: dict):
    gen = _need(d, "generator", "surface measure")
    name, args = parse_call(gen)
    opts = {k: v for k, v in d.items() if k not in ("type", "generator")}
    if name == "segment":
        _take(opts, {"a", "b", "count", "focus", "h_min", "growth"}, "segment")
        return segment(_vec(_need(opts, "a", "segment"), "a"), _vec(_need(opts, "b", "segment"), "b"),
                       int(opts.get("count", 1000)), opts.get("focus"), opts.get("h_min"), float(opts.get("growth", 1.05)))
    if name == "k-plane-patch":
        _take(opts, {"origin", "basis", "half_width", "count", "focus", "h_min", "growth"}, "k-plane-patch")
        return k_plane_patch(_vec(_need(opts, "origin", "k-plane-patch"), "origin"), _vec(_need(opts, "basis", "k-plane-patch"), "basis"),
                             float(opts.get("half_width", 1.0)), int(opts.get("count", 100)), opts.get("focus"),
                             opts.get("h_min"), float(opts.get("growth", 1.05)))
    if name == "cantor-dust":
        _take(opts, {"ratio", "depth", "n"}, "cantor-dust")
        ratio = args[0] if len(args) > 0 else float(opts.get("ratio", 1.0 / 3.0))
        depth = int(args[1]) if len(args) > 1 else int(opts.get("depth", 8))
        return cantor_dust(ratio, depth, int(opts.get("n", 2)))
    raise DescriptorError(f"unknown surface generator {gen!r}")


def build_measure(d: dict):
    """Measure from ``{"type": "atomic" | "radial" | "surface" | "grid", ...}``."""
    if not isinstance(d, dict):
        raise DescriptorError("measure descriptor must be a table")
    kind = _need(d, "type", "measure")
    if kind == "atomic":
        _take(d, {"type", "points", "weights", "n"}, "atomic measure")
        pts = _vec(_need(d, "points", "atomic measure"), "points")
        if pts.size == 0:
            n = int(d.get("n", 0)) or 1
            return Atomic.zero(n)
        return Atomic(pts, d.get("weights"))
    if kind == "radial":
        _take(d, {"type", "center", "segments", "power_law"}, "radial measure")
        center = _vec(_need(d, "center", "radial measure"), "center")
        if "power_law" in d:
            pl = _take(dict(d["power_law"]), {"m", "t_max", "c"}, "power_law")
            return RadialProfile.power_law(center, float(pl["m"]), float(pl["t_max"]), float(pl.get("c", 1.0)))
        return RadialProfile(center, [tuple(map(float, s)) for s in _need(d, "segments", "radial measure")])
    if kind == "surface":
        return _surface(d)
    if kind == "grid":
        _take(d, {"type", "origin", "h", "extents", "density", "head_cells"}, "grid measure")
        grid = build_grid(d)
        dens = _need(d, "density", "grid measure")
        if isinstance(dens, (int, float)):
            dens = np.full(grid.shape, float(dens))
        return GridDensity(grid, _vec(dens, "density").reshape(grid.shape), float(d.get("head_cells", 2.0)))
    raise DescriptorError(f"unknown measure type {kind!r}")


# Shapes and condensers


def build_grid(d: dict) -> Grid:
    if "lo" in d and "hi" in d:
        return Grid.from_bounds(_vec(d["lo"], "lo"), _vec(d["hi"], "hi"), float(_need(d, "h", "grid")), int(d.get("pad", 1)))
    return Grid(tuple(_vec(_need(d, "origin", "grid"), "origin")), float(_need(d, "h", "grid")),
                tuple(int(e) for e in _need(d, "extents", "grid")))


def build_shape(d: dict, grid: Grid | None = None):
    """Shape from ``{"shape": name, ...}``.

    Names: ball, box, annulus, plane-patch, half-space, ball-union and
    cell-mask (needs ``grid``).
    """
    if not isinstance(d, dict):
        raise DescriptorError("shape descriptor must be a table")
    name = _need(d, "shape", "shape")
    body = {k: v for k, v in d.items() if k != "shape"}
    if name == "ball":
        _take(body, {"center", "radius"}, "ball")
        return Ball(tuple(_vec(_need(body, "center", "ball"), "center")), float(_need(body, "radius", "ball")))
    if name == "box":
        _take(body, {"lo", "hi"}, "box")
        return Box(tuple(_vec(body["lo"], "lo")), tuple(_vec(body["hi"], "hi")))
    if name == "annulus":
        _take(body, {"center", "r_in", "r_out"}, "annulus")
        return Annulus(tuple(_vec(body["center"], "center")), float(body["r_in"]), float(body["r_out"]))
    if name == "plane-patch":
        _take(body, {"origin", "basis", "half_widths", "thickness"}, "plane-patch")
        basis = tuple(tuple(map(float, b)) for b in body["basis"])
        hw = body.get("half_widths", 1.0)
        hw = tuple([float(hw)] * len(basis)) if isinstance(hw, (int, float)) else tuple(map(float, hw))
        return PlanePatch(tuple(_vec(body["origin"], "origin")), basis, hw, float(body.get("thickness", 0.0)))
    if name == "half-space":
        _take(body, {"normal", "offset"}, "half-space")
        return HalfSpace(tuple(_vec(body["normal"], "normal")), float(body.get("offset", 0.0)))
    if name == "ball-union":
        _take(body, {"centers", "radii"}, "ball-union")
        centers = _vec(body["centers"], "centers")
        radii = _vec(body["radii"], "radii").ravel()
        return BallUnion(tuple(Ball(tuple(c), float(r)) for c, r in zip(centers, radii)))
    if name == "cell-mask":
        _take(body, {"mask"}, "cell-mask")
        if grid is None:
            raise DescriptorError("cell-mask needs a grid")
        return CellMask(grid, np.asarray(body["mask"], dtype=bool).reshape(grid.shape))
    raise DescriptorError(f"unknown shape {name!r}")


def build_condenser(d: dict) -> Condenser:
    """``{"K": [shape, ...] | shape, "Omega": shape, "grid": {...}}``."""
    _take(d, {"K", "Omega", "grid"}, "condenser")
    grid = build_grid(_need(d, "grid", "condenser"))
    K = _need(d, "K", "condenser")
    K = K if isinstance(K, list) else [K]
    return Condenser(tuple(build_shape(s, grid) for s in K), build_shape(_need(d, "Omega", "condenser"), grid), grid)


def build_region(d) -> BallUnion:
    """Region set: ``"ball-chain(a, c)"``, a family table, or explicit balls."""
    if isinstance(d, str):
        name, args = parse_call(d)
        d = {"family": name, "args": args}
    if not isinstance(d, dict):
        raise DescriptorError("region descriptor must be a table or call string")
    if "balls" in d:
        _take(d, {"balls"}, "region")
        return BallUnion(tuple(build_shape({"shape": "ball", **b}) for b in d["balls"]))
    fam = _need(d, "family", "region")
    args = list(d.get("args", []))
    kw = {k: v for k, v in d.items() if k not in ("family", "args")}
    if fam == "ball-chain":
        _take(kw, {"a", "c", "n", "x0", "i_min", "i_max", "direction"}, "ball-chain")
        a = args[0] if len(args) > 0 else float(_need(kw, "a", "ball-chain"))
        c = args[1] if len(args) > 1 else float(kw.get("c", 1.0))
        return ball_chain(a, c, int(kw.get("n", 3)), kw.get("x0"), int(kw.get("i_min", 1)), int(kw.get("i_max", 40)), kw.get("direction"))
    if fam == "separating-chain":
        _take(kw, {"n", "p", "c0", "power", "i_min", "i_max"}, "separating-chain")
        return separating_chain(int(_need(kw, "n", "separating-chain")), float(_need(kw, "p", "separating-chain")),
                                float(kw.get("c0", 0.2)), float(kw.get("power", 2.0)), int(kw.get("i_min", 1)), int(kw.get("i_max", 40)))
    raise DescriptorError(f"unknown region family {fam!r}")


# Conformal factors


def build_factor(d: dict):
    """Conformal factor from ``{"family": ..., ...}``.

    Families: radial-power, plane-dist-power, point-log (alias cylinder),
    plane-log, linear, flat and grid-field (``{"path": ...}``).
    """
    if not isinstance(d, dict):
        raise DescriptorError("factor descriptor must be a table")
    fam = _need(d, "family", "factor")
    body = {k: v for k, v in d.items() if k != "family"}
    p = body.get("p")
    p = None if p is None else float(p)
    if fam == "radial-power":
        _take(body, {"n", "alpha", "p", "center"}, fam)
        return RadialPower(int(body["n"]), float(body["alpha"]), float(_need(body, "p", fam)), body.get("center"))
    if fam == "plane-dist-power":
        _take(body, {"n", "k", "alpha", "p"}, fam)
        return PlaneDistPower(int(body["n"]), int(body["k"]), float(body["alpha"]), float(_need(body, "p", fam)))
    if fam in ("point-log", "cylinder"):
        _take(body, {"n", "coef", "center", "p"}, fam)
        return LogForm.point_log(int(body["n"]), float(body.get("coef", -1.0)), body.get("center"), p)
    if fam == "plane-log":
        _take(body, {"n", "k", "coef", "p"}, fam)
        return LogForm.plane_log(int(body["n"]), int(body["k"]), float(body.get("coef", -1.0)), p)
    if fam == "linear":
        _take(body, {"n", "a", "b", "p"}, fam)
        return LogForm.linear(int(body["n"]), _vec(body["a"], "a"), float(body.get("b", 0.0)), p)
    if fam == "flat":
        _take(body, {"n", "p"}, fam)
        return LogForm.flat(int(body["n"]), p)
    if fam == "grid-field":
        _take(body, {"path"}, fam)
        return GridField.load(str(body["path"]))
    raise DescriptorError(f"unknown conformal family {fam!r}")
