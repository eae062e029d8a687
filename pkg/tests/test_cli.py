import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from plaplace import cli
from plaplace.descriptors import (
    DescriptorError,
    build_condenser,
    build_factor,
    build_measure,
    build_region,
    build_shape,
    load_document,
    parse_call,
)
from plaplace.geometry import Ball, BallUnion


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def report(out):
    rep = json.loads(out)
    jsonschema.validate(rep, cli.REPORT_SCHEMA)
    return rep


# Descriptors


@pytest.mark.parametrize(
    "text,want",
    [("ball-chain(2, 1)", ("ball-chain", [2.0, 1.0])), ("flat", ("flat", [])), ("f()", ("f", [])), (" g(1.5) ", ("g", [1.5]))],
)
def test_parse_call(text, want):
    assert parse_call(text) == want


def test_parse_call_rejects_text_args():
    with pytest.raises(DescriptorError):
        parse_call("f(a, 1)")


def test_load_document_json_and_toml(tmp_path):
    j = tmp_path / "c.json"
    j.write_text('{"p": 2.5}')
    t = tmp_path / "c.toml"
    t.write_text("p = 2.5\n[measure]\ntype = 'atomic'\n")
    assert load_document(j) == {"p": 2.5}
    assert load_document(t)["measure"]["type"] == "atomic"
    (tmp_path / "e.json").write_text("  ")
    with pytest.raises(DescriptorError):
        load_document(tmp_path / "e.json")
    (tmp_path / "l.json").write_text("[1, 2]")
    with pytest.raises(DescriptorError):
        load_document(tmp_path / "l.json")


def test_build_measures():
    a = build_measure({"type": "atomic", "points": [[0.0, 0.0], [1.0, 0.0]], "weights": [1.0, 2.0]})
    assert a.total_mass == 3.0
    z = build_measure({"type": "atomic", "points": [], "n": 3})
    assert z.dim == 3 and z.total_mass == 0.0
    r = build_measure({"type": "radial", "center": [0, 0, 0], "power_law": {"m": 2, "t_max": 1}})
    assert r.ball_mass(np.zeros(3), 0.5) == pytest.approx(0.25)
    s = build_measure({"type": "surface", "generator": "segment", "a": [0, 0], "b": [1, 0], "count": 10})
    assert s.total_mass == pytest.approx(1.0)
    c = build_measure({"type": "surface", "generator": "cantor-dust(0.25, 3)"})
    assert len(c.points) == 8
    g = build_measure({"type": "grid", "origin": [0, 0], "h": 0.25, "extents": [4, 4], "density": 1.0})
    assert g.total_mass == pytest.approx(1.0)


@pytest.mark.parametrize(
    "d",
    [
        {"type": "nope"},
        {"points": []},
        {"type": "atomic", "points": [[0.0]], "colour": "red"},
        {"type": "surface", "generator": "spiral"},
        "atomic",
    ],
)
def test_bad_measures(d):
    with pytest.raises(DescriptorError):
        build_measure(d)


def test_build_shapes_and_condenser():
    assert build_shape({"shape": "ball", "center": [0, 0], "radius": 1}) == Ball((0.0, 0.0), 1.0)
    u = build_shape({"shape": "ball-union", "centers": [[0, 0], [1, 0]], "radii": [0.1, 0.2]})
    assert isinstance(u, BallUnion) and len(u) == 2
    hs = build_shape({"shape": "half-space", "normal": [0, 1], "offset": 0.5})
    assert hs.contains([[0.0, 1.0]])[0]
    c = build_condenser(
        {"K": {"shape": "ball", "center": [0, 0], "radius": 0.3}, "Omega": {"shape": "ball", "center": [0, 0], "radius": 1},
         "grid": {"lo": [-1, -1], "hi": [1, 1], "h": 0.1}}
    )
    assert len(c.K) == 1 and c.grid.h == 0.1
    with pytest.raises(DescriptorError):
        build_shape({"shape": "cell-mask", "mask": [True]})
    with pytest.raises(DescriptorError):
        build_shape({"shape": "torus"})


def test_build_regions():
    e = build_region("ball-chain(2, 0.5)")
    assert e.balls[0].radius == pytest.approx(0.5 * 2.0**-2)
    e = build_region({"family": "separating-chain", "n": 5, "p": 4.0, "i_max": 5})
    assert len(e) == 5
    e = build_region({"balls": [{"center": [0.5, 0, 0], "radius": 0.1}]})
    assert len(e) == 1
    with pytest.raises(DescriptorError):
        build_region({"family": "spiral"})


def test_build_factors(tmp_path):
    assert build_factor({"family": "cylinder", "n": 3}).n == 3
    assert build_factor({"family": "plane-log", "n": 6, "k": 2}).n == 6
    assert build_factor({"family": "radial-power", "n": 5, "alpha": -0.5, "p": 3}).p == 3.0
    with pytest.raises(DescriptorError):
        build_factor({"family": "radial-power", "n": 5, "alpha": -0.5})
    with pytest.raises(DescriptorError):
        build_factor({"family": "flat", "n": 3, "extra": 1})


# Commands


def test_cone_example(capsys):
    code, out, _ = run(capsys, "cone", "--spectrum", "-0.5,-0.5,0.5,0.5,0.5,0.5", "--p", "4")
    assert code == 0
    rep = report(out)
    assert rep["result"]["ap_spectrum"] == [0.0, 0.0, 2.0, 2.0, 2.0, 2.0]
    assert rep["result"]["ap_member"] is True
    assert rep["command"] == "cone"


def test_cone_bochner(capsys):
    code, out, _ = run(capsys, "cone", "--spectrum", "-1,0.5,1,1", "--r", "2")
    rep = report(out)
    assert code == 0 and rep["result"]["bochner"] == pytest.approx(3.0)


def test_cone_needs_p_or_r(capsys):
    code, _, err = run(capsys, "cone", "--spectrum", "1,2,3")
    assert code == 2 and "configuration error" in err


def test_wolff_dirac(capsys):
    meas = json.dumps({"type": "atomic", "points": [[0.5, 0, 0]]})
    code, out, _ = run(capsys, "wolff", "--measure", meas, "--p", "2", "--x", "0,0,0")
    val = report(out)["result"]["values"][0]
    assert code == 0
    # p = 2, n = 3: W = int_0.5^1 t^-2 dt = 1.
    assert val["value"] == pytest.approx(1.0)


def test_capacity_preset(capsys, tmp_path):
    path = tmp_path / "cap.json"
    code, _, _ = run(capsys, "capacity", "--preset", "spherical", "--p", "2", "--h", "0.0625", "--output", str(path))
    rep = report(path.read_text())
    assert code == 0
    assert rep["result"]["oracle"] == pytest.approx(8 * np.pi)
    assert abs(rep["result"]["relative_error"]) < 0.1


def test_curvature_with_residual(capsys, tmp_path):
    cfg = tmp_path / "k.toml"
    cfg.write_text('p = 3.0\nresidual = true\npoints = [[0.4, 0.1, 0.2, 0.3, 0.5]]\n[factor]\nfamily = "radial-power"\nn = 5\nalpha = -0.5\np = 3.0\n')
    code, out, _ = run(capsys, "curvature", "--config", str(cfg))
    pt = report(out)["result"]["points"][0]
    assert code == 0 and abs(pt["residual"]) < 1e-10


def test_curvature_at_singular_point_is_computation_error(capsys):
    fac = json.dumps({"family": "cylinder", "n": 3})
    code, _, err = run(capsys, "curvature", "--factor", fac, "--x", "0,0,0", "--p", "2")
    assert code == 1 and "SingularityError" in err


def test_dimension_box_with_csv(capsys, tmp_path):
    s = json.dumps({"type": "surface", "generator": "segment", "a": [0, 0, 0], "b": [1, 0, 0], "count": 4000})
    csv_path = tmp_path / "counts.csv"
    code, out, _ = run(capsys, "dimension", "--set", s, "--scales", "0.005,0.25", "--csv", str(csv_path))
    rep = report(out)
    assert code == 0 and rep["result"]["dim"] == pytest.approx(1.0, abs=0.1)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "delta,count" and len(lines) == 7


def test_dimension_frostman_not_found(capsys):
    s = json.dumps({"type": "surface", "generator": "segment", "a": [0, 0], "b": [1, 0], "count": 1000})
    code, out, _ = run(capsys, "dimension", "--set", s, "--mode", "frostman", "--d", "1.5",
                       "--candidate", "0.5,0", "--t-range", "0.01,0.2", "--cap", "5")
    assert code == 1 and report(out)["result"]["found"] is False


def test_thin_ball_chain(capsys):
    code, out, _ = run(capsys, "thin", "--region", "ball-chain(2, 1)", "--n", "3", "--p", "2", "--i-max", "6", "--directions", "128")
    res = report(out)["result"]
    assert code == 0
    assert res["annulus"]["verdict"]["status"] == "thin"
    assert res["escape"]["found"] and res["escape"]["verified"]


def test_theorem4_command(capsys):
    code, out, _ = run(capsys, "theorem4", "--n-points", "50", "--n-rays", "2", "--count", "4000")
    assert code == 0 and report(out)["ok"]


def test_flags_override_file(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"spectrum": [1.0, 2.0, 3.0], "p": 2.0}))
    code, out, _ = run(capsys, "cone", "--config", str(cfg), "--p", "3")
    assert code == 0 and report(out)["config"]["p"] == 3.0


@pytest.mark.parametrize(
    "content,suffix", [("", ".json"), ('{"bogus": 1, "spectrum": [1, 2]}', ".json"), ("p = [", ".toml")]
)
def test_bad_config_exits_2(capsys, tmp_path, content, suffix):
    cfg = tmp_path / f"c{suffix}"
    cfg.write_text(content)
    code, _, err = run(capsys, "cone", "--config", str(cfg))
    assert code == 2 and "configuration error" in err


def test_missing_required_exits_2(capsys):
    code, _, _ = run(capsys, "wolff", "--p", "2")
    assert code == 2


def test_unknown_suite_exits_2(capsys):
    code, _, _ = run(capsys, "verify", "--suite", "nonexistent")
    assert code == 2


def test_report_is_deterministic_outside_timestamp(capsys):
    reps = []
    for _ in range(2):
        _, out, _ = run(capsys, "cone", "--spectrum", "-0.5,0.5,0.5", "--p", "2.5")
        rep = report(out)
        rep.pop("timestamp")
        reps.append(cli.canonical_json(rep))
    assert reps[0] == reps[1]


def test_config_hash_tracks_config(capsys):
    _, a, _ = run(capsys, "cone", "--spectrum", "1,2,3", "--p", "2.5")
    _, b, _ = run(capsys, "cone", "--spectrum", "1,2,3", "--p", "3")
    assert report(a)["config_hash"] != report(b)["config_hash"]


def test_non_finite_values_serialize():
    assert json.loads(cli.canonical_json({"x": float("inf")}))["x"] == "inf"


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "plaplace", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip().startswith("plaplace ")
