"""Acceptance suite: criteria 1-10 from one full ``verify`` run, criterion 11
by comparing it with a second run under the same seed.

Each criterion also contributes one PASS/FAIL line to the terminal summary.
"""

import json
import subprocess
import sys

import pytest

from plaplace.acceptance import CRITERIA

pytestmark = pytest.mark.acceptance

SUMMARY: list[str] = []


def _verify(path):
    cmd = [sys.executable, "-m", "plaplace", "verify", "--suite", "all", "--seed", "0", "--output", str(path)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode not in (0, 1):
        raise RuntimeError(f"verify crashed with exit {proc.returncode}:\n{proc.stderr}")
    return proc.returncode, path.read_text()


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    d = tmp_path_factory.mktemp("verify")
    code_a, text_a = _verify(d / "A.json")
    code_b, text_b = _verify(d / "B.json")
    return {"A": json.loads(text_a), "B": json.loads(text_b), "codes": (code_a, code_b)}


def _record(cid, ok, detail):
    name = CRITERIA[cid].name if cid in CRITERIA else "determinism"
    SUMMARY.append(f"criterion {cid:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.mark.parametrize("cid", range(1, 11))
def test_criterion(runs, cid):
    rep = runs["A"]
    row = next(c for c in rep["result"]["criteria"] if c["id"] == cid)
    seconds = rep["timestamp"]["criterion_seconds"][str(cid)]
    in_budget = rep["timestamp"]["within_budget"][str(cid)]
    shown = {k: v for k, v in row["measured"].items() if not isinstance(v, (list, dict))}
    detail = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in list(shown.items())[:6])
    detail += f" | tol: {row['tolerance']} | {seconds:.1f} s of {row['budget_s']} s"
    if row.get("error"):
        detail += f" | error: {row['error']}"
    ok = bool(row["passed"]) and in_budget
    _record(cid, ok, detail)
    assert row["passed"], f"criterion {cid} failed: {row['measured']} {row.get('error') or ''}"
    assert in_budget, f"criterion {cid} took {seconds:.1f} s, budget {row['budget_s']} s"


def test_criterion_11_determinism(runs):
    a, b = dict(runs["A"]), dict(runs["B"])
    a.pop("timestamp")
    b.pop("timestamp")
    ta = json.dumps(a, sort_keys=True, indent=1)
    tb = json.dumps(b, sort_keys=True, indent=1)
    ok = ta == tb and runs["codes"][0] == runs["codes"][1]
    _record(11, ok, f"{len(ta)} bytes compared, identical={ta == tb}")
    assert ta == tb
    assert runs["codes"][0] == runs["codes"][1]
