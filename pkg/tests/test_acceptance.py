"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run directly with ``python tests/test_acceptance.py`` or through pytest.
Each criterion runs the matching CLI command at its default settings,
so the gates and tolerances live in one place (``hyperharm.cli``); the
runtime budget of each criterion is checked here.
"""
import sys
import tempfile
import time
from pathlib import Path

import pytest

from hyperharm import cli

# criterion -> (title, command, runtime budget in seconds, timing laps counted or None for wall time)
CRITERIA = {
    1: ("spherical-function oracle agreement", "spherical-table", 30.0, None),
    2: ("phi_0 and tube envelopes, c-function growth", "c-function", 10.0, None),
    3: ("commutative transform diagram", "diagram", 300.0, None),
    4: ("inversion round trips and convergence", "roundtrip", 300.0, None),
    5: ("Plancherel constancy and K-type sum", "plancherel", 300.0, None),
    6: ("support theorems and exponential type", "paley-wiener", 120.0, None),
    7: ("symmetry conditions and ratio law", "symmetry-check", 120.0, None),
    8: ("cutoff localization and root guard", "cutoff", 300.0, None),
    9: ("Poisson-integral bound", "seminorm-report", 30.0, ("poisson",)),
}


def _gate_summary(result):
    gates = result.recorder.gates if result.recorder else []
    failed = [f"{r[1]}:{r[2]}={r[3]}" for r in gates if r[6] == "0"]
    return len(gates), failed


def check_criterion(number, workdir: Path):
    """Run one criterion; returns ``(passed, detail)``."""
    if number == 10:
        return check_determinism(workdir)
    title, command, budget, laps = CRITERIA[number]
    start = time.perf_counter()
    result = cli.run(command, None, workdir / command, threads=1)
    elapsed = time.perf_counter() - start
    if laps is not None:
        elapsed = sum(s for label, s in result.recorder.timings if label in laps)
    n_gates, failed = _gate_summary(result)
    ok = result.status == 0 and not failed and elapsed <= budget
    detail = f"{command}: {n_gates - len(failed)}/{n_gates} gates, {elapsed:.1f}s (budget {budget:.0f}s)"
    if failed:
        detail += "; failed " + ", ".join(failed[:3])
    if result.status == 2:
        detail += "; error " + result.report["error"]["message"]
    return ok, detail


def check_determinism(workdir: Path):
    """Repeated runs and thread counts 1 and 8 give byte-identical artifacts."""
    notes = []
    ok = True
    for command in ("spherical-table", "symmetry-check", "diagram"):
        outs = []
        for tag, threads in (("a", 1), ("b", 1), ("c", 8)):
            out = workdir / f"det-{command}-{tag}"
            res = cli.run(command, None, out, threads=threads)
            ok &= res.status == 0
            outs.append(out)
        for name in ("results.csv", "report.json"):
            blobs = {(o / name).read_bytes() for o in outs}
            same = len(blobs) == 1
            ok &= same
            if not same:
                notes.append(f"{command}/{name} differs")
    cal = cli.run("calibrate", None, workdir / "det-calibrate", threads=1)
    n_gates, failed = _gate_summary(cal)
    ok &= cal.status == 0 and not failed
    notes.append(f"calibrate {n_gates - len(failed)}/{n_gates} gates")
    return ok, "byte-identical across repeats and --threads 1/8; " + "; ".join(notes)


def _report(number, ok, detail):
    title = CRITERIA[number][0] if number in CRITERIA else "determinism"
    return f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(number, tmp_path, capsys):
    ok, detail = check_criterion(number, tmp_path)
    with capsys.disabled():
        print("\n" + _report(number, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        results = [check_criterion(n, Path(tmp)) for n in range(1, 11)]
    for n, (ok, detail) in enumerate(results, start=1):
        print(_report(n, ok, detail))
    sys.exit(0 if all(ok for ok, _ in results) else 1)
