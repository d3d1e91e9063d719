"""Acceptance criteria 1-8, one pass/fail line each.

Run with pytest, or directly with ``python3 tests/test_acceptance.py``.
Tolerances are pinned here and do not depend on the report's own tolerances.
"""

import os
import subprocess
import sys
import tempfile
import time

import pytest

from cslab.suites import RunConfig, run_suite

_RUNS = {}


def suite_run(name):
    """Records of one suite under the default config, with the wall time; cached per session."""
    if name not in _RUNS:
        start = time.perf_counter()
        report = run_suite(RunConfig(suite=name))
        _RUNS[name] = ({c["id"]: c for c in report["checks"]}, time.perf_counter() - start)
    return _RUNS[name]


def _below(records, ids, tol):
    """All listed checks ran without error and have residual < tol; returns (ok, worst residual)."""
    worst = 0.0
    for i in ids:
        r = records[i]["residual"]
        if r is None:
            return False, float("inf")
        worst = max(worst, r)
    return worst < tol, worst


def criterion_1():
    records, seconds = suite_run("frames")
    ids = [i for i in records if not i.startswith("frames.var.")]
    ok, worst = _below(records, ids, 1e-12)
    ok = ok and len(ids) >= 20 and seconds < 5
    return ok, f"{len(ids)} structure checks, max residual {worst:.2e}, {seconds:.2f} s"


def criterion_2():
    records, _ = suite_run("frames")
    ids = [i for i in records if i.startswith("frames.var.")]
    ok, worst = _below(records, ids, 1e-6)
    return ok and len(ids) >= 4, f"{len(ids)} variation checks at 20 random (tau, t), max residual {worst:.2e}"


def criterion_3():
    records, _ = suite_run("operators")
    ok1, w1 = _below(records, ["operators.prequantum.curvature11", "operators.prequantum.curvature20",
                               "operators.ladder.commutator", "operators.md.commute"], 1e-12)
    ok2, w2 = _below(records, ["operators.laplacian.generic_vs_closed", "operators.ch.closed_vs_generic",
                               "operators.hw.explicit_vs_assembly"], 1e-10)
    return ok1 and ok2, f"tensor identities {w1:.2e}, closed vs generic assemblies {w2:.2e}"


def criterion_4():
    records, _ = suite_run("connections")
    ok1, w1 = _below(records, ["connections.ch.holomorphic"], 1e-9)
    ok2, w2 = _below(records, ["connections.laplacian.commute"], 1e-10)
    ok3, w3 = _below(records, ["connections.holonomy.ch_random_loops", "connections.holonomy.hw_random_loops",
                               "connections.holonomy.square_tau_i"], 1e-6)
    return ok1 and ok2 and ok3, f"holomorphicity {w1:.2e}, Laplacians commute {w2:.2e}, holonomy {w3:.2e}"


def criterion_5():
    records, _ = suite_run("bargmann")
    ok1, w1 = _below(records, ["bargmann.gram"], 1e-10)
    ok2, w2 = _below(records, ["bargmann.transfer.md", "bargmann.transfer.rotation",
                               "bargmann.transfer.potentials"], 1e-10)
    ok3, w3 = _below(records, ["bargmann.quadrature.h0", "bargmann.quadrature.degree3",
                               "bargmann.quadrature.shifted_gaussian"], 1e-9)
    return ok1 and ok2 and ok3, f"Gram {w1:.2e}, transfer identities {w2:.2e}, quadrature {w3:.2e}"


def criterion_6():
    records, _ = suite_run("connections")
    ok1, w1 = _below(records, ["connections.intertwining.random"], 1e-8)
    ok2, w2 = _below(records, ["connections.intertwining.mcg_invariance"], 1e-7)
    return ok1 and ok2, f"intertwining {w1:.2e}, under S and T {w2:.2e}"


def criterion_7():
    records, _ = suite_run("equivariance")
    ok1, w1 = _below(records, ["equivariance.bargmann.doubling"], 1e-8)
    ok2, w2 = _below(records, ["equivariance.transpose_square"], 1e-6)
    ok3, w3 = _below(records, ["equivariance.dual_vs_direct"], 1e-6)
    return ok1 and ok2 and ok3, f"domain doubling {w1:.2e}, transpose square {w2:.2e}, dual vs direct {w3:.2e}"


def criterion_8():
    outs = []
    with tempfile.TemporaryDirectory() as tmp:
        for n, threads in enumerate(("1", "1", "4")):
            out = os.path.join(tmp, f"r{n}.json")
            env = {**os.environ, "CSLAB_THREADS": threads}
            for suite in ("frames", "bargmann"):
                subprocess.run([sys.executable, "-m", "cslab.cli", "verify", "--suite", suite, "--seed", "7",
                                "--out", out + suite], check=True, env=env, capture_output=True)
            outs.append(b"".join(open(out + s, "rb").read() for s in ("frames", "bargmann")))
    same = outs[0] == outs[1] == outs[2]
    return same, f"{'identical' if same else 'different'} bytes across three runs (1, 1 and 4 workers)"


CRITERIA = {
    1: ("frame and structure suite", criterion_1),
    2: ("variation formulas against finite differences", criterion_2),
    3: ("connection algebra", criterion_3),
    4: ("flatness and holomorphicity", criterion_4),
    5: ("Bargmann transform", criterion_5),
    6: ("intertwining", criterion_6),
    7: ("equivariant transform, transpose square and dual connections", criterion_7),
    8: ("determinism", criterion_8),
}


def _line(n, ok, detail):
    return f"criterion {n} ({CRITERIA[n][0]}): {'PASS' if ok else 'FAIL'} - {detail}"


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, request):
    ok, detail = CRITERIA[n][1]()
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_line("")
        reporter.write_line(_line(n, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = [(n, *CRITERIA[n][1]()) for n in sorted(CRITERIA)]
    for n, ok, detail in results:
        print(_line(n, ok, detail))
    sys.exit(0 if all(ok for _, ok, _ in results) else 1)
