"""Acceptance suite: one test per criterion, with a PASS/FAIL line each.

Run directly (``python tests/test_acceptance.py``) to print only the
criterion lines, or through pytest, where the lines appear in the
terminal summary.
"""

import subprocess
import sys

import pytest

from modelpot.acceptance import TITLES, compare_csv_trees, run_suite

SEED = 20261014


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    from conftest import ACCEPTANCE_LINES

    out = tmp_path_factory.mktemp("acceptance")
    results = {r.number: r for r in run_suite(out, SEED)}
    ACCEPTANCE_LINES[:] = [results[n].line() for n in sorted(results)]
    return results


@pytest.mark.parametrize("number", sorted(TITLES), ids=[f"c{n:02d}" for n in sorted(TITLES)])
def test_criterion(suite, number):
    res = suite[number]
    print(res.line())
    failed = [k for k, v in res.checks.items() if not v]
    assert res.passed, f"{res.title}: failed checks {failed}; metrics {res.metrics}"


def test_suite_command_is_reproducible(tmp_path):
    for name in ("a", "b"):
        proc = subprocess.run([sys.executable, "-m", "modelpot.cli", "suite", "--out", str(tmp_path / name)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert "11/11 criteria passed" in proc.stdout
    assert compare_csv_trees(tmp_path / "a" / "suite", tmp_path / "b" / "suite") == []


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        results = run_suite(d, SEED, echo=print)
    sys.exit(0 if all(r.passed for r in results) else 1)
