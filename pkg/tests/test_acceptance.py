"""Release gate: every acceptance criterion at its stated tolerance.

Run with ``pytest -v tests/test_acceptance.py`` or, equivalently, through
``bounce-lab validate``.  One pass/fail line prints per criterion.
"""

import sys

import pytest

from bounce_lab.acceptance import CRITERIA, run_criteria, run_criterion


@pytest.mark.parametrize("crit", CRITERIA, ids=lambda c: f"{c.number:02d}-{c.name}")
def test_criterion(crit):
    result = run_criterion(crit)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status}  {result.number:02d} {result.name}  "
          f"({result.elapsed:.2f}s)  {result.detail}")
    assert not result.skipped, result.detail
    assert result.passed, result.detail


def test_degraded_tolerance_breaks_loop_invariance():
    result = run_criterion(CRITERIA[2], t_tol=1e-3)
    assert not result.passed


def test_missing_oracle_module_reports_skip(monkeypatch):
    monkeypatch.setitem(sys.modules, "bounce_lab.oracle", None)
    results = run_criteria(only={9})
    assert len(results) == 1
    assert results[0].skipped and not results[0].passed
