"""Acceptance gate: every criterion at its stated tolerance, one line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines; they are also printed into the captured output of failing tests.
"""

from __future__ import annotations

import pytest

from fppvar.acceptance import CRITERIA


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion-{c.number}" for c in CRITERIA])
def test_acceptance_criterion(criterion):
    res = criterion(0)
    print(res.line())
    assert res.passed, res.line()
