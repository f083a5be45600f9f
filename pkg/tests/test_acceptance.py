"""Every acceptance criterion at full scale; prints one PASS/FAIL line each."""

import pytest

from mimobc.acceptance import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    r = run_criterion(number, quick=False)
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.line()
