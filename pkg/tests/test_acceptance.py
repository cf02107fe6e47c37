"""Acceptance matrix: one test and one printed pass/fail line per criterion."""
import pytest

from fbcsf import acceptance

from .conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("name", list(acceptance.CRITERIA))
def test_criterion(name):
    c = acceptance.run_one(name)
    line = c.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert c.passed, f"{line}\n{c.detail}"
