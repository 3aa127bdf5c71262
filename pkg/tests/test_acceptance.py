"""Acceptance criteria 1-11, one test each; every test prints its result line."""
import pytest

from torcanard.acceptance import AcceptanceSuite


@pytest.fixture(scope="session")
def suite():
    return AcceptanceSuite()


@pytest.mark.parametrize("number", range(1, 12))
def test_criterion(suite, number, capsys):
    r = suite.run(number)
    with capsys.disabled():
        print("\n" + r.line())
    assert r.ok, r.line()
