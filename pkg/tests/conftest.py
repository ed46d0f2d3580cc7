import json
import os

import pytest
from flint import ctx

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(autouse=True)
def _reset_precision():
    old_prec, old_cap = ctx.prec, ctx.cap
    ctx.prec = 128
    yield
    ctx.prec, ctx.cap = old_prec, old_cap


@pytest.fixture(scope="session")
def published():
    with open(os.path.join(FIXTURES, "published_testfns.json")) as fh:
        return json.load(fh)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
