import re

import numpy as np
import pytest

from oracles import ACCEPTANCE


def _natural(key):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", str(key))]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=_natural):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
