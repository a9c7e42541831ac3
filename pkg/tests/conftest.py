import re

import numpy as np
import pytest

from leap.video_core import Frame


def random_frame(rng: np.random.Generator, w: int = 16, h: int = 16, index: int = 0) -> Frame:
    return Frame(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8), index=index)


def gray_frame(values, w: int, h: int) -> Frame:
    px = np.repeat(np.asarray(values, dtype=np.uint8).reshape(h, w, 1), 3, axis=2)
    return Frame(px)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---- acceptance summary: one PASS/FAIL line per criterion

_AC_NAME = re.compile(r"test_ac(\d+)_(\w+?)(?:\[|$)")
_acceptance: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        m = _AC_NAME.search(report.nodeid.split("::")[-1])
        if not m:
            return
        num, title = int(m.group(1)), m.group(2).replace("_", " ")
        ok = _acceptance.get(num, (title, True))[1] and report.outcome == "passed"
        _acceptance[num] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance):
        title, ok = _acceptance[num]
        terminalreporter.write_line(f"AC{num:<3} {'PASS' if ok else 'FAIL'}  {title}")
