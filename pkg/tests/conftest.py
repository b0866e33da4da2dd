import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_csv(path, rows, delimiter=","):
    path.write_text("".join(delimiter.join(repr(float(v)) for v in r) + "\n" for r in rows))
    return path


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail="", status=None):
    status = status or ("PASS" if passed else "FAIL")
    line = f"criterion {number} [{status}] {title}" + (f" -- {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
