import numpy as np
import pytest

_ACCEPTANCE = {}


class AcceptanceRecorder:
    def check(self, cid, name, passed, detail=""):
        _ACCEPTANCE[cid] = (name, bool(passed), detail)
        assert passed, f"criterion {cid} ({name}) failed: {detail}"


@pytest.fixture
def acceptance():
    return AcceptanceRecorder()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE):
        name, ok, detail = _ACCEPTANCE[cid]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid} {name}: {detail}")
