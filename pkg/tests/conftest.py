import pytest

from vdclab.poly import parse_poly
from vdclab.variety import Instance


@pytest.fixture(scope="session")
def fermat4():
    return Instance.of(parse_poly("x1^3 + x2^3 + x3^3 + x4^3", 4))


@pytest.fixture(scope="session")
def toy():
    return Instance.of(parse_poly("x1^3 + x2^3", 2))


_VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """``verdict(k, ok, detail)`` records the outcome of acceptance criterion ``k``."""
    def record(k: int, ok: bool, detail: str):
        _VERDICTS[k] = (bool(ok), detail)
        print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_VERDICTS):
        ok, detail = _VERDICTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
