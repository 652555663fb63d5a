import pytest

from naminggame.rng import make_rng


@pytest.fixture
def rng():
    return make_rng(20240607)


@pytest.fixture
def within_se():
    def check(observed, expected, se, k=3.0):
        assert abs(observed - expected) <= k * se, f"{observed} vs {expected} (se {se})"
    return check


_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
