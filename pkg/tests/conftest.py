import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def acceptance():
    """Record one acceptance check: ``acceptance(criterion, label, ok, detail)``."""

    def record(criterion: int, label: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
        print(f"criterion {criterion} [{label}]: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[crit]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        tr.write_line(f"criterion {crit}: {verdict}")
        for label, ok, detail in parts:
            tr.write_line(f"    {'ok  ' if ok else 'FAIL'} {label}: {detail}")
