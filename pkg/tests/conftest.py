"""Shared test helpers and the acceptance summary printer."""

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, ok, detail: str) -> bool:
    """Register one acceptance criterion outcome for the terminal summary."""
    ok = bool(ok)
    _ACCEPTANCE.append((name, ok, detail))
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
