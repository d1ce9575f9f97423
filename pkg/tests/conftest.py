# filled by tests/test_acceptance.py: (criterion, passed, seconds, budget)
ACCEPTANCE: list[tuple[str, bool, float, float]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, secs, budget in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({secs:.2f} s, budget {budget:g} s)")
