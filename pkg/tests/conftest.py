import os

# one worker thread per core unless the caller says otherwise
os.environ.setdefault("RFIC_THREADS", str(os.cpu_count() or 1))

ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, passed: bool, detail: str) -> str:
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion:2d}: {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
