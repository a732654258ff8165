import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    def _record(criterion: int, name: str, ok: bool, runtime: float, **measured):
        details = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in measured.items())
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:2d} {name}: {details} ({runtime:.2f}s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
