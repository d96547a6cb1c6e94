"""Collects one verdict line per acceptance criterion and prints them at the end."""

ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, passed: bool | None, detail: str) -> None:
    verdict = {True: "PASS", False: "FAIL", None: "NOT ASSERTED"}[passed]
    line = f"criterion {number} [{verdict}] {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
