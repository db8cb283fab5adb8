import pytest

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.checks: list[tuple[str, bool]] = []

    def check(self, label: str, ok: bool) -> None:
        self.checks.append((label, bool(ok)))

    @property
    def ok(self) -> bool:
        return bool(self.checks) and all(ok for _, ok in self.checks)

    def finish(self) -> None:
        detail = "; ".join(f"{label} [{'ok' if ok else 'FAIL'}]" for label, ok in self.checks)
        _ACCEPTANCE[self.number] = (self.title, self.ok, detail)
        print(f"criterion {self.number:2d} {'PASS' if self.ok else 'FAIL'}: {self.title} :: {detail}")
        failed = [label for label, ok in self.checks if not ok]
        assert not failed, f"criterion {self.number} failed: {failed}"


@pytest.fixture
def criterion():
    made = []

    def make(number: int, title: str) -> Criterion:
        c = Criterion(number, title)
        made.append(c)
        return c

    yield make


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {title} :: {detail}")
