"""Bookkeeping for the acceptance suite: one verdict line per criterion."""

from __future__ import annotations

VERDICTS: dict[int, str] = {}


class Criterion:
    """Collects named checks, prints a single PASS/FAIL line and asserts."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.checks: list[tuple[str, bool]] = []

    def check(self, label: str, ok: bool) -> bool:
        self.checks.append((label, bool(ok)))
        return bool(ok)

    def finish(self) -> None:
        ok = bool(self.checks) and all(passed for _, passed in self.checks)
        detail = "; ".join(label + ("" if passed else " [FAIL]") for label, passed in self.checks)
        line = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}: {self.title} | {detail}"
        VERDICTS[self.number] = line
        print(line)
        failed = [label for label, passed in self.checks if not passed]
        assert ok, f"criterion {self.number} failed: {failed}"
