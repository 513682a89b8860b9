import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

CRITERIA = {
    "1": "exact delay reproduction",
    "2": "MAB ordering EXP3 <= BOLD <= DEXP3, DEXP3/BOLD <= 2",
    "3a": "BCO ordering OGD <= SOLID",
    "3b": "BCO ordering BGD <= DBGD",
    "3c": "BCO ordering DBGD <= 1.5 x SOLID",
    "4": "sublinear regret, T=2000 below T=500",
    "5": "regret scaling ratio max/min <= 3",
    "6": "probability ratio, floor and slot-lag invariants",
    "7": "gradient estimate norm and bias bounds",
    "8": "linear-loss equivalence of DBGD and SOLID",
    "9": "zero-delay reductions",
    "10": "comparator oracle cross-checks",
    "11": "byte-identical reruns",
}

_results: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion, then assert it."""

    def record(key: str, ok: bool, detail: str = "") -> None:
        _results[key] = (bool(ok), detail)
        assert ok, f"criterion {key} ({CRITERIA[key]}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key, name in CRITERIA.items():
        if key in _results:
            ok, detail = _results[key]
            tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {key:>3s}  {name}  {detail}")
        else:
            tr.write_line(f"[FAIL] {key:>3s}  {name}  (not evaluated)")
