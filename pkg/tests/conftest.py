"""Shared pytest setup.

The acceptance tests each carry a ``criterion(number)`` marker; this file
collects their outcomes and prints one pass/fail line per criterion at the
end of the run.
"""

import pytest

CRITERIA = {
    1: "exact renormalization table",
    2: "renormalized products have exactly zero mean",
    3: "polynomial identities (Laguerre, Hermite, derivative rules)",
    4: "interpolation derivative identity vs finite differences",
    5: "merging estimate on randomized tensor pairs",
    6: "flattening norm duality",
    7: "moment bound sweep: finite ratios and no growth trend",
    8: "decoupling slack and the order-1 constant pi/2",
    9: "order-1 Khintchine vs order-statistics oracle",
    10: "pairing realization matches the direct formula",
    11: "bit-identical replay across worker counts",
}

_collected: set[int] = set()
_outcomes: dict[int, str] = {}
_notes: dict[int, str] = {}


def _criterion_of(item):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return None
    return int(marker.args[0])


def pytest_collection_modifyitems(items):
    for item in items:
        number = _criterion_of(item)
        if number is not None:
            _collected.add(number)


def pytest_deselected(items):
    for item in items:
        number = _criterion_of(item)
        if number is not None:
            _collected.discard(number)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    number = _criterion_of(item)
    if number is None:
        return
    if report.when == "call":
        _outcomes[number] = "PASS" if report.passed else "FAIL"
    elif report.failed or report.skipped:
        # setup errors and skips must not count as a pass
        _outcomes[number] = "FAIL"


@pytest.fixture
def criterion_note(request):
    """Attach a short detail string to this test's acceptance summary line."""
    number = _criterion_of(request.node)

    def _note(text: str) -> None:
        if number is not None:
            _notes[number] = str(text)

    return _note


def pytest_terminal_summary(terminalreporter):
    if not _collected:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_collected):
        status = _outcomes.get(number, "FAIL")
        title = CRITERIA.get(number, "unknown criterion")
        line = f"criterion {number:02d} {title}: {status}"
        if number in _notes:
            line += f" ({_notes[number]})"
        terminalreporter.write_line(line)
