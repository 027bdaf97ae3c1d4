"""Shared pytest wiring: per-criterion summary lines for the acceptance run.

Each acceptance test records a one-line measurement detail through the
``acceptance_log`` fixture; after the run a summary block prints one
PASS/FAIL line per criterion so the gate can be read off directly.
"""

import re

import pytest

CRITERION_TITLES = {
    1: "concentric forward solve against separation of variables",
    2: "layer-potential identities on circle and perturbed boundary",
    3: "first-order Taylor remainder of states and objective",
    4: "second-order Taylor remainder of states and objective",
    5: "tangential deformations: zero derivative, quadratic geometry",
    6: "vanishing objective and gradient at the data shape",
    7: "positivity identity and eigenvalue sign at the data shape",
    8: "Hessian symmetry and critical/general formula agreement",
    9: "spectrum collapse over modes 1..8",
    10: "Levenberg-Marquardt recovery of an off-center inclusion",
    11: "byte-identical CSV artifacts across repeated runs",
}

_DETAILS: dict[int, str] = {}

_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def _criterion_number(nodeid: str):
    m = _PATTERN.search(nodeid)
    return int(m.group(1)) if m else None


@pytest.fixture
def acceptance_log(request):
    num = _criterion_number(request.node.nodeid)

    def log(text: str) -> None:
        if num is not None:
            _DETAILS[num] = text

    return log


def pytest_terminal_summary(terminalreporter):
    outcomes: dict[int, str] = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            num = _criterion_number(nodeid)
            if num is None:
                continue
            if status == "passed" and getattr(report, "when", "call") != "call":
                continue
            # any failing phase marks the criterion failed
            if outcomes.get(num) != "FAIL":
                outcomes[num] = "PASS" if status == "passed" else "FAIL"
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(outcomes):
        mark = outcomes[num]
        title = CRITERION_TITLES.get(num, "")
        detail = _DETAILS.get(num, "")
        line = f"[{mark}] criterion {num:2d}: {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
