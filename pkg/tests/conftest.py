import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cryocavity import CavityParams, reference_model, reference_tls  # noqa: E402


@pytest.fixture(scope="session")
def ref():
    return reference_model()


@pytest.fixture(scope="session")
def tls_ref():
    return reference_tls()


@pytest.fixture(scope="session")
def cavity44k():
    return CavityParams(finesse=44_000)


# -- acceptance summary --------------------------------------------------------

_CRITERION = re.compile(r"test_criterion_(\d+)")
_results: dict[int, list[str]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        _results.setdefault(int(m.group(1)), []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_results):
        ok = all(o == "passed" for o in _results[k])
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}")
