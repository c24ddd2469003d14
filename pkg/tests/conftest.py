import numpy as np
import pytest

from speccurve import prior


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synth_S():
    return prior.synthetic_sensitivity(np.random.default_rng(7))


@pytest.fixture(scope="session")
def small_db():
    return prior.synthetic_database(8, seed=11)


@pytest.fixture(scope="session")
def trained_ae(small_db):
    """Autoencoder trained to the stop rule on ``small_db`` (about two minutes)."""
    return prior.fit_autoencoder(small_db, seed=0).weights


# -- acceptance report ------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when != "call" and not (report.skipped or report.failed):
        return
    name = report.nodeid.split("::")[-1]
    number = int(name.split("_")[2])
    title = name.split("_", 3)[3].replace("_", " ")
    if report.passed:
        status, detail = "PASS", ""
    elif report.skipped:
        status, detail = "SKIP", str(report.longrepr[2]) if isinstance(report.longrepr, tuple) else ""
    else:
        crash = getattr(report.longrepr, "reprcrash", None)
        status, detail = "FAIL", (crash.message.splitlines()[0] if crash else "")
    _CRITERIA[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        line = f"criterion {number:2d} {status}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
