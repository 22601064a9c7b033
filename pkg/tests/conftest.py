import pytest

from shockfront import builtin
from shockfront.fields import validate_hypotheses
from shockfront.penalty import PenaltyOptions, solve_penalized
from shockfront.projection import ProjectionOptions, solve_projected


@pytest.fixture(scope="session")
def trivial():
    return builtin.trivial()


@pytest.fixture(scope="session")
def band():
    return builtin.static_band()


@pytest.fixture(scope="session")
def band_cert(band):
    return validate_hypotheses(band)


@pytest.fixture(scope="session")
def band_penalty(band):
    return solve_penalized(band, PenaltyOptions(epsilon=1e-4))


@pytest.fixture(scope="session")
def band_penalty_coarse(band):
    return solve_penalized(band, PenaltyOptions(epsilon=1e-3))


@pytest.fixture(scope="session")
def band_projection(band):
    return solve_projected(band, ProjectionOptions(h=1e-3 * band.T))


@pytest.fixture(scope="session")
def trivial_penalty(trivial):
    return solve_penalized(trivial, PenaltyOptions(epsilon=1e-3))


@pytest.fixture(scope="session")
def trivial_projection(trivial):
    return solve_projected(trivial, ProjectionOptions(h=5e-4))


# one pass/fail line per acceptance criterion, printed after the run

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        entry = _criteria.setdefault(number, {"title": title, "passed": 0, "failed": []})
        if report.passed:
            entry["passed"] += 1
        else:
            entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        total = e["passed"] + len(e["failed"])
        verdict = "PASS" if not e["failed"] else "FAIL"
        line = f"criterion {number}: {verdict} ({e['passed']}/{total}) {e['title']}"
        if e["failed"]:
            line += "  failed: " + ", ".join(e["failed"])
        terminalreporter.write_line(line)
