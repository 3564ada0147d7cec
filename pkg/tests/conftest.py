import pytest

from ubinode.core import AuthGrant, build_catalog, build_profile

MARC_FEATURES = ["print", "consult", "email", "update", "share", "scan"]


@pytest.fixture
def catalog():
    return build_catalog(MARC_FEATURES)


@pytest.fixture
def marc_grant():
    return AuthGrant("marc", {"print", "consult", "email"}, {"update", "share", "scan"})


@pytest.fixture
def marc_profile(marc_grant, catalog):
    return build_profile(marc_grant, catalog)


_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion exit gate")


def pytest_runtest_logreport(report):
    # one verdict per criterion; a failure in any phase sticks
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    if report.failed or report.when == "call":
        prev = _criteria.get(marker)
        if prev != "FAIL":
            _criteria[marker] = "FAIL" if report.failed else ("PASS" if report.passed else "SKIP")



@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), verdict in sorted(_criteria.items()):
        terminalreporter.write_line(f"[{verdict}] criterion {num}: {title}")
