from pathlib import Path

import pytest

ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption(
        "--published-data",
        action="store",
        default=None,
        help="CSV of the published annotated dataset in the misprev input schema",
    )


@pytest.fixture(scope="session")
def published_corpus(request):
    from misprev.ingest import load_corpus

    path = request.config.getoption("--published-data")
    if path is None:
        default = Path(__file__).parent / "data" / "published_dataset.csv"
        path = default if default.exists() else None
    if path is None:
        pytest.skip(
            "published annotated dataset not available; pass --published-data=<csv> "
            "or place it at tests/data/published_dataset.csv"
        )
    return load_corpus(path)


@pytest.fixture
def acceptance_record():
    def record(criterion: str, passed: bool, detail: str = ""):
        ACCEPTANCE_LINES.append((criterion, passed, detail))

    return record


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.skipped):
        if "test_acceptance.py" in report.nodeid and report.skipped:
            name = report.nodeid.split("::")[-1]
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
            ACCEPTANCE_LINES.append((name, None, reason))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_LINES:
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"{status:4}  {name}  {detail}")
