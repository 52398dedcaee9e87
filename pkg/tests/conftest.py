import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fastshed import data_path  # noqa: E402
from fastshed.io import load_config, load_scenario, load_snapshot  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def plant():
    return load_config(data_path("fixture.toml"))


@pytest.fixture(scope="session")
def config(plant):
    return plant.config


@pytest.fixture(scope="session")
def scenario(plant):
    return load_scenario(data_path("trip_g2.toml"), plant)


@pytest.fixture(scope="session")
def snapshot(config):
    return load_snapshot(data_path("snapshot.toml"), config)


@pytest.fixture
def fixture_files():
    return {name: str(data_path(name)) for name in ("fixture.toml", "trip_g2.toml", "snapshot.toml")}


# --------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion at the end of the run

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    _CRITERIA[number] = (title, "PASS" if rep.passed else "FAIL", detail if rep.passed else rep.when + " failed")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict, detail = _CRITERIA[number]
        line = f"CRITERION {number} {verdict}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
