import numpy as np
import pytest

from synth import make_toy_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def toy_manifest(tmp_path_factory):
    return make_toy_dataset(tmp_path_factory.mktemp("toy"))


ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, title, detail) then assert as usual."""
    lines = {}

    def record(number, title, detail=""):
        lines["key"] = (number, title, detail)

    yield record
    if "key" in lines:
        number, title, detail = lines["key"]
        failed = request.node.rep_call.failed if hasattr(request.node, "rep_call") else True
        ACCEPTANCE[number] = (title, "FAIL" if failed else "PASS", detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] {number}. {title}" + (f"  ({detail})" if detail else ""))
