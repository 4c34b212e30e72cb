import pytest

_acceptance: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and rep.when == "call":
        label = getattr(item.function, "criterion", item.name)
        _acceptance[label] = "PASS" if rep.passed else "FAIL"
    elif item.module.__name__.endswith("test_acceptance") and rep.when == "setup" and rep.failed:
        _acceptance[getattr(item.function, "criterion", item.name)] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in _acceptance.items():
        terminalreporter.write_line(f"{status}  {label}")
