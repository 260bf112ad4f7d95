import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.name.startswith("test_criterion_") and (rep.when == "call" or rep.failed):
        store = item.config.__dict__.setdefault("_criterion_outcomes", {})
        store[item.name] = "PASS" if rep.passed else "FAIL"
