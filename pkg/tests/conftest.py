import pytest

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    num = getattr(item.function, "criterion", None)
    if num is None or rep.when != "call":
        return
    detail = item.user_properties[-1][1] if item.user_properties else ""
    if rep.failed and rep.longrepr is not None:
        msg = getattr(rep.longrepr, "reprcrash", None)
        detail = msg.message.splitlines()[0] if msg else detail
    ACCEPTANCE[num] = (rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
