import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)")
_KEY = pytest.StashKey[dict]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = _CRITERION.match(item.name)
    if not m or (rep.when != "call" and rep.passed):
        return
    title = (item.function.__doc__ or item.name).strip().splitlines()[0]
    for tag in ("[DERIVED]", "[PAPER]", "[TRIVIAL]"):
        title = title.replace(tag, "").strip()
    detail = "; ".join(str(v) for k, v in rep.user_properties if k == "detail")
    results = item.config.stash.setdefault(_KEY, {})
    results[int(m.group(1))] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, status, detail = results[n]
        line = f"criterion {n}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
