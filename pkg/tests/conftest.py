import re

_results = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    detail = dict(report.user_properties).get("detail", "")
    title = dict(report.user_properties).get("title", report.nodeid.split("::")[-1])
    _results[int(m.group(1))] = (report.passed, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        ok, title, detail = _results[n]
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}"
        terminalreporter.write_line(line + (f" [{detail}]" if detail else ""))
