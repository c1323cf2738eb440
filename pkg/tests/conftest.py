import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    import acceptance_report

    if not acceptance_report.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_report.summary_lines():
        terminalreporter.write_line(line)
