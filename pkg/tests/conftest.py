import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, derandomize=True)
settings.load_profile("default")

N_CRITERIA = 7


def pytest_terminal_summary(terminalreporter):
    import helpers

    if not helpers.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        entry = helpers.ACCEPTANCE.get(n)
        terminalreporter.write_line(entry[1] if entry else f"acceptance {n}: FAIL  (not run or errored)")
