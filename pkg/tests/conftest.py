import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))
settings.register_profile("default", deadline=None)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    from helpers import VERDICTS
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
