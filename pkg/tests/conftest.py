import os
from pathlib import Path

from hypothesis import settings

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"

# load_dataset resolves relative to the working directory by default
os.environ.setdefault("DGAMES_DATA_DIR", str(ROOT / "data"))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def record_acceptance(number, title, ok, detail):
    ACCEPTANCE[number] = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}. {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
