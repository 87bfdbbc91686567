import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# acceptance criteria append (number, passed, text) here; printed after the run
CRITERIA_LOG: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, text in sorted(CRITERIA_LOG):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {num}: {text}")


@pytest.fixture(scope="session")
def default_config():
    from ctxfusion.config import load_run_config

    return load_run_config()


@pytest.fixture(scope="session")
def default_setup(default_config):
    from ctxfusion.experiments import Setup

    return Setup.from_config(default_config)


@pytest.fixture(scope="session")
def small_setup(default_config):
    from ctxfusion.experiments import Setup

    cfg = default_config.with_overrides(scenes_per_label=4, training_scenes_per_label=3)
    return Setup.from_config(cfg)
