import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from geodesic_clt.amplitude import build_table

np.seterr(all="warn", under="ignore")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def cache_dir(request) -> Path:
    env = os.environ.get("GSL_CACHE_DIR")
    if env:
        return Path(env)
    return Path(request.config.cache.mkdir("amp_tables"))


@pytest.fixture(scope="session")
def small_table():
    return build_table(20_000)


@pytest.fixture(scope="session")
def big_table(cache_dir):
    return build_table(100_000, cache_dir)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
