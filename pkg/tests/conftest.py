from __future__ import annotations

from pathlib import Path

import pytest

from specpoly.pipeline import warmup
from specpoly.scene import load_scene

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "specpoly" / "fixtures"
DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session", autouse=True)
def _jit_warm():
    # load every compiled kernel once so timing assertions never see JIT cost
    warmup()


@pytest.fixture(scope="session")
def fixture_path():
    return lambda name: FIXTURES / name


@pytest.fixture(scope="session")
def scene_of():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_scene(FIXTURES / name)
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_results", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
