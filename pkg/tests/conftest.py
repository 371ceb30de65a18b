import numpy as np
import pytest

from kirchhoff_nehari.fibering import cached_sobolev_constant, thresholds
from kirchhoff_nehari.params import PINNED
from kirchhoff_nehari.space import Mesh, WeightField, random_shape


@pytest.fixture(scope="session")
def mesh():
    return Mesh()


@pytest.fixture(scope="session")
def small_mesh():
    return Mesh(nx=16, ny=16)


@pytest.fixture(scope="session")
def weight(mesh):
    return WeightField.bump(mesh)


@pytest.fixture(scope="session")
def sobolev(mesh):
    # full 50-restart estimate; memoized so the CLI tests reuse it
    return cached_sobolev_constant(mesh, PINNED.p, PINNED.N, restarts=50, seed=0)


@pytest.fixture(scope="session")
def thr(sobolev):
    return thresholds(PINNED, sobolev.S, 1.0, sobolev.provenance)


@pytest.fixture(scope="session")
def shapes(mesh):
    rng = np.random.default_rng(1234)
    return [random_shape(mesh, rng) for _ in range(100)]


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
