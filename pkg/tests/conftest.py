import functools

import numpy as np
import pytest
from hypothesis import settings

from conformal_lab.boundary import parse_boundary
from conformal_lab.mesh import build_disk_mesh
from conformal_lab.minimizer import MinimizeConfig, minimize
from conformal_lab.profile import power_profile

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def disk(level):
    return build_disk_mesh(level)


@functools.lru_cache(maxsize=None)
def minimizer_of(boundary, p, level, tol=1e-9):
    mesh = disk(level)
    return minimize(mesh, parse_boundary(boundary), MinimizeConfig(power_profile(p), grad_tol=tol))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
