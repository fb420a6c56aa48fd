from __future__ import annotations

import functools

import pytest

from efie2d.assembly import assemble_G, assemble_S_and_N
from efie2d.geometry import ParametricCurve, build_mesh
from efie2d.kernels import KernelSpec
from efie2d.spectral import build_lb_basis


@functools.lru_cache(maxsize=None)
def circle_mesh(a: float, n: int):
    return build_mesh(ParametricCurve("circle", (a,)), n)


@functools.lru_cache(maxsize=None)
def circle_operators(a: float, n: int, family: str, k: float = 0.0, alpha: float | None = None):
    mesh = circle_mesh(a, n)
    return assemble_S_and_N(mesh, KernelSpec(family, k, alpha))


@functools.lru_cache(maxsize=None)
def circle_lb(a: float, n: int):
    mesh = circle_mesh(a, n)
    return build_lb_basis(mesh), assemble_G(mesh)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240601)


_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    log = request.config.stash[_ACCEPTANCE]

    def record(number: int, passed: bool, detail: str):
        log[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        passed, detail = log[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
