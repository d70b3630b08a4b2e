"""Shared, session-cached fixtures: the cubic, its oracle spectrum, refined eigenvalues and grids."""

from __future__ import annotations

import time

import pytest

from ptspectra.grid import build_grid
from ptspectra.ode import PotentialSpec
from ptspectra.oracle import hermite_oracle
from ptspectra.spectrum import EigenvalueRecord, SearchBox, refine, scan

# one PASS/FAIL line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def cubic() -> PotentialSpec:
    return PotentialSpec.canonical(1)


@pytest.fixture(scope="session")
def oracle(cubic):
    return hermite_oracle(cubic, count=4)


@pytest.fixture(scope="session")
def ground(cubic, oracle) -> EigenvalueRecord:
    return refine(cubic, 1.2)


@pytest.fixture(scope="session")
def ground_real(ground) -> EigenvalueRecord:
    """The ground state with its (numerically zero) imaginary part dropped."""
    assert abs(ground.lam.imag) < 1e-8 * abs(ground.lam)
    return EigenvalueRecord(complex(ground.lam.real, 0.0), ground.wronskian_residual,
                            ground.sector_margin, ground.index, ground.iterations)


@pytest.fixture(scope="session")
def main_grid(cubic, ground_real):
    return build_grid(cubic, ground_real, (-6, 6, -4, 6), (241, 201))


@pytest.fixture(scope="session")
def fine_grid(cubic, ground_real):
    """Dense enough for 1e4 samples in every certified region."""
    return build_grid(cubic, ground_real, (-6, 6, -5, 6), (481, 441))


@pytest.fixture(scope="session")
def wide_grid(cubic, ground_real):
    """Wide rows for the x-integrals (tails below 1e-10)."""
    return build_grid(cubic, ground_real, (-12, 12, -2, 2), (2401, 161))


@pytest.fixture(scope="session")
def default_scans():
    """scan over [0, 40] x [-15, 15]i for canonical n, cached with its wall-clock time."""
    cache = {}

    def run(n: int):
        if n not in cache:
            t = time.perf_counter()
            res = scan(PotentialSpec.canonical(n), SearchBox(complex(0, -15), complex(40, 15)))
            cache[n] = (res, time.perf_counter() - t)
        return cache[n]

    return run
