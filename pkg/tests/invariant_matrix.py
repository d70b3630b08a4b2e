"""Seeded matrix of engine-invariant checks, shared by the ODE tests and the acceptance suite.

Every case reports its error divided by the allowed multiple of tol, so a
value <= 1 passes.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from ptspectra.ode import (ComplexPath, PotentialSpec, SolutionState, asymptotic_init, default_radius,
                           integrate)
from ptspectra.spectrum import sector_bound
from ptspectra.stokes import StokesChart

SEED = 20261019
TOLS = (1e-8, 1e-10)
LEG = 0.75
RADIUS = 1.25
ALLOWED = {"wronskian": 10, "path": 100, "rescale": 10, "reversal": 100}


@dataclass
class Case:
    n: int
    lam: complex
    points: tuple[complex, ...]
    slope: complex


def cases(per_n: int = 5, seed: int = SEED) -> list[Case]:
    rng = np.random.default_rng(seed)
    out = []
    for n in (1, 2, 3):
        for _ in range(per_n):
            lam = cmath.rect(rng.uniform(0.5, 15.0), rng.uniform(-1, 1) * sector_bound(n))
            # legs of length LEG keep the growth along each leg, and with it the
            # conditioning of the Wronskian and reversal checks, of order one
            pts = [complex(*rng.uniform(-0.5, 0.5, 2))]
            for phi in rng.uniform(0, 2 * math.pi, 3):
                step = LEG * cmath.exp(1j * phi)
                nxt = pts[-1] + step
                pts.append(nxt if abs(nxt) <= RADIUS else pts[-1] - step)
            pts = tuple(pts)
            out.append(Case(n, lam, pts, complex(*rng.normal(size=2))))
    return out


def state_distance(s: SolutionState, t: SolutionState) -> float:
    """max |(u, u') difference| / max |t|, on true (unscaled) values."""
    ls = max(s.log_scale, t.log_scale)
    a = np.array([s.u, s.du]) * math.exp(s.log_scale - ls)
    b = np.array([t.u, t.du]) * math.exp(t.log_scale - ls)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def detour_offset(n: int) -> complex:
    """0.2i on the side that makes the last leg approach the centre ray of the right sector.

    The opposite side runs the final leg against the dominant solution's
    growth and amplifies local errors by a large exponential factor.
    """
    chart = StokesChart.for_degree(n)
    lo, hi = chart.sector_bounds(chart.right_index)
    centre = math.remainder(0.5 * (lo + hi), 2 * math.pi)
    return -0.2j if centre > 0 else 0.2j


def evaluate(case: Case, tol: float) -> dict[str, float]:
    spec = PotentialSpec.canonical(case.n)
    lam = case.lam
    p = ComplexPath(case.points)
    a0 = case.points[0]
    r1 = integrate(spec, lam, p, SolutionState(a0, 1, 0), tol=tol, samples_per_segment=8).samples
    r2 = integrate(spec, lam, p, SolutionState(a0, 0, 1), tol=tol, samples_per_segment=8).samples
    w = (r1.u * r2.du - r1.du * r2.u) * np.exp(r1.log_scale + r2.log_scale)
    wronskian = float(np.max(np.abs(w - w[0])) / abs(w[0]))

    L = default_radius(spec, lam)
    init = asymptotic_init(spec, lam, -L)
    d = detour_offset(case.n)
    axis = integrate(spec, lam, ComplexPath((-L, L)), init, tol=tol).state
    detour = integrate(spec, lam, ComplexPath((-L, -L + d, L + d, L)), init, tol=tol).state
    low = integrate(spec, lam, ComplexPath((-L, L)), init, tol=tol, rescale_log=20.0).state

    s0 = SolutionState(a0, 1, case.slope)
    mid = integrate(spec, lam, ComplexPath((a0, case.points[1])), s0, tol=tol).state
    back = integrate(spec, lam, ComplexPath((case.points[1], a0)), mid, tol=tol).state

    raw = {"wronskian": wronskian, "path": state_distance(detour, axis),
           "rescale": state_distance(low, axis), "reversal": state_distance(back, s0)}
    return {k: v / (ALLOWED[k] * tol) for k, v in raw.items()}


def worst_ratios(per_n: int = 5) -> dict[str, float]:
    worst = dict.fromkeys(ALLOWED, 0.0)
    for tol in TOLS:
        for c in cases(per_n):
            for k, v in evaluate(c, tol).items():
                worst[k] = max(worst[k], v)
    return worst
