import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import invariant_matrix
from ptspectra.ode import (ComplexPath, IntegrationError, PotentialSpec, SolutionState, asymptotic_init,
                           combine_log, default_radius, integrate, potential_derivative, potential_eval,
                           propagate_line)

FREE = PotentialSpec.test_only([0.0])


def test_free_cosh():
    r = integrate(FREE, -1.0, ComplexPath((0, 1)), SolutionState(0, 1, 0), tol=1e-12)
    assert abs(r.state.value - math.cosh(1)) < 1e-11
    assert abs(r.state.derivative - math.sinh(1)) < 1e-11


def test_free_cos():
    r = integrate(FREE, 1.0, ComplexPath((0, math.pi / 2)), SolutionState(0, 1, 0), tol=1e-12)
    assert abs(r.state.value) < 1e-11
    assert abs(r.state.derivative + 1) < 1e-11


def test_free_complex_path_closed_form():
    # u'' = -k^2 u along a bent path: u = cos(k z) is entire
    k = 1.3 - 0.2j
    path = ComplexPath((0, 0.7 + 0.5j, 1.5 - 0.3j))
    r = integrate(FREE, k * k, path, SolutionState(0, 1, 0), tol=1e-12)
    assert abs(r.state.value - cmath.cos(k * path.end)) < 1e-10


def test_potential_canonical_cubic():
    spec = PotentialSpec.canonical(1)
    for z in (0.3, -1.2 + 0.4j, 2j):
        assert abs(potential_eval(spec, z) - 1j * z ** 3) < 1e-13
        assert abs(potential_derivative(spec, z) - 3j * z ** 2) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_potential_canonical_higher(n):
    spec = PotentialSpec.canonical(n)
    for z in (0.3, -1.2 + 0.4j, 2j):
        assert abs(potential_eval(spec, z) + (1j * z) ** (2 * n + 1)) < 1e-11 * (1 + abs(z) ** (2 * n + 1))


def test_decaying_init_signs():
    spec = PotentialSpec.canonical(1)
    left = asymptotic_init(spec, 1.0, -12.0)
    right = asymptotic_init(spec, 1.0, 12.0)
    assert left.u == 1 and left.log_scale == 0
    assert left.log_derivative.real > 0
    assert right.log_derivative.real < 0
    asymptotic_init(spec, 1.0, 12 * cmath.exp(1j * math.pi / 20))


def test_init_rejections():
    spec = PotentialSpec.canonical(1)
    with pytest.raises(ValueError, match="critical ray"):
        asymptotic_init(spec, 1.0, 12 * cmath.exp(1j * math.pi / 10))
    with pytest.raises(ValueError, match="further out"):
        asymptotic_init(spec, 1.0, 0.5)
    with pytest.raises(ValueError):
        asymptotic_init(spec, 1.0, 0)
    with pytest.raises(ValueError):
        asymptotic_init(spec, 1.0, 12.0, mode="sideways")


def test_init_matches_wkb_leading_terms():
    # u'/u ~ -(2n+1)/(4z) +- i (iz)^((2n+1)/2) at large |z|
    for n in (1, 2, 3):
        spec = PotentialSpec.canonical(n)
        z0 = -default_radius(spec, 2.0)
        s = asymptotic_init(spec, 2.0, z0)
        lead = 1j * (1j * z0) ** ((2 * n + 1) / 2)
        best = min(abs(s.log_derivative - (sg * lead - (2 * n + 1) / (4 * z0))) for sg in (1, -1))
        assert best < 0.05 * abs(lead)


def test_inward_growth_for_eigenfunction(ground):
    spec = PotentialSpec.canonical(1)
    init = asymptotic_init(spec, ground.lam, -12.0)
    r = integrate(spec, ground.lam, ComplexPath((-12.0, 0.0)), init)
    assert r.state.log_scale > 0
    assert math.isfinite(abs(r.state.u)) and r.state.u != 0


def test_rescaling_keeps_ratio():
    spec = PotentialSpec.canonical(1)
    init = asymptotic_init(spec, 1.0, -12.0)
    a = integrate(spec, 1.0, ComplexPath((-12.0, 0.0)), init, rescale_log=30.0).state
    b = integrate(spec, 1.0, ComplexPath((-12.0, 0.0)), init, rescale_log=5.0).state
    assert a.log_scale != b.log_scale
    assert abs(a.log_derivative - b.log_derivative) < 1e-9 * abs(a.log_derivative)


def test_integrate_preconditions():
    with pytest.raises(ValueError):
        integrate(FREE, 1.0, ComplexPath((0, 1)), SolutionState(0.5, 1, 0))
    with pytest.raises(ValueError):
        integrate(FREE, 1.0, ComplexPath((0, 1)), SolutionState(0, 1, 0), tol=0)
    with pytest.raises(ValueError):
        SolutionState(0, 0, 0)


def test_failure_carries_position():
    spec = PotentialSpec.canonical(1)
    with pytest.raises(IntegrationError) as info:
        integrate(spec, 1.0, ComplexPath((0, 0.5, 200j)), SolutionState(0, 1, 0), max_steps=200)
    assert info.value.position is not None


def test_dense_samples_and_csv(tmp_path):
    r = integrate(FREE, 1.0, ComplexPath((0, 1, 1 + 1j)), SolutionState(0, 1, 0), samples_per_segment=4)
    s = r.samples
    assert len(s.z) == 9 and s.z[0] == 0 and s.z[-1] == 1 + 1j
    assert np.allclose(s.u * np.exp(s.log_scale), np.cos(s.z), atol=1e-10)
    out = tmp_path / "dense.csv"
    s.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "re_z,im_z,re_u,im_u,re_du,im_du,log_scale" and len(lines) == 10


def test_propagate_line_outputs():
    fin, (u, du, ls) = propagate_line(FREE, -1.0, 0, 1, SolutionState(0, 1, 0), out_t=[0.25, 0.5, 1.0])
    assert np.allclose(u * np.exp(ls), np.cosh([0.25, 0.5, 1.0]), atol=1e-11)
    assert abs(fin[0] * math.exp(fin[2]) - math.cosh(1)) < 1e-11


@settings(max_examples=100, deadline=None)
@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.floats(-50, 50), st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.floats(-50, 50))
def test_combine_log(a, la, b, lb):
    m, l = combine_log(a, la, b, lb)
    want = a * math.exp(la) + b * math.exp(lb)
    assert abs(m * math.exp(l) - want) <= 1e-12 * (abs(a) * math.exp(la) + abs(b) * math.exp(lb)) + 1e-300


def test_default_radius_meets_ratio():
    for n in (1, 2, 3):
        spec = PotentialSpec.canonical(n)
        for lam in (1.0, 30.0, 60 + 10j):
            r = default_radius(spec, lam)
            assert r >= 2 * (40 + abs(lam)) ** (2 / (2 * n + 3)) - 1e-12
            assert min(abs(potential_eval(spec, r)), abs(potential_eval(spec, -r))) >= 100 * abs(lam)


def test_path_reversed_and_length():
    p = ComplexPath((0, 3, 3 + 4j))
    assert p.length == 7
    assert p.reversed().waypoints == (3 + 4j, 3, 0)
    with pytest.raises(ValueError):
        ComplexPath((1,))


@pytest.mark.parametrize("case", invariant_matrix.cases(per_n=3), ids=lambda c: f"n{c.n}")
def test_engine_invariants(case):
    for tol in invariant_matrix.TOLS:
        ratios = invariant_matrix.evaluate(case, tol)
        assert all(v <= 1.0 for v in ratios.values()), ratios
