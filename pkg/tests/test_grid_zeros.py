import math

import numpy as np
import pytest

from ptspectra.analysis import pt_symmetry_error
from ptspectra.grid import FieldGrid, GridMismatchError, build_grid
from ptspectra.ode import ComplexPath, SolutionState, asymptotic_init, default_radius, integrate
from ptspectra.zeros import ZeroFindingError, ZeroKind, cell_windings, find_zeros


def _poly_grid(coeffs, x=(-2.03, 1.97, 41), y=(-1.51, 1.49, 31)):
    p = np.polynomial.Polynomial(coeffs)
    dp, ddp = p.deriv(), p.deriv(2)
    return FieldGrid.from_function(np.linspace(*x), np.linspace(*y), p, dp, ddp)


def test_spec_rect_is_finite(cubic, ground_real):
    g = build_grid(cubic, ground_real, (-6, 6, -4, 4), (241, 161))
    assert g.u.shape == (161, 241)
    for arr in (g.u, g.du, g.log_scale):
        assert np.all(np.isfinite(arr))
    assert g.match_residual < 1e-9


def test_real_axis_matches_fresh_shooting(cubic, ground_real, main_grid):
    # shoot inward from the side where the eigenfunction decays, normalised by its own u(0)
    g = main_grid
    i0 = int(np.nonzero(g.y == 0)[0][0])
    lam = ground_real.lam
    L = default_radius(cubic, lam) + 1.0
    for j in (10, 60, 120, 170, 230):
        xj = float(g.x[j])
        if xj == 0:
            continue
        z0 = -L if xj < 0 else L
        init = asymptotic_init(cubic, lam, z0)
        at_x = integrate(cubic, lam, ComplexPath((z0, xj)), init).state
        at_0 = integrate(cubic, lam, ComplexPath((z0, 0.0)), init).state
        fresh = at_x.u / at_0.u * math.exp(at_x.log_scale - at_0.log_scale)
        grid_val = g.u[i0, j] * math.exp(g.log_scale[i0, j])
        assert abs(grid_val - fresh) < 1e-8 * abs(fresh)


def test_off_axis_values_path_independent(cubic, ground_real, main_grid):
    # reach a grid node along a diagonal from the origin rather than up its column
    g = main_grid
    i0 = int(np.nonzero(g.y == 0)[0][0])
    j0 = int(np.nonzero(g.x == 0)[0][0])
    start = SolutionState(0j, g.u[i0, j0], g.du[i0, j0], g.log_scale[i0, j0])
    for i, j in ((i0 + 40, j0 + 30), (i0 + 100, j0 - 50), (i0 - 60, j0 + 20), (i0 - 100, j0 - 40)):
        z = complex(g.x[j], g.y[i])
        st = integrate(cubic, ground_real.lam, ComplexPath((0j, z)), start).state
        ref = st.u * math.exp(st.log_scale - g.log_scale[i, j])
        assert abs(g.u[i, j] - ref) < 1e-7 * abs(ref)


def test_pt_symmetry(main_grid):
    err, phase = pt_symmetry_error(main_grid)
    assert err < 1e-6
    # direct spot check of u(z) = e^{i phi} conj(u(-conj z)) at a few samples
    g = main_grid
    uu = g.u * np.exp(g.log_scale - g.log_scale.max())
    for i, j in ((30, 17), (120, 200), (190, 81)):
        a = uu[i, j]
        b = np.exp(1j * phase) * np.conj(uu[i, g.nx - 1 - j])
        assert abs(a - b) <= 1e-6 * abs(a)


def test_perturbed_lambda_mismatch(cubic, ground_real):
    with pytest.raises(GridMismatchError):
        build_grid(cubic, ground_real.lam + 0.01, (-3, 3, -1, 1), (25, 9))


def test_grid_validation():
    x, y = np.linspace(0, 1, 3), np.linspace(0, 1, 2)
    with pytest.raises(ValueError):
        FieldGrid(x, y, np.ones((3, 3)), np.ones((3, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        FieldGrid(x, y, np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((2, 3)))


def test_quadratic_zeros():
    zs = find_zeros(_poly_grid([-1, 0, 1]))
    assert len(zs) == 2
    got = sorted(z.z.real for z in zs)
    assert np.allclose(got, [-1, 1], atol=1e-12)
    assert all(abs(z.z.imag) < 1e-12 and z.winding == 1 for z in zs)


def test_derivative_zero():
    zs = find_zeros(_poly_grid([-1, 0, 1]), ZeroKind.DU)
    assert len(zs) == 1 and abs(zs[0].z) < 1e-12 and zs[0].which is ZeroKind.DU


def test_double_zero_counts_twice():
    zs = find_zeros(_poly_grid([0.09, -0.6, 1]))   # (z - 0.3)^2
    assert sum(z.winding for z in zs) == 2
    assert all(abs(z.z - 0.3) < 1e-6 for z in zs)


def test_no_zeros_in_zero_free_field():
    x, y = np.linspace(-2, 2, 21), np.linspace(-2, 2, 21)
    g = FieldGrid.from_function(x, y, np.exp, np.exp, np.exp)
    assert not np.any(cell_windings(g))
    assert find_zeros(g) == []


def test_zero_on_node_is_reported():
    with pytest.raises(ZeroFindingError, match="grid node"):
        find_zeros(_poly_grid([0, 1], x=(-1, 1, 21), y=(-1, 1, 21)))


def test_ground_state_upper_zeros_on_axis(main_grid, ground_real):
    zs = [z for z in find_zeros(main_grid) if z.z.imag >= 0]
    assert zs, "the window should contain imaginary-axis zeros"
    cut = ground_real.lam.real ** (1 / 3)
    for z in zs:
        assert abs(z.z.real) < 1e-6 and z.z.imag > cut


def test_u_and_du_zeros_separate(main_grid):
    zu = find_zeros(main_grid, ZeroKind.U)
    zd = find_zeros(main_grid, ZeroKind.DU)
    assert zu and zd
    assert min(abs(a.z - b.z) for a in zu for b in zd) > 1e-6
