import math

import numpy as np
import pytest

from ptspectra.analysis import (ConvexityError, axis_zero_count, convexity_check, decay_fit,
                                fd_identity_errors, green_residual, random_paths, real_axis_report,
                                verify_monotonicity, verify_sign_theorems, zero_census,
                                zeros_in_certified_regions)
from ptspectra.grid import build_grid
from ptspectra.zeros import ZeroKind, find_zeros


def _all_zeros(grid):
    return find_zeros(grid, ZeroKind.U) + find_zeros(grid, ZeroKind.DU)


def test_sign_claims_hold_on_fine_grid(fine_grid):
    reports = verify_sign_theorems(fine_grid)
    active = [r for r in reports if r.applicable]
    assert len(active) >= 5
    for r in active:
        assert r.samples >= 10_000, r
        assert r.violations == 0 and r.worst_margin > 0, r


def test_nonreal_statements_marked_inapplicable(fine_grid):
    rep = {r.name: r for r in verify_sign_theorems(fine_grid)}
    assert not rep["nonreal_zero_location"].applicable


def test_real_axis_report(fine_grid):
    r = real_axis_report(fine_grid)
    assert r.samples == fine_grid.nx and r.passed and r.worst_margin > 0


def test_monotonicity(fine_grid):
    reports = {r.name: r for r in verify_monotonicity(fine_grid)}
    for name in ("re_monotone_vertical", "re_increasing_in_upper_lobe", "re_zero_on_imaginary_axis"):
        assert reports[name].samples > 0 and reports[name].passed, reports[name]
    assert all(r.passed for r in reports.values())


def test_green_random_paths(main_grid):
    for path in random_paths(main_grid, 10, seed=11):
        res = green_residual(main_grid, path)
        assert res.real_residual < 1e-7 and res.im_residual < 1e-7


def test_green_real_segment(main_grid):
    res = green_residual(main_grid, [-4.0 + 0j, 4.0 + 0j])
    assert max(res) < 1e-7
    assert res.raw_real < 1e-7 or abs(res.real_lhs) < 1e-12 * res.magnitude


def test_green_imaginary_axis(main_grid):
    # Re(u' conj u) vanishes on the imaginary axis for a real eigenvalue, so its side is ~0
    res = green_residual(main_grid, [-3.5j, 5.5j])
    assert abs(res.real_lhs) < 1e-10 * res.magnitude
    assert max(res) < 1e-7 and res.raw_im < 1e-7


def test_green_degenerate_and_outside(main_grid):
    assert tuple(green_residual(main_grid, [1 + 1j, 1 + 1j])) == (0.0, 0.0)
    with pytest.raises(ValueError):
        green_residual(main_grid, [0j, 7 + 0j])
    with pytest.raises(ValueError):
        green_residual(main_grid, [0j, 1 + 0j], grid_free=False)


def test_fd_identities_second_order(cubic, ground_real):
    errs = []
    for nx in (81, 161, 321):
        g = build_grid(cubic, ground_real, (-2, 2, -1, 1), (nx, (nx + 1) // 2))
        errs.append(fd_identity_errors(g))
    for a, b in zip(errs[:-1], errs[1:]):
        assert math.log2(a.im_q_vs_dy / b.im_q_vs_dy) >= 1.9
        # the x-derivative identities converge at second order too, with a slower preasymptotic start
        assert math.log2(a.im_diff / b.im_diff) >= 1.75
        assert math.log2(a.real_diff / b.real_diff) >= 1.75
    assert errs[-1].im_q_vs_dy < 2e-3


def test_convexity_wide_grid(wide_grid):
    rep = convexity_check(wide_grid)
    assert rep.convex and rep.tail_relative < 1e-10
    assert rep.fpp_rel_error < 1e-4
    assert np.all(rep.F > 0)


def test_convexity_coarse_rows(cubic, ground_real):
    g = build_grid(cubic, ground_real, (-12, 12, -2, 2), (1201, 81))
    assert convexity_check(g).convex


def test_convexity_needs_rows(cubic, ground_real):
    g = build_grid(cubic, ground_real, (-12, 12, 0, 0.1), (201, 2))
    with pytest.raises(ConvexityError, match="insufficient rows"):
        convexity_check(g)


def test_convexity_narrow_rows_rejected(cubic, ground_real):
    g = build_grid(cubic, ground_real, (-2, 2, -1, 1), (81, 11))
    with pytest.raises(ConvexityError, match="tail"):
        convexity_check(g)


def test_decay_fit(wide_grid):
    fits = decay_fit(wide_grid)
    assert len(fits) == wide_grid.ny
    for f in fits:
        assert f.c2 > 0 and f.c1 > 0 and f.inflation >= 1.0


def test_zero_census_and_growth(cubic, ground_real):
    found = {}
    for h in (10, 16):
        g = build_grid(cubic, ground_real, (-0.5, 0.5, 0.5, 0.5 + h), (21, int(round(h / 0.02)) + 1))
        found[h] = _all_zeros(g)
    rep = zero_census(found[10], ground_real.lam, taller=found[16])
    assert rep.passed and not rep.offenders
    lo, hi = rep.axis_counts
    assert 0 < lo < hi
    assert axis_zero_count(found[16], ground_real.lam) == hi


def test_no_zeros_in_certified_regions(main_grid, ground_real):
    zs = _all_zeros(main_grid)
    assert zs
    assert zeros_in_certified_regions(zs, ground_real.lam) == []


def test_census_flags_planted_offender(main_grid, ground_real):
    zs = find_zeros(main_grid)
    planted = type(zs[0])(**{**vars(zs[0]), "z": complex(2.0, -0.3)})
    rep = zero_census(zs + [planted], ground_real.lam)
    assert not rep.passed and planted in rep.offenders
