import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptspectra.stokes import (ALabel, BLabel, StokesChart, classify_cubic_regions, critical_angles,
                              cubic_regions_grid, cubic_turning_points, region_index)

PI = math.pi


def test_cubic_angles_match_printed_values():
    got = np.sort(critical_angles(1))
    want = np.array([1, 5, 9, 13, 17]) * PI / 10
    assert np.allclose(got, want, atol=1e-14)


def test_even_branch_n2():
    want = np.mod(np.array([-1, 3, 7, 11, 15, 19, 23]) * PI / 14, 2 * PI)
    assert np.allclose(critical_angles(2), want, atol=1e-14)


def test_n1_gaps_equal():
    th = np.sort(critical_angles(1))
    gaps = np.diff(np.concatenate([th, th[:1] + 2 * PI]))
    assert np.allclose(gaps, 2 * PI / 5, atol=1e-14)


def test_n0_rejected():
    with pytest.raises(ValueError):
        critical_angles(0)


@pytest.mark.parametrize("n", range(1, 9))
def test_partition_and_no_real_axis_ray(n):
    th = np.sort(critical_angles(n))
    assert len(th) == 2 * n + 3
    gaps = np.diff(np.concatenate([th, th[:1] + 2 * PI]))
    assert abs(gaps.sum() - 2 * PI) < 1e-12
    assert np.allclose(gaps, 2 * PI / (2 * n + 3), atol=1e-12)
    assert np.all(np.abs(th) > 1e-3) and np.all(np.abs(th - PI) > 1e-3)


def test_chart_invariants_enforced():
    good = critical_angles(1)
    with pytest.raises(ValueError):
        StokesChart(1, good[:4], 0.1)
    with pytest.raises(ValueError):
        StokesChart(1, good, PI / 5)
    with pytest.raises(ValueError):
        StokesChart(1, np.mod(good - PI / 10, 2 * PI), 0.1)   # puts a ray on the real axis


def test_region_index_examples():
    chart = StokesChart.for_degree(1)
    right = region_index(chart, 1.0)
    assert not right.on_ray and right.in_shrunk
    lo, hi = chart.sector_bounds(right.index)
    assert lo < 2 * PI < hi or lo < 0 < hi       # the sector straddles arg 0
    assert region_index(chart, cmath.exp(1j * PI / 10)).on_ray
    down = region_index(chart, -1j)
    lo, hi = chart.sector_bounds(down.index)
    assert math.isclose(lo, 13 * PI / 10) and math.isclose(hi, 17 * PI / 10)
    with pytest.raises(ValueError):
        region_index(chart, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.floats(0.0, 2 * PI, exclude_max=True), st.floats(0.1, 100.0))
def test_region_index_locally_constant(n, phi, r):
    chart = StokesChart.for_degree(n)
    dist = np.abs(np.mod(phi - chart.thetas + PI, 2 * PI) - PI).min()
    if dist < 1e-6:
        return
    z = cmath.rect(r, phi)
    j = region_index(chart, z).index
    for d in (1e-9, -1e-9, 1e-9j, -1e-9j):
        assert region_index(chart, z * (1 + d)).index == j


def test_classify_examples():
    lab = classify_cubic_regions(2j, 1.0)
    assert lab.a_region is ALabel.A1
    assert classify_cubic_regions(0, 1.0).a_region is ALabel.A4
    with pytest.raises(ValueError):
        classify_cubic_regions(1.0, -1.0)


def test_turning_points_one_per_lower_quadrant():
    roots = cubic_turning_points(1 + 1j)
    quads = sorted({(r.real > 0, r.imag > 0) for r in roots})
    # quadrants II, III and IV
    assert quads == [(False, False), (False, True), (True, False)]


def test_turning_point_examples():
    r = cubic_turning_points(1j)
    want = [1, cmath.exp(2j * PI / 3), cmath.exp(4j * PI / 3)]
    assert all(min(abs(a - b) for a in r) < 1e-14 for b in want)
    r8 = cubic_turning_points(8j)
    assert all(min(abs(a - 2 * b) for a in r8) < 1e-13 for b in want)
    # lambda = 1: z^3 = -i, arguments -pi/6 + 2 pi k / 3, cross-checked with numpy
    r1 = cubic_turning_points(1.0)
    ref = np.roots([1j, 0, 0, -1])
    assert all(min(abs(a - b) for a in r1) < 1e-13 for b in ref)
    assert np.allclose(np.sort(np.angle(r1)), [-5 * PI / 6, -PI / 6, PI / 2])
    with pytest.raises(ValueError):
        cubic_turning_points(0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 30), st.floats(-20, 20))
def test_turning_points_on_both_level_sets(a, b):
    lam = complex(a, b)
    for r in cubic_turning_points(lam):
        w = 1j * r ** 3 - lam
        assert abs(w) <= 1e-12 * abs(lam) + 1e-15


@settings(max_examples=300, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.05, 10), st.floats(-5, 5))
def test_labels_agree_with_signs(x, y, a, b):
    lam = complex(a, b)
    z = complex(x, y)
    w = 1j * z ** 3 - lam
    lab = classify_cubic_regions(z, lam)
    if lab.a_region is not ALabel.BOUNDARY:
        assert (w.real < 0) == (lab.a_region is ALabel.A4)
    if lab.b_region is not BLabel.BOUNDARY:
        # for Im lambda < 0 the labels are those of the mirror image -conj(z), where w is conjugated
        im = w.imag if b >= 0 else -w.imag
        assert (im < 0) == (lab.b_region is BLabel.B4)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.05, 10), st.floats(0.01, 5))
def test_lower_half_labels_are_reflections(x, y, a, b):
    lam = complex(a, b)
    assert classify_cubic_regions(complex(x, y), lam.conjugate()) == \
        classify_cubic_regions(complex(-x, y), lam)


def test_large_z_components():
    lam = 1.0 + 0.5j
    # the positive components of Re(iz^3) = -r^3 sin(3 phi) are centred on pi/2, 7pi/6 and -pi/6
    far = {PI / 2: ALabel.A1, 7 * PI / 6: ALabel.A2, -PI / 6: ALabel.A3, PI / 6: ALabel.A4}
    for phi, want in far.items():
        assert classify_cubic_regions(cmath.rect(50, phi), lam).a_region is want
    assert classify_cubic_regions(50.0, lam).b_region is BLabel.B1


def test_grid_labels_match_pointwise():
    x = np.linspace(-3, 3, 31)
    y = np.linspace(-3, 3, 29)
    for lam in (1.0, 1 + 0.7j, 2 - 0.4j):
        a, b = cubic_regions_grid(x[None, :], y[:, None], lam)
        codes_a = {ALabel.A1: 1, ALabel.A2: 2, ALabel.A3: 3, ALabel.A4: 4, ALabel.BOUNDARY: 0}
        codes_b = {BLabel.B1: 1, BLabel.B2: 2, BLabel.B3: 3, BLabel.B4: 4, BLabel.BOUNDARY: 0}
        for i in range(0, len(y), 4):
            for j in range(0, len(x), 5):
                lab = classify_cubic_regions(complex(x[j], y[i]), lam)
                assert a[i, j] == codes_a[lab.a_region]
                assert b[i, j] == codes_b[lab.b_region]
