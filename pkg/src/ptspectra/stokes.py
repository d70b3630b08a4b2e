"""Stokes sectors of -u'' + [P(z^2) - (iz)^(2n+1)] u = lambda u and the cubic A/B regions.

Critical rays are arg z = theta_j with

    theta_j = (2 pi j - pi/2) / (2n+3)   (n even)
    theta_j = (2 pi j + pi/2) / (2n+3)   (n odd)

for j = 0 .. 2n+2.  The sector S_j lies between theta_j and theta_{j+1}.

For the cubic potential i z^3 the complement of the level curves
Re(i z^3 - lambda) = 0 splits into A1..A4 and the complement of
Im(i z^3 - lambda) = 0 into B1..B4:

    Re(i z^3 - lambda) = -3 x^2 y + y^3 - alpha      (negative exactly in A4)
    Im(i z^3 - lambda) =  x^3 - 3 x y^2 - beta       (negative exactly in B4)

A1 is the component of Re > 0 around the positive imaginary axis, A2 the one
in the third quadrant and A3 the one in the fourth quadrant.  For beta >= 0,
B1 is the component of Im > 0 around the positive real axis, B2 the one in the
second quadrant and B3 the one in the third quadrant.  For beta < 0 every label
is the mirror image (z -> -conj(z)) of the label for conj(lambda).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi


def critical_angles(n: int) -> np.ndarray:
    """Angles theta_0 .. theta_{2n+2} of the critical rays, each in [0, 2 pi).

    The array is in j order, so for even n the first entry wraps around.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"degree index n must be a positive integer, got {n!r}")
    n = int(n)
    shift = -math.pi / 2 if n % 2 == 0 else math.pi / 2
    j = np.arange(2 * n + 3)
    return np.mod((2 * math.pi * j + shift) / (2 * n + 3), TWO_PI)


def critical_angles_for(degree: int, lead: complex) -> np.ndarray:
    """Critical rays for a potential with leading term lead * z**degree.

    These are the directions in which the WKB exponent
    sqrt(lead) z^((degree+2)/2) is purely imaginary.  For lead = -i^(2n+1)
    and degree = 2n+1 this reproduces critical_angles(n).
    """
    if degree < 1 or lead == 0:
        raise ValueError("need degree >= 1 and a nonzero leading coefficient")
    j = np.arange(degree + 2)
    return np.mod((math.pi - cmath.phase(lead) + TWO_PI * j) / (degree + 2), TWO_PI)


@dataclass(frozen=True)
class StokesChart:
    n: int
    thetas: np.ndarray = field(repr=False)
    epsilon: float

    def __post_init__(self):
        k = 2 * self.n + 3
        th = np.asarray(self.thetas, dtype=float)
        if th.shape != (k,):
            raise ValueError(f"expected {k} critical angles, got {th.shape}")
        gaps = np.mod(np.diff(np.concatenate([th, th[:1]])), TWO_PI)
        if not np.allclose(gaps, TWO_PI / k, atol=1e-12):
            raise ValueError("critical angles must be equally spaced")
        if np.any(np.isclose(th, 0.0, atol=1e-14)) or np.any(np.isclose(th, math.pi, atol=1e-14)):
            raise ValueError("a critical angle lies on the real axis")
        if not 0.0 < self.epsilon < math.pi / k:
            raise ValueError(f"epsilon must lie in (0, pi/{k})")

    @classmethod
    def for_degree(cls, n: int, epsilon: float | None = None) -> "StokesChart":
        if epsilon is None:
            epsilon = math.pi / (4 * (2 * n + 3))
        return cls(n, critical_angles(n), epsilon)

    @property
    def sector_count(self) -> int:
        return 2 * self.n + 3

    @property
    def right_index(self) -> int:
        """Index of the sector containing the positive real axis."""
        return region_index(self, 1.0)[0]

    @property
    def left_index(self) -> int:
        return region_index(self, -1.0)[0]

    def sector_bounds(self, j: int) -> tuple[float, float]:
        """(theta_j, theta_{j+1}) with the upper bound unwrapped above the lower one."""
        k = self.sector_count
        lo = self.thetas[j % k]
        hi = self.thetas[(j + 1) % k]
        if hi <= lo:
            hi += TWO_PI
        return float(lo), float(hi)


@dataclass(frozen=True)
class RegionHit:
    index: int
    in_shrunk: bool
    on_ray: bool

    def __iter__(self):
        return iter((self.index, self.in_shrunk, self.on_ray))

    def __getitem__(self, i):
        return (self.index, self.in_shrunk, self.on_ray)[i]


def region_index(chart: StokesChart, z: complex, ray_tol: float = 1e-12) -> RegionHit:
    """Sector S_j containing z, with the half-open convention theta_j <= arg z < theta_{j+1}.

    ``in_shrunk`` reports membership of S_{j,epsilon}; ``on_ray`` flags
    arg z within ray_tol of a critical angle.
    """
    z = complex(z)
    if z == 0:
        raise ValueError("z = 0 has no argument")
    phi = cmath.phase(z) % TWO_PI
    k = chart.sector_count
    dist = np.abs(np.mod(phi - chart.thetas + math.pi, TWO_PI) - math.pi)
    on_ray = bool(dist.min() <= ray_tol)
    for j in range(k):
        lo, hi = chart.sector_bounds(j)
        p = phi if phi >= lo else phi + TWO_PI
        if lo <= p < hi or (on_ray and abs(p - lo) <= ray_tol):
            in_shrunk = lo + chart.epsilon < p < hi - chart.epsilon
            return RegionHit(j, in_shrunk, on_ray)
    raise AssertionError("angles do not cover the circle")  # pragma: no cover


class ALabel(str, Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"
    BOUNDARY = "boundary"


class BLabel(str, Enum):
    B1 = "B1"
    B2 = "B2"
    B3 = "B3"
    B4 = "B4"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class CubicRegionLabel:
    a_region: ALabel
    b_region: BLabel


def boundary_tolerance(z: complex, lam: complex) -> float:
    return 1e-9 * (1.0 + abs(z) ** 3 + abs(lam))


def _labels_upper(x: float, y: float, lam: complex, tol: float) -> CubicRegionLabel:
    # beta >= 0 convention
    fa = -3.0 * x * x * y + y ** 3 - lam.real
    fb = x ** 3 - 3.0 * x * y * y - lam.imag
    if abs(fa) < tol:
        a = ALabel.BOUNDARY
    elif fa < 0:
        a = ALabel.A4
    elif y > 0:
        a = ALabel.A1
    else:
        a = ALabel.A2 if x < 0 else ALabel.A3
    if abs(fb) < tol:
        b = BLabel.BOUNDARY
    elif fb < 0:
        b = BLabel.B4
    elif x > 0:
        b = BLabel.B1
    else:
        b = BLabel.B2 if y > 0 else BLabel.B3
    return CubicRegionLabel(a, b)


def classify_cubic_regions(z: complex, lam: complex, tol: float | None = None) -> CubicRegionLabel:
    """A/B labels of z for the cubic potential with eigenvalue parameter lam (Re lam > 0)."""
    z = complex(z)
    lam = complex(lam)
    if not lam.real > 0:
        raise ValueError("classification assumes Re(lambda) > 0")
    if tol is None:
        tol = boundary_tolerance(z, lam)
    if lam.imag >= 0:
        return _labels_upper(z.real, z.imag, lam, tol)
    return _labels_upper(-z.real, z.imag, lam.conjugate(), tol)


def cubic_regions_grid(x: np.ndarray, y: np.ndarray, lam: complex) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised labels on a meshgrid: integer codes 1..4 for A_k / B_k and 0 for boundary."""
    lam = complex(lam)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam.imag < 0:
        x = -x
        lam = lam.conjugate()
    tol = 1e-9 * (1.0 + np.hypot(x, y) ** 3 + abs(lam))
    fa = -3.0 * x * x * y + y ** 3 - lam.real
    fb = x ** 3 - 3.0 * x * y * y - lam.imag
    a = np.where(fa < 0, 4, np.where(y > 0, 1, np.where(x < 0, 2, 3)))
    a = np.where(np.abs(fa) < tol, 0, a)
    b = np.where(fb < 0, 4, np.where(x > 0, 1, np.where(y > 0, 2, 3)))
    b = np.where(np.abs(fb) < tol, 0, b)
    return a, b


def cubic_turning_points(lam: complex) -> np.ndarray:
    """The three roots of i z^3 = lam, sorted by argument in (-pi, pi]."""
    lam = complex(lam)
    if lam == 0:
        raise ValueError("lambda = 0 gives a triple turning point")
    w = -1j * lam
    r = abs(w) ** (1.0 / 3.0)
    phi = cmath.phase(w)
    roots = np.array([r * cmath.exp(1j * (phi + TWO_PI * k) / 3.0) for k in range(3)])
    ang = np.angle(roots)
    return roots[np.argsort(ang)]
