"""Eigenfunction samples on a rectangle of the complex plane.

Every sample is stored as a mantissa pair (u, u') with a shared real log
scale, so true values are u * exp(log_scale).

Filling order, chosen for stability of the propagation:

* real axis: the decaying solutions from -L and +L, matched at x = 0;
* y >= 0: vertical columns upward from the real axis (|u| grows with y
  there, so the propagated solution stays dominant);
* y < 0: the imaginary-axis column downward gives an anchor per row; each
  half-row is then shot inward from a far point inside the left/right
  Stokes sector and scaled onto the anchor.  Downward columns away from the
  axis lose all accuracy once |u| starts to decrease.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ode import (DEFAULT_TOL, IntegrationError, PotentialSpec, asymptotic_init,
                  default_radius, potential_eval, propagate_line)
from .spectrum import EigenvalueRecord, thread_count
from .stokes import StokesChart, region_index

MATCH_LIMIT = 1e-6


class GridMismatchError(RuntimeError):
    """The left and right decaying solutions disagree: lambda is not an eigenvalue."""

    def __init__(self, residual: float, lam: complex):
        super().__init__(f"mismatch {residual:.3e} at the matching point for lambda = {lam:.10g}; "
                         "not an eigenvalue to grid accuracy")
        self.residual = residual


Local = Callable[[complex], tuple[complex, complex, complex, float]]


@dataclass
class FieldGrid:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray        # (ny, nx) mantissas
    du: np.ndarray
    log_scale: np.ndarray
    lam: complex = 0j
    spec: PotentialSpec | None = None
    match_residual: float = 0.0
    row_residual: float = 0.0
    local: Local | None = field(default=None, repr=False)

    def __post_init__(self):
        shape = (len(self.y), len(self.x))
        for name in ("u", "du", "log_scale"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} must have shape {shape}")
        if np.any((self.u == 0) & (self.du == 0)):
            raise ValueError("a sample has u = u' = 0")

    @property
    def nx(self) -> int:
        return len(self.x)

    @property
    def ny(self) -> int:
        return len(self.y)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0]) if self.nx > 1 else 0.0

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0]) if self.ny > 1 else 0.0

    @property
    def z(self) -> np.ndarray:
        return self.x[None, :] + 1j * self.y[:, None]

    @property
    def rect(self) -> tuple[float, float, float, float]:
        return float(self.x[0]), float(self.x[-1]), float(self.y[0]), float(self.y[-1])

    def contains(self, z: complex, slack: float = 1e-12) -> bool:
        x0, x1, y0, y1 = self.rect
        return x0 - slack <= z.real <= x1 + slack and y0 - slack <= z.imag <= y1 + slack

    # products in mantissa units: true value = value * exp(2 log_scale)
    @property
    def q_mantissa(self) -> np.ndarray:
        return self.du * np.conj(self.u)

    @property
    def sign_scale(self) -> np.ndarray:
        """|u| (|u| + |u'|) in mantissa units, the yardstick for strict-sign tolerances."""
        a = np.abs(self.u)
        return a * (a + np.abs(self.du))

    def true_values(self) -> tuple[np.ndarray, np.ndarray]:
        with np.errstate(over="ignore", under="ignore"):
            s = np.exp(self.log_scale)
            return self.u * s, self.du * s

    @property
    def re_q(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return self.q_mantissa.real * np.exp(2 * self.log_scale)

    @property
    def im_q(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return self.q_mantissa.imag * np.exp(2 * self.log_scale)

    def abs2_log(self) -> np.ndarray:
        """log |u|^2."""
        with np.errstate(divide="ignore"):
            return 2 * (np.log(np.abs(self.u)) + self.log_scale)

    def evaluate(self, z: complex) -> tuple[complex, complex, complex, float]:
        """(u, u', u'', log_scale) at z, integrated afresh from the nearest node."""
        if self.local is None:
            raise ValueError("this grid carries no local evaluator")
        return self.local(complex(z))

    def nearest(self, z: complex) -> tuple[int, int]:
        i = int(np.clip(np.rint((z.imag - self.y[0]) / (self.dy or 1.0)), 0, self.ny - 1))
        j = int(np.clip(np.rint((z.real - self.x[0]) / (self.dx or 1.0)), 0, self.nx - 1))
        return i, j

    def rows(self):
        """(x, y, Re u, Im u, re_q, im_q) per sample, with true (unscaled) values."""
        uu, _ = self.true_values()
        rq, iq = self.re_q, self.im_q
        for i, yv in enumerate(self.y):
            for j, xv in enumerate(self.x):
                yield (float(xv), float(yv), float(uu[i, j].real), float(uu[i, j].imag),
                       float(rq[i, j]), float(iq[i, j]))

    @classmethod
    def from_function(cls, x, y, f: Callable, df: Callable, ddf: Callable) -> "FieldGrid":
        """Grid of an explicit analytic function; used to exercise the zero finder."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        z = x[None, :] + 1j * y[:, None]
        u = np.asarray(f(z), complex)
        du = np.asarray(df(z), complex)

        def local(p: complex):
            return complex(f(p)), complex(df(p)), complex(ddf(p)), 0.0

        return cls(x, y, u, du, np.zeros(u.shape), local=local)


def _ls_fit(a: complex, b: complex, ra: complex, rb: complex) -> tuple[complex, float]:
    """Scale r minimising |(a, b) - r (ra, rb)|, with the relative misfit."""
    den = abs(ra) ** 2 + abs(rb) ** 2
    r = (np.conj(ra) * a + np.conj(rb) * b) / den
    mis = math.hypot(abs(a - r * ra), abs(b - r * rb)) / math.hypot(abs(a), abs(b))
    return complex(r), float(mis)


def _far_point(chart: StokesChart, y: float, x_min: float, side: int) -> float:
    """Smallest X >= x_min with side*X + i y inside the shrunk left/right sector."""
    target = chart.right_index if side > 0 else chart.left_index
    X = max(x_min, 1.0)
    for _ in range(200):
        hit = region_index(chart, complex(side * X, y))
        if hit.index == target and hit.in_shrunk:
            return X
        X *= 1.15
    raise IntegrationError(f"no start point in the {'right' if side > 0 else 'left'} sector "
                           f"for row y = {y}", complex(side * X, y))


def build_grid(spec: PotentialSpec, record: EigenvalueRecord | complex, rect, resolution,
               tol: float = DEFAULT_TOL, threads: int | None = None,
               match_limit: float = MATCH_LIMIT) -> FieldGrid:
    """Sample the eigenfunction for record.lam on rect = (x_lo, x_hi, y_lo, y_hi).

    Normalised so that u(0) = 1 (u'(0) = 1 if u(0) vanishes).
    """
    lam = record.lam if isinstance(record, EigenvalueRecord) else complex(record)
    x_lo, x_hi, y_lo, y_hi = map(float, rect)
    nx, ny = map(int, resolution)
    if x_hi <= x_lo or y_hi < y_lo or nx < 2 or ny < 1:
        raise ValueError("need x_hi > x_lo, y_hi >= y_lo, nx >= 2, ny >= 1")
    x = np.linspace(x_lo, x_hi, nx)
    y = np.linspace(y_lo, y_hi, ny) if ny > 1 else np.array([y_lo])
    workers = thread_count() if threads is None else threads
    L = max(default_radius(spec, lam), max(abs(x_lo), abs(x_hi)) + 2.0)
    chart = StokesChart.for_degree(spec.n)

    def run(f, items):
        if workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(workers) as pool:
                return list(pool.map(f, items))
        return [f(v) for v in items]

    # real axis
    left_x = x[x <= 0]
    right_x = x[x > 0][::-1]

    def shoot(z0: float, targets: np.ndarray):
        t = (z0 - targets) / z0 if z0 > 0 else (targets - z0) / (-z0)
        init = asymptotic_init(spec, lam, z0)
        try:
            fin, outs = propagate_line(spec, lam, z0, 0.0, init, out_t=t, tol=tol)
        except IntegrationError as exc:
            raise IntegrationError(f"real-axis shooting from {z0}: {exc}", exc.position) from None
        return fin, outs

    (aL, bL, lL), outL = shoot(-L, left_x)
    (aR, bR, lR), outR = shoot(L, right_x)
    match = abs(aL * bR - bL * aR) / ((abs(aL) + abs(bL)) * (abs(aR) + abs(bR)))
    if match > match_limit:
        raise GridMismatchError(match, lam)
    r, _ = _ls_fit(aL, bL, aR, bR)
    # normalisation: u(0) = 1, or u'(0) = 1 when u(0) is negligible
    if abs(aL) > 1e-8 * abs(bL):
        norm, nl = 1.0 / aL, -lL
    else:
        norm, nl = 1.0 / bL, -lL
    real_u = np.empty(nx, complex)
    real_du = np.empty(nx, complex)
    real_ls = np.empty(nx)
    k = len(left_x)
    real_u[:k] = outL[0] * norm
    real_du[:k] = outL[1] * norm
    real_ls[:k] = outL[2] + nl
    real_u[k:] = (outR[0] * r * norm)[::-1]
    real_du[k:] = (outR[1] * r * norm)[::-1]
    real_ls[k:] = (outR[2] - lR + lL + nl)[::-1]
    zero_state = (aL * norm, bL * norm, lL + nl)

    U = np.empty((ny, nx), complex)
    D = np.empty((ny, nx), complex)
    S = np.empty((ny, nx))
    up = np.nonzero(y >= 0)[0]
    down = np.nonzero(y < 0)[0]
    on_axis = up[y[up] == 0]
    for i in on_axis:
        U[i], D[i], S[i] = real_u, real_du, real_ls

    pos = up[y[up] > 0]
    if len(pos):
        ytop = y[pos[-1]]
        tcol = y[pos] / ytop

        def column(j):
            st = (real_u[j], real_du[j], real_ls[j])
            try:
                _, outs = propagate_line(spec, lam, x[j], complex(x[j], ytop), st, out_t=tcol, tol=tol)
            except IntegrationError as exc:
                raise IntegrationError(f"column x = {x[j]:.6g}: {exc}", exc.position) from None
            return outs

        for j, (cu, cd, cl) in enumerate(run(column, list(range(nx)))):
            U[pos, j], D[pos, j], S[pos, j] = cu, cd, cl

    row_res = 0.0
    if len(down):
        ybot = y[down[0]]
        neg_y = y[down][::-1]
        tdown = neg_y / ybot
        try:
            _, (au, ad, al) = propagate_line(spec, lam, 0.0, complex(0.0, ybot), zero_state,
                                             out_t=tdown, tol=tol)
        except IntegrationError as exc:
            raise IntegrationError(f"imaginary-axis column: {exc}", exc.position) from None
        anchors = {float(yy): (au[m], ad[m], al[m]) for m, yy in enumerate(neg_y)}
        xmax = max(abs(x_lo), abs(x_hi)) + 1.0

        def half_row(args):
            yy, side = args
            a0, b0, l0 = anchors[float(yy)]
            X = _far_point(chart, yy, max(L, xmax), side)
            za = complex(side * X, yy)
            zb = complex(0.0, yy)
            if side > 0:
                idx = np.nonzero(x > 0)[0][::-1]
            else:
                idx = np.nonzero(x < 0)[0]
            t = (X - np.abs(x[idx])) / X
            try:
                init = asymptotic_init(spec, lam, za)
                (fa, fb, fl), (ou, od, ol) = propagate_line(spec, lam, za, zb, init, out_t=t, tol=tol)
            except (IntegrationError, ValueError) as exc:
                raise IntegrationError(f"row y = {yy:.6g}: {exc}", za) from None
            s, mis = _ls_fit(a0, b0, fa, fb)
            return idx, ou * s, od * s, ol - fl + l0, mis

        jobs = [(yy, sd) for yy in y[down] for sd in (-1, 1)]
        for (yy, _), (idx, ou, od, ol, mis) in zip(jobs, run(half_row, jobs)):
            i = int(np.nonzero(y == yy)[0][0])
            U[i, idx], D[i, idx], S[i, idx] = ou, od, ol
            row_res = max(row_res, mis)
            zc = np.nonzero(x == 0)[0]
            if len(zc):
                a0, b0, l0 = anchors[float(yy)]
                U[i, zc], D[i, zc], S[i, zc] = a0, b0, l0

    grid = FieldGrid(x, y, U, D, S, lam, spec, float(match), float(row_res))
    grid.local = _make_local(grid, spec, lam, tol)
    return grid


def _make_local(grid: FieldGrid, spec: PotentialSpec, lam: complex, tol: float) -> Local:
    def local(z: complex):
        i, j = grid.nearest(z)
        z0 = complex(grid.x[j], grid.y[i])
        st = (grid.u[i, j], grid.du[i, j], grid.log_scale[i, j])
        if z == z0:
            u, du, ls = st
        else:
            (u, du, ls), _ = propagate_line(spec, lam, z0, z, st, tol=tol)
        return u, du, (potential_eval(spec, z) - lam) * u, ls

    return local

