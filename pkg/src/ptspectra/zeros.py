"""Zeros of u and u' inside a FieldGrid by cell winding numbers and Newton polishing."""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .grid import FieldGrid
from .ode import IntegrationError, propagate_line
from .stokes import ALabel, BLabel, classify_cubic_regions

log = logging.getLogger(__name__)

REFINE_LEVELS = (8, 16, 32, 64)
MERGE_RADIUS = 1e-8


class ZeroKind(str, Enum):
    U = "zero_of_u"
    DU = "zero_of_du"


class ZeroFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ZeroRecord:
    z: complex
    winding: int
    which: ZeroKind
    a_region: ALabel | None = None
    b_region: BLabel | None = None

    def to_dict(self) -> dict:
        return {"re": self.z.real, "im": self.z.imag, "winding": self.winding,
                "which": self.which.value,
                "a_region": None if self.a_region is None else self.a_region.value,
                "b_region": None if self.b_region is None else self.b_region.value}


def _values_along(grid: FieldGrid, which: ZeroKind, node: tuple[int, int],
                  corners: list[complex], m: int) -> np.ndarray:
    """The chosen function at m + 1 points per straight leg of the polyline through corners.

    corners[0] must be the grid node ``node``.
    """
    pts = [corners[0]]
    for a, b in zip(corners[:-1], corners[1:]):
        pts += [a + (b - a) * k / m for k in range(1, m + 1)]
    if grid.spec is None:
        vals = [grid.evaluate(p)[:2] for p in pts]
        return np.array([v[0] if which is ZeroKind.U else v[1] for v in vals])
    i, j = node
    st = (grid.u[i, j], grid.du[i, j], grid.log_scale[i, j])
    vals = [st[0] if which is ZeroKind.U else st[1]]
    t = np.arange(1, m + 1) / m
    for a, b in zip(corners[:-1], corners[1:]):
        # log rescaling between outputs is real, so mantissa phases are exact
        st, (ou, od, _) = propagate_line(grid.spec, grid.lam, a, b, st, out_t=t)
        vals.extend(ou if which is ZeroKind.U else od)
    return np.array(vals)


def _increments(vals: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.angle(vals[1:] / vals[:-1])


def _edge_increment(grid: FieldGrid, which: ZeroKind, node, za: complex, zb: complex,
                    normal: complex) -> float:
    best = None
    for m in REFINE_LEVELS:
        inc = _increments(_values_along(grid, which, node, [za, zb], m))
        best = inc
        if np.all(np.isfinite(inc)) and np.max(np.abs(inc)) <= math.pi / 2:
            return float(inc.sum())
    if np.all(np.isfinite(best)) and np.max(np.abs(best)) < math.pi - 1e-3:
        return float(best.sum())
    # a zero on (or extremely near) the edge: detour to the +normal side
    mid = 0.5 * (za + zb) + 0.25 * abs(zb - za) * normal
    inc = _increments(_values_along(grid, which, node, [za, mid, zb], REFINE_LEVELS[-1]))
    if not np.all(np.isfinite(inc)) or np.max(np.abs(inc)) > math.pi - 1e-3:
        raise ZeroFindingError(f"phase jump of {which.value} along edge {za:.6g} -> {zb:.6g} "
                               "could not be resolved")
    return float(inc.sum())


def edge_phases(grid: FieldGrid, which: ZeroKind = ZeroKind.U, threshold: float = math.pi / 4):
    """Phase increments along horizontal (ny, nx-1) and vertical (ny-1, nx) grid edges."""
    f = grid.u if which is ZeroKind.U else grid.du
    other = grid.du if which is ZeroKind.U else grid.u
    hit = np.abs(f) <= 1e-14 * np.abs(other)
    if np.any(hit):
        i, j = np.argwhere(hit)[0]
        raise ZeroFindingError(f"{which.value} vanishes at grid node "
                               f"{complex(grid.x[j], grid.y[i]):.6g}; shift the grid")
    with np.errstate(invalid="ignore"):
        dh = np.angle(f[:, 1:] / f[:, :-1])
        dv = np.angle(f[1:, :] / f[:-1, :])
    x, y = grid.x, grid.y
    for i, j in zip(*np.nonzero(~(np.abs(dh) <= threshold))):
        dh[i, j] = _edge_increment(grid, which, (i, j), complex(x[j], y[i]), complex(x[j + 1], y[i]), 1j)
    for i, j in zip(*np.nonzero(~(np.abs(dv) <= threshold))):
        dv[i, j] = _edge_increment(grid, which, (i, j), complex(x[j], y[i]), complex(x[j], y[i + 1]), 1.0)
    return dh, dv


def cell_windings(grid: FieldGrid, which: ZeroKind = ZeroKind.U) -> np.ndarray:
    """Winding number of the chosen function around every grid cell, shape (ny-1, nx-1)."""
    if grid.nx < 2 or grid.ny < 2:
        return np.zeros((max(grid.ny - 1, 0), max(grid.nx - 1, 0)), int)
    dh, dv = edge_phases(grid, which)
    total = dh[:-1, :] + dv[:, 1:] - dh[1:, :] - dv[:, :-1]
    w = total / (2 * math.pi)
    r = np.rint(w)
    if np.max(np.abs(w - r)) > 1e-6:
        raise ZeroFindingError("cell phase sums are not integer multiples of 2 pi")
    return r.astype(int)


def newton(grid: FieldGrid, z0: complex, which: ZeroKind, max_iter: int = 60,
           radius: float | None = None) -> complex | None:
    """Newton on u (derivative u') or on u' (derivative u'' = (V - lambda) u)."""
    z = complex(z0)
    if radius is None:
        radius = 4 * math.hypot(grid.dx, grid.dy)
    for _ in range(max_iter):
        try:
            u, du, ddu, _ = grid.evaluate(z)
        except IntegrationError:
            return None
        f, fp = (u, du) if which is ZeroKind.U else (du, ddu)
        if fp == 0:
            return None
        step = f / fp
        z -= step
        if abs(z - z0) > radius or not cmath.isfinite(z):
            return None
        if abs(step) <= 1e-13 * (1 + abs(z)):
            return z
    return None


def _region_tags(grid: FieldGrid, z: complex):
    spec = grid.spec
    if spec is None or spec.n != 1 or spec.xi != 0 or grid.lam.real <= 0:
        return None, None
    if tuple(spec.a) != (0.0, 0.0) or tuple(spec.b) != (0.0, 1.0) or spec.g != 1.0:
        return None, None
    lab = classify_cubic_regions(z, grid.lam)
    return lab.a_region, lab.b_region


def _kind(which) -> ZeroKind:
    if isinstance(which, ZeroKind):
        return which
    aliases = {"u": ZeroKind.U, "du": ZeroKind.DU, "zero_of_u": ZeroKind.U, "zero_of_du": ZeroKind.DU}
    try:
        return aliases[str(which)]
    except KeyError:
        raise ValueError(f"unknown zero kind {which!r}") from None


def find_zeros(grid: FieldGrid, which: ZeroKind | str = ZeroKind.U, strict: bool = True) -> list[ZeroRecord]:
    """All zeros of u (or u') inside the grid rectangle, sorted by (Im z, Re z)."""
    which = _kind(which)
    w = cell_windings(grid, which)
    found: list[tuple[complex, int]] = []
    dx, dy = grid.dx, grid.dy
    for i, j in zip(*np.nonzero(w)):
        wind = int(w[i, j])
        x0, x1 = grid.x[j], grid.x[j + 1]
        y0, y1 = grid.y[i], grid.y[i + 1]
        slack = 1e-9 * (1 + abs(x0) + abs(y0)) + 1e-6 * max(dx, dy)

        def inside(z):
            return x0 - slack <= z.real <= x1 + slack and y0 - slack <= z.imag <= y1 + slack

        seeds = [complex((x0 + x1) / 2, (y0 + y1) / 2)]
        for fx in (0.25, 0.75):
            for fy in (0.25, 0.75):
                seeds.append(complex(x0 + fx * dx, y0 + fy * dy))
        seeds += [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
        local: list[complex] = []
        for s in seeds:
            z = newton(grid, s, which)
            if z is not None and inside(z) and all(abs(z - q) > MERGE_RADIUS for q in local):
                local.append(z)
            if len(local) >= abs(wind):
                break
        if not local:
            msg = f"cell [{x0:.6g},{x1:.6g}]x[{y0:.6g},{y1:.6g}] has winding {wind} but Newton found no zero"
            if strict:
                raise ZeroFindingError(msg)
            log.warning(msg)
            continue
        if len(local) == 1:
            found.append((local[0], abs(wind)))
        else:
            found.extend((z, 1) for z in local)
    merged: list[tuple[complex, int]] = []
    for z, k in found:
        if all(abs(z - q) > MERGE_RADIUS for q, _ in merged):
            merged.append((z, k))
    merged.sort(key=lambda t: (t[0].imag, t[0].real))
    out = []
    for z, k in merged:
        a, b = _region_tags(grid, z)
        out.append(ZeroRecord(z, k, which, a, b))
    return out
