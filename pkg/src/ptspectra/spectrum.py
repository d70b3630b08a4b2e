"""Eigenvalues as zeros of the two-sided Wronskian miss-distance.

For a trial lambda the solutions decaying at -L and at +L are propagated to
the matching point z_m = x_m + i y_m and compared through

    W(lambda) = (u_L u_R' - u_L' u_R) / ((|u_L| + |u_L'|) (|u_R| + |u_R'|)).

The positive normalisation leaves the phase of W equal to the phase of an
analytic function of lambda (for fixed L), so the argument principle counts
eigenvalues inside a rectangle and secant iteration refines them.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ode import (DEFAULT_TOL, IntegrationError, PotentialSpec, asymptotic_init,
                  default_radius, propagate_line)

TOL_SECTOR = 1e-9
COUNT_TOL = 1e-9
MIN_BOUNDARY_W = 1e-6
CUT_FRACTIONS = (0.5618, 0.4382, 0.618, 0.382, 0.7, 0.3, 0.53, 0.47)


class BoxBoundaryError(RuntimeError):
    """|W| on the contour fell below the threshold: a zero sits (nearly) on the boundary."""

    def __init__(self, message: str, where: complex):
        super().__init__(f"{message}; perturb the box (near lambda = {where:.6g})")
        self.where = where


class RefineError(RuntimeError):
    def __init__(self, message: str, trace: list[complex]):
        super().__init__(message)
        self.trace = trace


def thread_count() -> int:
    env = os.environ.get("PT_SPECTRA_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            pass
    return cpus


def sector_bound(n: int) -> float:
    return math.pi / (2 * n + 3)


@dataclass(frozen=True)
class EigenvalueRecord:
    lam: complex
    wronskian_residual: float
    sector_margin: float
    index: int = 0
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"lambda_re": self.lam.real, "lambda_im": self.lam.imag,
                "residual": self.wronskian_residual, "sector_margin": self.sector_margin,
                "index": self.index, "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d: dict) -> "EigenvalueRecord":
        return cls(complex(d["lambda_re"], d["lambda_im"]), float(d["residual"]),
                   float(d["sector_margin"]), int(d.get("index", 0)), int(d.get("iterations", 0)))


@dataclass(frozen=True)
class SearchBox:
    """Closed rectangle lo.real <= Re <= hi.real, lo.imag <= Im <= hi.imag."""

    lo: complex
    hi: complex
    density: int = 24

    def __post_init__(self):
        lo, hi = complex(self.lo), complex(self.hi)
        if hi.real < lo.real or hi.imag < lo.imag:
            raise ValueError("box corners must be ordered (lo, hi)")
        if lo.real < 0 < hi.real and lo.imag < 0 < hi.imag:
            raise ValueError("the box interior must not contain lambda = 0")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi.real - self.lo.real

    @property
    def height(self) -> float:
        return self.hi.imag - self.lo.imag

    @property
    def center(self) -> complex:
        return (self.lo + self.hi) / 2

    @property
    def degenerate(self) -> bool:
        return self.width <= 0 or self.height <= 0

    def corners(self) -> list[complex]:
        lo, hi = self.lo, self.hi
        return [lo, complex(hi.real, lo.imag), hi, complex(lo.real, hi.imag)]

    def contains(self, lam: complex, slack: float = 0.0) -> bool:
        return (self.lo.real - slack <= lam.real <= self.hi.real + slack
                and self.lo.imag - slack <= lam.imag <= self.hi.imag + slack)

    def max_abs(self) -> float:
        return max(abs(c) for c in self.corners())

    def split(self, frac: float) -> tuple["SearchBox", "SearchBox"]:
        lo, hi = self.lo, self.hi
        if self.width >= self.height:
            c = lo.real + frac * self.width
            return (SearchBox(lo, complex(c, hi.imag), self.density),
                    SearchBox(complex(c, lo.imag), hi, self.density))
        c = lo.imag + frac * self.height
        return (SearchBox(lo, complex(hi.real, c), self.density),
                SearchBox(complex(lo.real, c), hi, self.density))


def turning_points(spec: PotentialSpec, level: float) -> np.ndarray:
    """Roots of V(z) = level."""
    d = 2 * spec.n + 1
    c = np.zeros(d + 1, complex)  # ascending powers of w = z - xi
    c[0::2] = spec.a
    c[1::2] = 1j * spec.g * np.asarray(spec.b)
    c[0] -= level
    return np.roots(c[::-1]) + spec.xi


def match_height(spec: PotentialSpec, lam_ref: complex, factor: float = 0.75) -> float:
    """factor times the mean height of the rightmost and leftmost turning points at |lam_ref|."""
    tp = turning_points(spec, abs(lam_ref))
    right = tp[np.argmax(tp.real)]
    left = tp[np.argmin(tp.real)]
    return float(factor * 0.5 * (right.imag + left.imag))


class MissDistance:
    """W(lambda) for a fixed spec, radius L, tolerance and matching point, with a cache.

    y_match defaults to match_height(spec, lam_ref); both stay fixed for the
    lifetime of the object so W is a single analytic function of lambda.
    """

    def __init__(self, spec: PotentialSpec, L: float, tol: float = DEFAULT_TOL,
                 x_match: float = 0.0, threads: int | None = None,
                 y_match: float | None = None, lam_ref: complex = 0j):
        if not -L < x_match < L:
            raise ValueError("matching point must lie inside (-L, L)")
        self.spec = spec
        self.L = float(L)
        self.tol = float(tol)
        self.x_match = float(x_match)
        if y_match is None:
            y_match = match_height(spec, lam_ref)
        self.y_match = float(y_match)
        self.z_match = complex(self.x_match, self.y_match)
        self.threads = thread_count() if threads is None else threads
        self._cache: dict[complex, complex] = {}

    def sides(self, lam: complex):
        """Mantissa states (u, u', log_scale) of the left and right solutions at z_m."""
        lam = complex(lam)
        out = []
        for z0 in (-self.L, self.L):
            try:
                init = asymptotic_init(self.spec, lam, z0)
                fin, _ = propagate_line(self.spec, lam, z0, self.z_match, init, tol=self.tol)
            except (IntegrationError, ValueError) as exc:
                raise type(exc)(f"lambda = {lam:.8g}: {exc}") from None
            out.append(fin)
        return out

    def __call__(self, lam: complex) -> complex:
        lam = complex(lam)
        w = self._cache.get(lam)
        if w is None:
            (ul, dl, _), (ur, dr, _) = self.sides(lam)
            w = (ul * dr - dl * ur) / ((abs(ul) + abs(dl)) * (abs(ur) + abs(dr)))
            self._cache[lam] = w
        return w

    def many(self, lams) -> np.ndarray:
        lams = [complex(v) for v in lams]
        todo = [v for v in dict.fromkeys(lams) if v not in self._cache]
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                for v, w in zip(todo, pool.map(self, todo)):
                    self._cache[v] = w
        else:
            for v in todo:
                self(v)
        return np.array([self._cache[v] for v in lams])


def wronskian_miss(spec: PotentialSpec, lam: complex, L: float | None = None,
                   tol: float = DEFAULT_TOL, x_match: float = 0.0,
                   y_match: float | None = None) -> complex:
    """Normalised Wronskian of the left/right decaying solutions at x_match + i y_match."""
    if L is None:
        L = default_radius(spec, lam)
    return MissDistance(spec, L, tol, x_match, threads=1, y_match=y_match, lam_ref=lam)(lam)


@dataclass
class ContourResult:
    winding: int
    zero_sum: complex
    min_abs: float
    samples: int
    raw_winding: float


def _edge_samples(miss: MissDistance, a: complex, b: complex, density: int,
                  max_depth: int = 14, max_jump: float = math.pi / 4):
    """Points and W values along [a, b], bisected until each phase step is below max_jump."""
    flip = (a.real, a.imag) > (b.real, b.imag)
    if flip:
        a, b = b, a
    ts = list(np.linspace(0.0, 1.0, density + 1))
    pts = [a + t * (b - a) for t in ts]
    pts[-1] = b
    vals = list(miss.many(pts))
    depth = {i: 0 for i in range(len(pts))}
    i = 0
    while i < len(pts) - 1:
        d = abs(cmath.phase(vals[i + 1] / vals[i])) if vals[i] != 0 and vals[i + 1] != 0 else math.pi
        lvl = max(depth.get(i, 0), 0)
        if d > max_jump and lvl < max_depth:
            mid = (pts[i] + pts[i + 1]) / 2
            pts.insert(i + 1, mid)
            vals.insert(i + 1, miss(mid))
            depth = _shift_depths(depth, i, lvl + 1)
            continue
        i += 1
    if flip:
        pts.reverse()
        vals.reverse()
    return pts, vals


def _shift_depths(depth: dict, i: int, lvl: int) -> dict:
    new = {}
    for k, v in depth.items():
        new[k + 1 if k > i else k] = v
    new[i] = lvl
    new[i + 1] = lvl
    return new


def contour(miss: MissDistance, box: SearchBox, min_abs: float = MIN_BOUNDARY_W) -> ContourResult:
    """Winding number of W around the box boundary (counter-clockwise)."""
    if box.degenerate:
        return ContourResult(0, 0j, math.inf, 0, 0.0)
    cs = box.corners()
    pts: list[complex] = []
    vals: list[complex] = []
    for a, b in zip(cs, cs[1:] + cs[:1]):
        p, v = _edge_samples(miss, a, b, box.density)
        pts.extend(p[:-1])
        vals.extend(v[:-1])
    pts.append(pts[0])
    vals.append(vals[0])
    mags = np.abs(vals)
    k = int(np.argmin(mags))
    if mags[k] < min_abs:
        raise BoxBoundaryError(f"|W| = {mags[k]:.2e} on the contour", pts[k])
    total = 0.0
    zsum = 0j
    for i in range(len(pts) - 1):
        dlog = cmath.log(vals[i + 1] / vals[i])
        total += dlog.imag
        zsum += 0.5 * (pts[i] + pts[i + 1]) * dlog
    raw = total / (2 * math.pi)
    wind = int(round(raw))
    if abs(raw - wind) > 0.05:
        raise BoxBoundaryError(f"winding {raw:.3f} is not close to an integer", pts[k])
    return ContourResult(wind, zsum / (2j * math.pi), float(mags[k]), len(pts) - 1, raw)


def count_in_box(spec: PotentialSpec, box: SearchBox, L: float | None = None,
                 tol: float = COUNT_TOL, min_abs: float = MIN_BOUNDARY_W) -> int:
    """Number of eigenvalues inside the box by the argument principle on W."""
    if box.degenerate:
        return 0
    ref = box.max_abs()
    if L is None:
        L = default_radius(spec, ref)
    return contour(MissDistance(spec, L, tol, lam_ref=ref), box, min_abs).winding


def sector_margin(lam: complex, n: int) -> float:
    return sector_bound(n) - abs(cmath.phase(lam))


def refine(spec: PotentialSpec, lam0: complex, L: float | None = None,
           tol: float = DEFAULT_TOL, x_match: float = 0.0, max_iter: int = 60,
           step: complex | None = None, miss: MissDistance | None = None,
           y_match: float | None = None) -> EigenvalueRecord:
    """Secant iteration on W from lam0, falling back to Muller steps when secant stalls."""
    lam0 = complex(lam0)
    if miss is None:
        if L is None:
            L = default_radius(spec, lam0)
        miss = MissDistance(spec, L, tol, x_match, threads=1, y_match=y_match, lam_ref=lam0)
    h = step if step is not None else 1e-4 * (1 + abs(lam0))
    xs = [lam0, lam0 + h]
    ws = [miss(xs[0]), miss(xs[1])]
    trace = list(xs)
    max_jump = 0.5 * (1 + abs(lam0))
    stall = 0
    best = min(range(2), key=lambda i: abs(ws[i]))
    for it in range(max_iter):
        x1, x0 = xs[-1], xs[-2]
        w1, w0 = ws[-1], ws[-2]
        den = w1 - w0
        if den == 0:
            nxt = None
        else:
            nxt = x1 - w1 * (x1 - x0) / den
        if (nxt is None or not np.isfinite(nxt.real) or abs(nxt - x1) > max_jump) and len(xs) >= 3:
            nxt = _muller(xs[-3:], ws[-3:])
        if nxt is None or not (np.isfinite(nxt.real) and np.isfinite(nxt.imag)):
            raise RefineError("secant and Muller steps both failed", trace)
        d = nxt - x1
        if abs(d) > max_jump:
            nxt = x1 + d / abs(d) * max_jump
        try:
            wn = miss(nxt)
        except (IntegrationError, ValueError) as exc:
            raise RefineError(f"miss-distance evaluation failed: {exc}", trace) from None
        xs.append(nxt)
        ws.append(wn)
        trace.append(nxt)
        if abs(wn) < abs(ws[best]):
            best = len(xs) - 1
        if abs(nxt - x1) <= 1e-12 * (1 + abs(nxt)):
            break
        # rounding floor: W already tiny and the iterate no longer improves
        if abs(wn) < 1e-11 and abs(nxt - x1) <= 1e-9 * (1 + abs(nxt)):
            stall += 1
            if stall >= 3:
                break
    else:
        raise RefineError(f"no convergence in {max_iter} iterations from {lam0:.6g}", trace)
    lam = xs[best]
    return EigenvalueRecord(lam, float(abs(ws[best])), sector_margin(lam, spec.n),
                            iterations=len(xs) - 2)


def _muller(xs, ws):
    x0, x1, x2 = xs
    w0, w1, w2 = ws
    try:
        h1, h2 = x1 - x0, x2 - x1
        d1, d2 = (w1 - w0) / h1, (w2 - w1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        disc = cmath.sqrt(b * b - 4 * a * w2)
        den = b + disc if abs(b + disc) > abs(b - disc) else b - disc
        if den == 0:
            return None
        return x2 - 2 * w2 / den
    except ZeroDivisionError:
        return None


@dataclass
class SectorReport:
    abs_arg: float
    bound: float
    margin: float
    violated: bool


def verify_sector(record: EigenvalueRecord | complex, n: int, tol: float = TOL_SECTOR) -> SectorReport:
    lam = record.lam if isinstance(record, EigenvalueRecord) else complex(record)
    a = abs(cmath.phase(lam))
    b = sector_bound(n)
    return SectorReport(a, b, b - a, bool(a > b + tol or lam.real <= 0))


def sufficient_coefficients(n: int) -> np.ndarray:
    """Coefficient of b_k^2 for k = 0 .. n-1 at theta = pi / (2 (2n+3))."""
    th = math.pi / (2 * (2 * n + 3))
    k = np.arange(n)
    return (np.sin((2 * n - 2 * k) * th) ** 2
            / (np.cos((2 * n - 2 * k + 1) * th) * np.cos((2 * n - 2 * k - 1) * th)))


def _selector(n: int, k: int) -> float:
    if n == 1 and k == 0:
        return 4.0
    if n > 1 and k in (0, n - 1):
        return 2.0
    return 1.0


@dataclass
class SufficientReport:
    rows: list[dict] = field(default_factory=list)
    holds: bool = True


def sufficient_condition(spec: PotentialSpec) -> SufficientReport:
    """Check c_k b_k^2 <= {4, 2, 1} a_k a_{k+1} for every k < n."""
    a, b, n = spec.a, spec.b, spec.n
    if any(v < 0 for v in a):
        raise ValueError("the criterion assumes nonnegative coefficients a_k")
    if b[-1] == 0:
        raise ValueError("the criterion assumes b_n != 0")
    coeffs = sufficient_coefficients(n)
    rep = SufficientReport()
    for k in range(n):
        lhs = float(coeffs[k] * b[k] ** 2)
        rhs = _selector(n, k) * a[k] * a[k + 1]
        ok = lhs <= rhs
        rep.rows.append({"k": k, "coefficient": float(coeffs[k]), "lhs": lhs, "rhs": rhs, "ok": ok})
        rep.holds &= ok
    return rep


def sign_condition_check(spec: PotentialSpec, n_r: int = 801, n_theta: int = 201) -> float:
    """Grid minimum of Re[e^{-i(2n+1) theta} P(r^2 e^{2 i theta})], |theta| <= pi/(2(2n+3)).

    Beyond the radius where a_n r^{2n} cos(theta) dominates the lower terms the
    expression keeps the sign of a_n, so the grid stops there.
    """
    n = spec.n
    a = np.array(spec.a)
    if not np.any(a):
        return 0.0
    tmax = math.pi / (2 * (2 * n + 3))
    if a[-1] <= 0:
        return -math.inf
    lower = np.abs(a[:-1]).sum() if n > 0 else 0.0
    r_max = math.sqrt(1.0 + 2.0 * lower / (a[-1] * math.cos(tmax)))
    r = np.linspace(0.0, r_max, n_r)[:, None]
    th = np.linspace(-tmax, tmax, n_theta)[None, :]
    s = r ** 2 * np.exp(2j * th)
    p = np.zeros_like(s)
    for c in a[::-1]:
        p = p * s + c
    vals = np.real(np.exp(-1j * (2 * n + 1) * th) * p)
    return float(vals.min())


def remark_critical_c() -> float:
    """sqrt((16/3) cos(pi/18) cos(5 pi/18)): largest |c| keeping z^3 + c z^2 + z admissible."""
    return math.sqrt(16.0 / 3.0 * math.cos(math.pi / 18) * math.cos(5 * math.pi / 18))


def shift_cubic(a: float) -> PotentialSpec:
    """Spec of v(z) = u(z + a i) for u'' = i z^3 u - lambda u.

    V(z) = i (z + a i)^3 = (a^3 - 3 a z^2) + i z (z^2 - 3 a^2), i.e.
    P(s) = a^3 - 3 a s and Q(s) = s - 3 a^2 in V = P(z^2) + i z Q(z^2).
    """
    a = float(a)
    return PotentialSpec(1, (a ** 3, -3.0 * a), (-3.0 * a * a, 1.0))


def _box_outside_sector(box: SearchBox, n: int, slack: float) -> bool:
    """True when the box misses the closed cone |arg lambda| <= pi/(2n+3) + slack."""
    bound = sector_bound(n) + slack
    if box.contains(0j):
        return False
    for c in box.corners():
        if c != 0 and abs(cmath.phase(c)) <= bound:
            return False
    # cone edges crossing the box
    for sgn in (1, -1):
        d = cmath.exp(1j * sgn * bound)
        for a, b in zip(box.corners(), box.corners()[1:] + box.corners()[:1]):
            if _ray_hits_segment(d, a, b):
                return False
    return True


def _ray_hits_segment(d: complex, a: complex, b: complex) -> bool:
    # solve t d = a + s (b - a), t >= 0, 0 <= s <= 1
    e = b - a
    den = d.real * (-e.imag) - d.imag * (-e.real)
    if den == 0:
        return False
    t = (a.real * (-e.imag) - a.imag * (-e.real)) / den
    s = (d.real * a.imag - d.imag * a.real) / den
    return t >= 0 and 0 <= s <= 1


@dataclass
class ScanResult:
    records: list[EigenvalueRecord]
    total_count: int
    L: float
    failures: list[str] = field(default_factory=list)
    boxes: int = 0


def scan(spec: PotentialSpec, box: SearchBox, L: float | None = None,
         count_tol: float = COUNT_TOL, refine_tol: float = DEFAULT_TOL,
         sector_prune: bool = True, slack: float = 0.05,
         max_eigenvalues: int | None = None, threads: int | None = None) -> ScanResult:
    """All eigenvalues inside the box: bisect until each piece holds one zero, then refine.

    With sector_prune, a child box lying wholly outside the sector (plus
    slack) is not contoured; its count follows from additivity, and a
    nonzero count there is still searched, so the bound is tested rather than
    assumed.
    """
    ref = box.max_abs()
    if L is None:
        L = default_radius(spec, ref)
    counter = MissDistance(spec, L, count_tol, threads=threads, lam_ref=ref)
    refiner = MissDistance(spec, L, refine_tol, threads=1, y_match=counter.y_match)
    result = ScanResult([], 0, L)
    top = contour(counter, box)
    result.total_count = top.winding
    stack = [(box, top)]
    found: list[EigenvalueRecord] = []
    while stack:
        b, info = stack.pop()
        result.boxes += 1
        if info.winding == 0:
            continue
        if info.winding == 1:
            seed = info.zero_sum if b.contains(info.zero_sum) else b.center
            try:
                rec = refine(spec, seed, miss=refiner)
                if b.contains(rec.lam, slack=1e-9 * (1 + abs(rec.lam))):
                    found.append(rec)
                    continue
            except RefineError as exc:
                result.failures.append(str(exc))
        if max(b.width, b.height) < 1e-6:
            result.failures.append(f"box around {b.center:.6g} shrank without isolating a zero")
            continue
        children = None
        for frac in CUT_FRACTIONS:
            c1, c2 = b.split(frac)
            try:
                out1 = sector_prune and _box_outside_sector(c1, spec.n, slack)
                out2 = sector_prune and _box_outside_sector(c2, spec.n, slack)
                if out1 and not out2:
                    i2 = contour(counter, c2)
                    i1 = ContourResult(info.winding - i2.winding, 0j, math.inf, 0, 0.0)
                elif out2 and not out1:
                    i1 = contour(counter, c1)
                    i2 = ContourResult(info.winding - i1.winding, 0j, math.inf, 0, 0.0)
                else:
                    i1, i2 = contour(counter, c1), contour(counter, c2)
            except BoxBoundaryError:
                continue
            if i1.winding + i2.winding != info.winding:
                continue
            children = [(c1, i1), (c2, i2)]
            break
        if children is None:
            result.failures.append(f"could not split box {b.lo:.6g}..{b.hi:.6g}")
            continue
        for c, i in children:
            if i.winding > 0 and i.samples == 0:
                # pruned child with eigenvalues: contour it after all
                i = contour(counter, c)
            stack.append((c, i))
    found.sort(key=lambda r: (r.lam.real, r.lam.imag))
    by_abs = sorted(range(len(found)), key=lambda i: abs(found[i].lam))
    recs = list(found)
    for rank, i in enumerate(by_abs):
        r = recs[i]
        recs[i] = EigenvalueRecord(r.lam, r.wronskian_residual, r.sector_margin, rank, r.iterations)
    if max_eigenvalues is not None:
        keep = {i for i in by_abs[:max_eigenvalues]}
        recs = [r for i, r in enumerate(recs) if i in keep]
    result.records = recs
    return result


def conjugation_defect(records: Sequence[EigenvalueRecord | complex]) -> float:
    """max over lambda of min_mu |conj(lambda) - mu| / |lambda|; 0 for a set closed under conjugation."""
    lams = [r.lam if isinstance(r, EigenvalueRecord) else complex(r) for r in records]
    worst = 0.0
    for lam in lams:
        worst = max(worst, min(abs(lam.conjugate() - mu) for mu in lams) / abs(lam))
    return worst
