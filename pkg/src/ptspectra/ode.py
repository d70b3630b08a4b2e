"""Potentials V(z) = P((z-xi)^2) + i g (z-xi) Q((z-xi)^2) and propagation of u'' = (V - lambda) u.

Solutions are carried as a mantissa pair (u, u') together with a real
log_scale, so the true solution is (u, u') * exp(log_scale).  Every
renormalisation divides both components by the same positive number and
therefore never changes the ratio u'/u.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernel
from .stokes import critical_angles_for

DEFAULT_TOL = 1e-12
DEFAULT_RESCALE_LOG = 30.0
DEFAULT_MAX_STEPS = 5_000_000
# the controller holds each step's error to this fraction of tol, so that
# errors accumulated over a whole path stay within small multiples of tol
LOCAL_SAFETY = 0.1


class IntegrationError(RuntimeError):
    """Propagation failed; ``position`` is where the integrator gave up."""

    def __init__(self, message: str, position: complex | None = None):
        super().__init__(message if position is None else f"{message} at z = {position:.6g}")
        self.position = position


@dataclass(frozen=True)
class PotentialSpec:
    """Coefficients of P(s) = sum a_k s^k and Q(s) = sum b_k s^k, scaling g and shift xi.

    ``strict=False`` lifts the requirement b_n != 0; it exists for closed-form
    test configurations such as the harmonic oscillator and is never produced
    by the public constructors.
    """

    n: int
    a: tuple[float, ...]
    b: tuple[float, ...]
    g: float = 1.0
    xi: complex = 0j
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        object.__setattr__(self, "xi", complex(self.xi))
        object.__setattr__(self, "g", float(self.g))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if len(self.a) != self.n + 1 or len(self.b) != self.n + 1:
            raise ValueError(f"need n+1 = {self.n + 1} coefficients for both P and Q")
        if self.strict:
            if self.b[-1] == 0.0:
                raise ValueError("b_n must be nonzero")
            if self.g == 0.0:
                raise ValueError("g must be nonzero")

    @classmethod
    def canonical(cls, n: int, a: Sequence[float] | None = None, g: float = 1.0,
                  xi: complex = 0j) -> "PotentialSpec":
        """P(x^2) - g (ix)^(2n+1); the odd part is i x b_n x^(2n) with b_n = (-1)^(n+1)."""
        a = tuple(a) if a is not None else (0.0,) * (n + 1)
        b = (0.0,) * n + (float((-1) ** (n + 1)),)
        return cls(n, a, b, g, xi)

    @classmethod
    def test_only(cls, a: Sequence[float], b: Sequence[float] | None = None,
                  n: int | None = None) -> "PotentialSpec":
        """Unvalidated spec for closed-form checks (V = 0, V = x^2, ...)."""
        if n is None:
            n = max(len(a), len(b or ())) - 1
            n = max(n, 1)
        a = tuple(a) + (0.0,) * (n + 1 - len(a))
        b = tuple(b or ()) + (0.0,) * (n + 1 - len(b or ()))
        return cls(n, a, b, 1.0, 0j, strict=False)

    @property
    def kernel_args(self) -> tuple[np.ndarray, np.ndarray, complex]:
        pa = np.array(self.a, dtype=np.complex128)
        qc = 1j * self.g * np.array(self.b, dtype=np.complex128)
        return pa, qc, self.xi

    def leading_term(self) -> tuple[int, complex]:
        """(degree, coefficient) of the dominant monomial of V at infinity."""
        if self.b[-1] != 0.0 and self.g != 0.0:
            return 2 * self.n + 1, 1j * self.g * self.b[-1]
        for k in range(self.n, -1, -1):
            if self.a[k] != 0.0:
                return 2 * k, complex(self.a[k])
            if self.b[k] != 0.0 and self.g != 0.0:
                return 2 * k + 1, 1j * self.g * self.b[k]
        return 0, 0j

    def critical_angles(self) -> np.ndarray:
        deg, lead = self.leading_term()
        return critical_angles_for(deg, lead)

    def is_pt_symmetric(self) -> bool:
        return self.xi.real == 0.0


def potential_eval(spec: PotentialSpec, z):
    """V(z) for scalar or array z."""
    pa, qc, xi = spec.kernel_args
    zz = np.asarray(z, dtype=np.complex128)
    out = _kernel.potential_many(pa, qc, xi, zz.ravel()).reshape(zz.shape)
    return complex(out) if np.ndim(z) == 0 else out


def potential_derivative(spec: PotentialSpec, z: complex) -> complex:
    pa, qc, xi = spec.kernel_args
    return complex(_kernel.potential_derivative(pa, qc, xi, complex(z)))


@dataclass(frozen=True)
class ComplexPath:
    """Polyline through complex waypoints, traversed from first to last."""

    waypoints: tuple[complex, ...]

    def __post_init__(self):
        pts = tuple(complex(w) for w in self.waypoints)
        object.__setattr__(self, "waypoints", pts)
        if len(pts) < 2:
            raise ValueError("a path needs at least two waypoints")
        for p, q in zip(pts, pts[1:]):
            if p == q:
                raise ValueError("consecutive waypoints must be distinct")

    @classmethod
    def segment(cls, a: complex, b: complex) -> "ComplexPath":
        return cls((a, b))

    @property
    def start(self) -> complex:
        return self.waypoints[0]

    @property
    def end(self) -> complex:
        return self.waypoints[-1]

    def reversed(self) -> "ComplexPath":
        return ComplexPath(self.waypoints[::-1])

    @property
    def length(self) -> float:
        return float(sum(abs(q - p) for p, q in zip(self.waypoints, self.waypoints[1:])))


@dataclass(frozen=True)
class SolutionState:
    z: complex
    u: complex
    du: complex
    log_scale: float = 0.0

    def __post_init__(self):
        if self.u == 0 and self.du == 0:
            raise ValueError("(u, u') = (0, 0) is not a nontrivial solution state")

    @property
    def value(self) -> complex:
        return self.u * math.exp(self.log_scale)

    @property
    def derivative(self) -> complex:
        return self.du * math.exp(self.log_scale)

    @property
    def log_derivative(self) -> complex:
        return self.du / self.u

    def normalized(self) -> "SolutionState":
        m = max(abs(self.u), abs(self.du))
        return SolutionState(self.z, self.u / m, self.du / m, self.log_scale + math.log(m))


@dataclass
class DenseSamples:
    """States recorded along a path; true values are (u, du) * exp(log_scale)."""

    z: np.ndarray
    u: np.ndarray
    du: np.ndarray
    log_scale: np.ndarray

    def rows(self):
        for k in range(len(self.z)):
            yield (self.z[k].real, self.z[k].imag, self.u[k].real, self.u[k].imag,
                   self.du[k].real, self.du[k].imag, self.log_scale[k])

    def to_csv(self, path) -> None:
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_z", "im_z", "re_u", "im_u", "re_du", "im_du", "log_scale"])
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


@dataclass
class IntegrationResult:
    state: SolutionState
    samples: DenseSamples | None = None
    steps: int = 0
    rejected: int = 0


def default_radius(spec: PotentialSpec, lam: complex, floor: float | None = None,
                   min_ratio: float = 100.0) -> float:
    """Start radius for asymptotic initialisation.

    max(floor, 2 (40 + |lambda|)^(2/(2n+3))); the floor defaults to 12 for the
    cubic and to 0 for higher n, where 12 would demand needless steps.  The
    radius is then enlarged until |V(+-r)| >= min_ratio |lambda|, which the
    formula alone does not guarantee once |lambda| exceeds about 30.
    """
    if floor is None:
        floor = 12.0 if spec.n == 1 else 0.0
    r = max(floor, 2.0 * (40.0 + abs(lam)) ** (2.0 / (2 * spec.n + 3)))
    # grow until both endpoints satisfy the |V| >= min_ratio |lambda| requirement
    while min(abs(potential_eval(spec, r)), abs(potential_eval(spec, -r))) < min_ratio * abs(lam):
        r *= 1.05
    return r


def _angle_distance(phi: float, thetas: np.ndarray) -> float:
    d = np.abs(np.mod(phi - thetas + math.pi, 2 * math.pi) - math.pi)
    return float(d.min())


def asymptotic_init(spec: PotentialSpec, lam: complex, z0: complex, mode: str = "decaying",
                    min_ratio: float = 100.0, epsilon: float | None = None) -> SolutionState:
    """Initial state u = 1, u' = u'/u from the WKB form of the solution at z0.

    The logarithmic derivative is +-sqrt(V - lambda) - V'/(4 (V - lambda)),
    whose leading terms are +-i (i z)^((2n+1)/2) - (2n+1)/(4z) for the
    canonical potential.  The sign is fixed by requiring the solution to
    decay (mode="decaying") or grow (mode="growing") along the outward radial
    direction, which avoids tracking branches of fractional powers.
    """
    if mode not in ("decaying", "growing"):
        raise ValueError(f"unknown mode {mode!r}")
    z0 = complex(z0)
    lam = complex(lam)
    if z0 == 0:
        raise ValueError("z0 must be away from the origin")
    deg, lead = spec.leading_term()
    if deg < 1:
        raise ValueError("potential has no growth at infinity")
    thetas = critical_angles_for(deg, lead)
    if epsilon is None:
        epsilon = math.pi / (8 * (deg + 2))
    if _angle_distance(cmath.phase(z0), thetas) <= epsilon:
        raise ValueError(f"z0 = {z0} lies within {epsilon:.3g} rad of a critical ray")
    v = potential_eval(spec, z0)
    if abs(v) < min_ratio * abs(lam):
        raise ValueError(
            f"|V(z0)| = {abs(v):.3g} < {min_ratio:g} |lambda| = {min_ratio * abs(lam):.3g}; "
            "start further out")
    f = v - lam
    dv = potential_derivative(spec, z0)
    k = cmath.sqrt(f)
    outward = z0 / abs(z0)
    if (k * outward).real > 0:
        k = -k
    if mode == "growing":
        k = -k
    return SolutionState(z0, 1.0 + 0j, k - dv / (4.0 * f), 0.0)


def _segment(spec_args, lam, za, zb, state, tol, rescale_log, out_t, max_steps):
    pa, qc, xi = spec_args
    out_t = np.ascontiguousarray(out_t, dtype=np.float64)
    m = out_t.shape[0]
    ou = np.empty(m, dtype=np.complex128)
    od = np.empty(m, dtype=np.complex128)
    ol = np.empty(m, dtype=np.float64)
    u, du, ls, nst, nrej, status, tfail = _kernel.propagate(
        pa, qc, xi, complex(lam), complex(za), complex(zb), complex(state[0]), complex(state[1]),
        float(state[2]), float(tol) * LOCAL_SAFETY, 1.0 / 16.0, float(rescale_log), out_t, ou, od, ol, max_steps)
    if status != _kernel.STATUS_OK:
        pos = za + tfail * (zb - za)
        reason = {_kernel.STATUS_UNDERFLOW: "step size underflow",
                  _kernel.STATUS_NONFINITE: "non-finite solution despite rescaling",
                  _kernel.STATUS_MAXSTEPS: "step budget exhausted"}[status]
        raise IntegrationError(reason, pos)
    return (u, du, ls), (ou, od, ol), nst, nrej


def propagate_line(spec: PotentialSpec, lam: complex, za: complex, zb: complex,
                   state: SolutionState | tuple, out_t=(), tol: float = DEFAULT_TOL,
                   rescale_log: float = DEFAULT_RESCALE_LOG, max_steps: int = DEFAULT_MAX_STEPS):
    """Straight-segment propagation with output at parameters out_t in (0, 1].

    Returns ((u, du, ls), (u_out, du_out, ls_out)).  ``state`` may be a
    SolutionState or a raw (u, du, ls) triple.
    """
    if isinstance(state, SolutionState):
        state = (state.u, state.du, state.log_scale)
    fin, outs, _, _ = _segment(spec.kernel_args, lam, za, zb, state, tol, rescale_log,
                               np.asarray(out_t, dtype=float), max_steps)
    return fin, outs


def integrate(spec: PotentialSpec, lam: complex, path: ComplexPath, init: SolutionState,
              tol: float = DEFAULT_TOL, samples_per_segment: int = 0,
              rescale_log: float = DEFAULT_RESCALE_LOG,
              max_steps: int = DEFAULT_MAX_STEPS) -> IntegrationResult:
    """Propagate (u, u') along the polyline ``path`` starting from ``init``.

    With samples_per_segment = k > 0 the state is recorded at k equally
    spaced points on every segment (plus the starting point).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if init.z != path.start:
        raise ValueError(f"initial state sits at {init.z}, path starts at {path.start}")
    args = spec.kernel_args
    cur = (init.u, init.du, init.log_scale)
    zs, us, dus, lss = [path.start], [init.u], [init.du], [init.log_scale]
    steps = rejected = 0
    out_t = (np.arange(1, samples_per_segment + 1) / samples_per_segment
             if samples_per_segment > 0 else np.empty(0))
    for za, zb in zip(path.waypoints, path.waypoints[1:]):
        try:
            cur, outs, nst, nrej = _segment(args, lam, za, zb, cur, tol, rescale_log, out_t, max_steps)
        except IntegrationError as exc:
            raise IntegrationError(f"propagation from {za:.6g} to {zb:.6g} failed: {exc}",
                                   exc.position) from None
        steps += nst
        rejected += nrej
        if samples_per_segment > 0:
            zs.extend(za + out_t * (zb - za))
            us.extend(outs[0])
            dus.extend(outs[1])
            lss.extend(outs[2])
    state = SolutionState(path.end, cur[0], cur[1], cur[2])
    samples = None
    if samples_per_segment > 0:
        samples = DenseSamples(np.array(zs), np.array(us), np.array(dus), np.array(lss))
    return IntegrationResult(state, samples, steps, rejected)


def combine_log(a: complex, la: float, b: complex, lb: float) -> tuple[complex, float]:
    """a e^la + b e^lb as a (mantissa, log_scale) pair."""
    if la >= lb:
        return a + b * math.exp(lb - la), la
    return a * math.exp(la - lb) + b, lb
