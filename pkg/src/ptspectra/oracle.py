"""Independent eigenvalue oracle: diagonalisation in a scaled Hermite-function basis.

H = -d^2/dx^2 + V(x) is represented in the basis of harmonic-oscillator
eigenfunctions phi_k(x / s).  Position and second-derivative matrices are
exact in that basis; V(X) is formed as a matrix polynomial on a padded basis
and then truncated, so the only approximation is the basis size.  The result
is a complex symmetric matrix whose lowest eigenvalues converge
exponentially in the basis size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ode import PotentialSpec


def _position(size: int, scale: float) -> np.ndarray:
    k = np.arange(1, size)
    off = scale * np.sqrt(k / 2.0)
    return np.diag(off, 1) + np.diag(off, -1)


def _kinetic(size: int, scale: float) -> np.ndarray:
    k = np.arange(size)
    t = np.diag((2 * k + 1) / 2.0)
    off = -np.sqrt((k[:-2] + 1.0) * (k[:-2] + 2.0)) / 2.0
    t = t + np.diag(off, 2) + np.diag(off, -2)
    return t / scale ** 2


def hamiltonian_matrix(spec: PotentialSpec, size: int, scale: float) -> np.ndarray:
    if spec.xi != 0:
        raise ValueError("the Hermite oracle handles unshifted potentials only")
    deg = 2 * spec.n + 1
    pad = size + deg + 1
    x = _position(pad, scale).astype(complex)
    x2 = x @ x
    # V(X) = P(X^2) + i g X Q(X^2), Horner in X^2
    p = np.zeros((pad, pad), complex)
    for c in reversed(spec.a):
        p = p @ x2 + c * np.eye(pad)
    q = np.zeros((pad, pad), complex)
    for c in reversed(spec.b):
        q = q @ x2 + c * np.eye(pad)
    v = p + 1j * spec.g * (x @ q)
    return _kinetic(size, scale) + v[:size, :size]


def lowest_eigenvalues(spec: PotentialSpec, size: int, count: int, scale: float = 0.5) -> np.ndarray:
    ev = scipy.linalg.eigvals(hamiltonian_matrix(spec, size, scale))
    ev = ev[np.argsort(np.abs(ev))]
    return ev[:count]


@dataclass
class OracleResult:
    eigenvalues: np.ndarray
    error_estimate: np.ndarray
    sizes: tuple[int, ...]
    raw: np.ndarray


def _aitken(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    d1 = b - a
    d2 = c - b
    den = d2 - d1
    out = c.copy()
    ok = (np.abs(den) > 1e-300) & (np.abs(d2) < np.abs(d1))
    out[ok] = c[ok] - d2[ok] ** 2 / den[ok]
    return out


def hermite_oracle(spec: PotentialSpec, count: int = 4, sizes=(400, 500, 600),
                   scale: float = 0.5) -> OracleResult:
    """Lowest ``count`` eigenvalues extrapolated over increasing basis sizes.

    Aitken's delta-squared extrapolation is applied to the last three sizes;
    the error estimate is the size of the final correction plus the last
    difference between sizes.
    """
    raw = np.array([lowest_eigenvalues(spec, n, count, scale) for n in sizes])
    if len(sizes) >= 3:
        best = _aitken(raw[-3], raw[-2], raw[-1])
    else:
        best = raw[-1]
    err = np.abs(best - raw[-1]) + np.abs(raw[-1] - raw[-2])
    return OracleResult(best, err, tuple(sizes), raw)
