"""Compiled Dormand-Prince 5(4) propagation of u'' = (V(z) - lambda) u along a segment.

The potential is passed as two coefficient arrays in s = w**2, w = z - xi:

    V(z) = sum_k pa[k] s**k + w * sum_k qc[k] s**k

so that every potential of the form P(w^2) + i g w Q(w^2) is covered without
expanding the shift.
"""

import math

import numpy as np
from numba import njit

# Dormand-Prince tableau.
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_MAXSTEPS = 3


@njit(cache=True, nogil=True)
def potential(pa, qc, xi, z):
    w = z - xi
    s = w * w
    p = 0.0 + 0.0j
    for k in range(pa.shape[0] - 1, -1, -1):
        p = p * s + pa[k]
    q = 0.0 + 0.0j
    for k in range(qc.shape[0] - 1, -1, -1):
        q = q * s + qc[k]
    return p + w * q


@njit(cache=True, nogil=True)
def potential_derivative(pa, qc, xi, z):
    w = z - xi
    s = w * w
    # d/dw [P(s) + w Q(s)] = 2 w P'(s) + Q(s) + 2 s Q'(s)
    dp = 0.0 + 0.0j
    for k in range(pa.shape[0] - 1, 0, -1):
        dp = dp * s + k * pa[k]
    q = 0.0 + 0.0j
    dq = 0.0 + 0.0j
    for k in range(qc.shape[0] - 1, -1, -1):
        q = q * s + qc[k]
        if k > 0:
            dq = dq * s + k * qc[k]
    return 2.0 * w * dp + q + 2.0 * s * dq


@njit(cache=True, nogil=True)
def _error_norm(u, du, un, dun, eu, edu, rtol):
    m = max(abs(u), abs(du), abs(un), abs(dun))
    floor = 1e-3 * m + 1e-300
    su = rtol * max(abs(u), abs(un), floor)
    sdu = rtol * max(abs(du), abs(dun), floor)
    return max(abs(eu) / su, abs(edu) / sdu)


@njit(cache=True, nogil=True)
def propagate(pa, qc, xi, lam, za, zb, u, du, ls, rtol, hmax, log_hi,
              out_t, out_u, out_du, out_ls, max_steps):
    """Integrate from za to zb along the straight segment z(t) = za + t (zb - za).

    out_t holds ascending parameters in (0, 1]; the state at each of them is
    written into out_u, out_du, out_ls.  Returns
    (u, du, ls, nsteps, nreject, status, t_fail).
    """
    dz = zb - za
    t = 0.0
    nout = out_t.shape[0]
    iout = 0
    while iout < nout and out_t[iout] <= 0.0:
        out_u[iout] = u
        out_du[iout] = du
        out_ls[iout] = ls
        iout += 1
    if abs(dz) == 0.0:
        while iout < nout:
            out_u[iout] = u
            out_du[iout] = du
            out_ls[iout] = ls
            iout += 1
        return u, du, ls, 0, 0, STATUS_OK, 0.0

    f0 = potential(pa, qc, xi, za) - lam
    k_loc = math.sqrt(abs(f0)) * abs(dz) + abs(dz) + 1e-300
    h = min(hmax, 0.5 * rtol ** 0.2 / k_loc)
    if h <= 0.0:
        h = hmax
    err_prev = 1e-4
    nsteps = 0
    nreject = 0
    # FSAL derivative at the current point
    k1u = dz * du
    k1d = dz * f0 * u
    rejected = False
    hmin = 1e-15
    while t < 1.0:
        if nsteps + nreject >= max_steps:
            return u, du, ls, nsteps, nreject, STATUS_MAXSTEPS, t
        target = 1.0
        if iout < nout:
            target = out_t[iout]
        hstep = h
        last = False
        if t + hstep >= target:
            hstep = target - t
            last = True
        if hstep < hmin * (1.0 + t):
            if not last:
                return u, du, ls, nsteps, nreject, STATUS_UNDERFLOW, t
        # stages
        z = za + (t + C2 * hstep) * dz
        yu = u + hstep * (A21 * k1u)
        yd = du + hstep * (A21 * k1d)
        k2u = dz * yd
        k2d = dz * (potential(pa, qc, xi, z) - lam) * yu

        z = za + (t + C3 * hstep) * dz
        yu = u + hstep * (A31 * k1u + A32 * k2u)
        yd = du + hstep * (A31 * k1d + A32 * k2d)
        k3u = dz * yd
        k3d = dz * (potential(pa, qc, xi, z) - lam) * yu

        z = za + (t + C4 * hstep) * dz
        yu = u + hstep * (A41 * k1u + A42 * k2u + A43 * k3u)
        yd = du + hstep * (A41 * k1d + A42 * k2d + A43 * k3d)
        k4u = dz * yd
        k4d = dz * (potential(pa, qc, xi, z) - lam) * yu

        z = za + (t + C5 * hstep) * dz
        yu = u + hstep * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u)
        yd = du + hstep * (A51 * k1d + A52 * k2d + A53 * k3d + A54 * k4d)
        k5u = dz * yd
        k5d = dz * (potential(pa, qc, xi, z) - lam) * yu

        tn = t + hstep
        if last:
            tn = target
        z = za + tn * dz
        yu = u + hstep * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u)
        yd = du + hstep * (A61 * k1d + A62 * k2d + A63 * k3d + A64 * k4d + A65 * k5d)
        k6u = dz * yd
        k6d = dz * (potential(pa, qc, xi, z) - lam) * yu

        un = u + hstep * (B1 * k1u + B3 * k3u + B4 * k4u + B5 * k5u + B6 * k6u)
        dun = du + hstep * (B1 * k1d + B3 * k3d + B4 * k4d + B5 * k5d + B6 * k6d)
        fz = potential(pa, qc, xi, z) - lam
        k7u = dz * dun
        k7d = dz * fz * un

        eu = hstep * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u)
        ed = hstep * (E1 * k1d + E3 * k3d + E4 * k4d + E5 * k5d + E6 * k6d + E7 * k7d)
        err = _error_norm(u, du, un, dun, eu, ed, rtol)
        if not (err == err) or not (abs(un) < 1e300 and abs(dun) < 1e300):
            if hstep < hmin * (1.0 + t):
                return u, du, ls, nsteps, nreject, STATUS_NONFINITE, t
            h = 0.1 * hstep
            nreject += 1
            rejected = True
            continue

        if err <= 1.0:
            t = tn
            u = un
            du = dun
            k1u = k7u
            k1d = k7d
            nsteps += 1
            m = max(abs(u), abs(du))
            if m > math.exp(log_hi) or m < math.exp(-log_hi):
                if m == 0.0:
                    return u, du, ls, nsteps, nreject, STATUS_NONFINITE, t
                u = u / m
                du = du / m
                k1u = k1u / m
                k1d = k1d / m
                ls += math.log(m)
            if last:
                while iout < nout and out_t[iout] <= t:
                    out_u[iout] = u
                    out_du[iout] = du
                    out_ls[iout] = ls
                    iout += 1
            if err < 1e-10:
                fac = 5.0
            else:
                fac = 0.9 * err ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0)
                fac = min(5.0, max(0.2, fac))
            if rejected:
                fac = min(fac, 1.0)
            # a step clipped short by an output point keeps the natural size
            if not (last and hstep < h):
                h = min(hmax, hstep * fac)
            err_prev = max(err, 1e-4)
            rejected = False
        else:
            fac = max(0.2, 0.9 * err ** (-1.0 / 5.0))
            h = hstep * fac
            nreject += 1
            rejected = True
            if h < hmin * (1.0 + t):
                return u, du, ls, nsteps, nreject, STATUS_UNDERFLOW, t
    while iout < nout:
        out_u[iout] = u
        out_du[iout] = du
        out_ls[iout] = ls
        iout += 1
    return u, du, ls, nsteps, nreject, STATUS_OK, t


@njit(cache=True, nogil=True)
def potential_many(pa, qc, xi, z):
    out = np.empty(z.shape[0], dtype=np.complex128)
    for i in range(z.shape[0]):
        out[i] = potential(pa, qc, xi, z[i])
    return out
