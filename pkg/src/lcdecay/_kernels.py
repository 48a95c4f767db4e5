"""Fused pointwise kernels for the solver's hot loop (compiled with numba).

Each kernel performs the same floating-point operations, in the same
order, as the reference numpy expressions in :mod:`lcdecay.dynamics` and
:mod:`lcdecay.tensor`; they only avoid the temporaries.
"""
import numpy as np
from numba import njit

R3 = np.sqrt(3.0)
S2 = np.sqrt(2.0)
S6 = np.sqrt(6.0)


@njit(cache=True)
def polynomial_gradient(q, a, b, c):
    """``a Q + b L(Q^2) + c |Q|^2 Q`` in 5 coordinates, ``q`` of shape ``(5, m)``."""
    m = q.shape[1]
    out = np.empty((5, m))
    for j in range(m):
        q0 = q[0, j]
        q1 = q[1, j]
        q2 = q[2, j]
        q3 = q[3, j]
        q4 = q[4, j]
        s = a + c * (q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4)
        out[0, j] = s * q0
        out[1, j] = s * q1
        out[2, j] = s * q2
        out[3, j] = s * q3
        out[4, j] = s * q4
        if b != 0.0:
            out[0, j] += b * ((2.0 * (q0 * q0 - q1 * q1 - q2 * q2) + q3 * q3 + q4 * q4) / (2.0 * S6))
            out[1, j] += b * ((q3 * q3 - q4 * q4) / (2.0 * S2) - 2.0 * q0 * q1 / S6)
            out[2, j] += b * (q3 * q4 / S2 - 2.0 * q0 * q2 / S6)
            out[3, j] += b * (q0 * q3 / S6 + (q1 * q3 + q2 * q4) / S2)
            out[4, j] += b * (q0 * q4 / S6 + (q2 * q3 - q1 * q4) / S2)
    return out


@njit(cache=True)
def polynomial_value(q, a, b, c):
    """``a/2 |Q|^2 + b/3 tr Q^3 + c/4 |Q|^4`` for ``q`` of shape ``(5, m)``."""
    m = q.shape[1]
    out = np.empty(m)
    for j in range(m):
        q0 = q[0, j]
        q1 = q[1, j]
        q2 = q[2, j]
        q3 = q[3, j]
        q4 = q[4, j]
        r2 = q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4
        v = 0.5 * a * r2 + 0.25 * c * r2 * r2
        if b != 0.0:
            t3 = (q0 * ((2.0 * (q0 * q0 - q1 * q1 - q2 * q2) + q3 * q3 + q4 * q4) / (2.0 * S6))
                  + q1 * ((q3 * q3 - q4 * q4) / (2.0 * S2) - 2.0 * q0 * q1 / S6)
                  + q2 * (q3 * q4 / S2 - 2.0 * q0 * q2 / S6)
                  + q3 * (q0 * q3 / S6 + (q1 * q3 + q2 * q4) / S2)
                  + q4 * (q0 * q4 / S6 + (q2 * q3 - q1 * q4) / S2))
            v += b / 3.0 * t3
        out[j] = v
    return out


@njit(cache=True)
def coupling_terms(u, q, gq, w, h, feedback, rq, force, kk):
    """Pointwise products of the ``xi = 0`` right-hand side.

    Arrays are flattened over the grid: ``u (3, m)``, ``q (5, m)``,
    ``gq (3, 5, m)``, ``w (3, m)`` holding ``(W_01, W_02, W_12)`` and
    ``h (5, m)``.  Writes ``rq = [W, Q] - u.grad Q`` (5 coordinates),
    the vector force ``2 W u - grad Q : H`` (the last term only with
    ``feedback``) and, with ``feedback``, ``K = QH - HQ`` as
    ``(K_01, K_02, K_12)`` into ``kk``.
    """
    m = u.shape[1]
    for j in range(m):
        u0 = u[0, j]
        u1 = u[1, j]
        u2 = u[2, j]
        q0 = q[0, j]
        q1 = q[1, j]
        q2 = q[2, j]
        q3 = q[3, j]
        q4 = q[4, j]
        w0 = w[0, j]
        w1 = w[1, j]
        w2 = w[2, j]
        s0 = -R3 * (q3 * w1 + q4 * w2)
        s1 = 2.0 * q2 * w0 + q3 * w1 - q4 * w2
        s2 = -2.0 * q1 * w0 + q3 * w2 + q4 * w1
        s3 = (R3 * q0 - q1) * w1 - q2 * w2 + q4 * w0
        s4 = (R3 * q0 + q1) * w2 - q2 * w1 - q3 * w0
        for a in range(5):
            adv = u0 * gq[0, a, j] + u1 * gq[1, a, j] + u2 * gq[2, a, j]
            if a == 0:
                rq[0, j] = s0 - adv
            elif a == 1:
                rq[1, j] = s1 - adv
            elif a == 2:
                rq[2, j] = s2 - adv
            elif a == 3:
                rq[3, j] = s3 - adv
            else:
                rq[4, j] = s4 - adv
        f0 = 2.0 * (w0 * u1 + w1 * u2)
        f1 = 2.0 * (-w0 * u0 + w2 * u2)
        f2 = 2.0 * (-w1 * u0 - w2 * u1)
        if feedback:
            h0 = h[0, j]
            h1 = h[1, j]
            h2 = h[2, j]
            h3 = h[3, j]
            h4 = h[4, j]
            for i in range(3):
                gh = (gq[i, 0, j] * h0 + gq[i, 1, j] * h1 + gq[i, 2, j] * h2
                      + gq[i, 3, j] * h3 + gq[i, 4, j] * h4)
                if i == 0:
                    f0 -= gh
                elif i == 1:
                    f1 -= gh
                else:
                    f2 -= gh
            kk[0, j] = h2 * q1 - h1 * q2 + 0.5 * (h4 * q3 - h3 * q4)
            kk[1, j] = 0.5 * (R3 * (h0 * q3 - h3 * q0) - h1 * q3 + h3 * q1 - h2 * q4 + h4 * q2)
            kk[2, j] = 0.5 * (R3 * (h0 * q4 - h4 * q0) + h1 * q4 - h4 * q1 - h2 * q3 + h3 * q2)
        force[0, j] = f0
        force[1, j] = f1
        force[2, j] = f2


@njit(cache=True)
def spectral_prep(uh, qh, lam, kx, ky, kz, gq, w, h, feedback):
    """Spectral inputs of :func:`coupling_terms`, written into ``gq``
    ``(3, 5, ...)``, ``w`` ``(3, ...)`` and (with ``feedback``) ``h``
    ``(5, ...)`` = ``Lap Q`` minus ``lam``.  ``kx, ky, kz`` are the 1D
    effective wavenumbers of the half-spectrum axes."""
    n0, n1, n2 = qh.shape[1], qh.shape[2], qh.shape[3]
    for m in range(5):
        for i in range(n0):
            a = kx[i]
            for j in range(n1):
                b = ky[j]
                for k in range(n2):
                    c = kz[k]
                    v = qh[m, i, j, k]
                    iv = complex(-v.imag, v.real)
                    gq[0, m, i, j, k] = a * iv
                    gq[1, m, i, j, k] = b * iv
                    gq[2, m, i, j, k] = c * iv
                    if feedback:
                        h[m, i, j, k] = -(a * a + b * b + c * c) * v - lam[m, i, j, k]
    for i in range(n0):
        a = kx[i]
        for j in range(n1):
            b = ky[j]
            for k in range(n2):
                c = kz[k]
                u0 = uh[0, i, j, k]
                u1 = uh[1, i, j, k]
                u2 = uh[2, i, j, k]
                d01 = a * u1 - b * u0
                d02 = a * u2 - c * u0
                d12 = b * u2 - c * u1
                w[0, i, j, k] = 0.5 * complex(-d01.imag, d01.real)
                w[1, i, j, k] = 0.5 * complex(-d02.imag, d02.real)
                w[2, i, j, k] = 0.5 * complex(-d12.imag, d12.real)


@njit(cache=True)
def assemble_momentum(fh, kh, kx, ky, kz, feedback):
    """In place: ``fh <- P(fh - div K)`` with ``K`` antisymmetric given by
    ``kh = (K_01, K_02, K_12)``; the mean mode is left unprojected."""
    n0, n1, n2 = fh.shape[1], fh.shape[2], fh.shape[3]
    for i in range(n0):
        a = kx[i]
        for j in range(n1):
            b = ky[j]
            for k in range(n2):
                c = kz[k]
                f0 = fh[0, i, j, k]
                f1 = fh[1, i, j, k]
                f2 = fh[2, i, j, k]
                if feedback:
                    k0 = kh[0, i, j, k]
                    k1 = kh[1, i, j, k]
                    k2_ = kh[2, i, j, k]
                    d0 = b * k0 + c * k1
                    d1 = c * k2_ - a * k0
                    d2 = a * k1 + b * k2_
                    f0 -= complex(-d0.imag, d0.real)
                    f1 -= complex(-d1.imag, d1.real)
                    f2 += complex(-d2.imag, d2.real)
                kk = a * a + b * b + c * c
                if kk > 0.0:
                    s = (a * f0 + b * f1 + c * f2) / kk
                    f0 -= a * s
                    f1 -= b * s
                    f2 -= c * s
                fh[0, i, j, k] = f0
                fh[1, i, j, k] = f1
                fh[2, i, j, k] = f2


@njit(cache=True)
def heun_predict(y, n, e, dt, out):
    """``out = e (y + dt n)`` over a ``(c, ...)`` spectral array."""
    nc, n0, n1, n2 = y.shape
    for m in range(nc):
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    out[m, i, j, k] = e[i, j, k] * (y[m, i, j, k] + dt * n[m, i, j, k])


@njit(cache=True)
def heun_correct(y, n0_, n1_, e, dt, out):
    """``out = e y + dt/2 (e n0 + n1)``; returns False on a non-finite value."""
    nc, n0, n1, n2 = y.shape
    ok = True
    for m in range(nc):
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    ee = e[i, j, k]
                    v = ee * y[m, i, j, k] + 0.5 * dt * (ee * n0_[m, i, j, k] + n1_[m, i, j, k])
                    if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                        ok = False
                    out[m, i, j, k] = v
    return ok


@njit(cache=True)
def pairwise_sum(v):
    """Fixed-tree pairwise sum: repeatedly add the upper half onto the
    lower half (odd lengths padded with a zero)."""
    n = v.size
    if n == 0:
        return 0.0
    buf = np.empty(n + 1)
    for i in range(n):
        buf[i] = v[i]
    while n > 1:
        if n % 2:
            buf[n] = 0.0
            n += 1
        h = n // 2
        for i in range(h):
            buf[i] = buf[i] + buf[i + h]
        n = h
    return buf[0]


@njit(cache=True)
def mode_density(fh, weight):
    """``sum_c |fh[c]|^2 * weight`` per stored mode."""
    nc, n0, n1, n2 = fh.shape
    out = np.zeros((n0, n1, n2))
    for m in range(nc):
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    v = fh[m, i, j, k]
                    out[i, j, k] += v.real * v.real + v.imag * v.imag
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                out[i, j, k] *= weight[k]
    return out
