# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contract as ``seaoons._fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log, fabs, INFINITY, isfinite
from scipy.linalg.cython_lapack cimport dsyev

cnp.import_array()

NAME = "cython"

DEF OK = 0
DEF SINGULAR = 1
DEF NO_CONVERGENCE = 2
DEF PD_FLOOR = 1e-14
DEF BOUNDARY_TIE = 1e-12
DEF MAX_ROOT_ITERS = 200
DEF RADIUS_TOL = 1e-10


def sym_eig(A):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="fortran"] Q = np.array(A, dtype=np.float64, order="F", copy=True)
    cdef int n = Q.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(n, dtype=np.float64)
    cdef int lwork = max(1, 3 * n - 1) + 32 * n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(lwork, dtype=np.float64)
    cdef int info = 0
    cdef char jobz = b"V"
    cdef char uplo = b"L"
    dsyev(&jobz, &uplo, &n, &Q[0, 0], &n, &w[0], &work[0], &lwork, &info)
    if info != 0:
        raise np.linalg.LinAlgError("dsyev failed with info=%d" % info)
    return w, Q


cdef inline double _dot(double[::1] a, double[::1] b, int n) nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += a[i] * b[i]
    return s


def ball_step(double[::1] w, double[:, :] Q, anchor, linear, double radius):
    cdef int n = w.shape[0]
    cdef int i, j, it
    cdef double[::1] an = np.ascontiguousarray(anchor, dtype=np.float64)
    cdef double[::1] li = np.ascontiguousarray(linear, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.empty(n, dtype=np.float64)
    cdef double[::1] xv = x
    cdef double[::1] c = np.empty(n, dtype=np.float64)
    cdef double[::1] b2 = np.empty(n, dtype=np.float64)
    cdef double ca, cl, ny, s, nrm, lo, hi, lam, den, ds, phi, dphi, nxt, scale
    if w[0] <= 0.0 or w[0] <= PD_FLOOR * w[n - 1]:
        x.fill(np.nan)
        return x, 0.0, SINGULAR
    ny = 0.0
    for i in range(n):
        ca = 0.0
        cl = 0.0
        for j in range(n):
            ca += Q[j, i] * an[j]
            cl += Q[j, i] * li[j]
        c[i] = ca - cl / w[i]
        ny += c[i] * c[i]
    ny = sqrt(ny)
    if not isfinite(ny):
        x.fill(np.nan)
        return x, 0.0, NO_CONVERGENCE
    if radius == INFINITY or ny <= radius * (1.0 + BOUNDARY_TIE):
        scale = radius / ny if ny > radius else 1.0
        for j in range(n):
            s = 0.0
            for i in range(n):
                s += Q[j, i] * c[i]
            xv[j] = s * scale
        return x, 0.0, OK

    s = 0.0
    for i in range(n):
        b2[i] = w[i] * c[i]
        b2[i] = b2[i] * b2[i]
        s += b2[i]
    lo = 0.0
    hi = sqrt(s) / radius
    lam = 0.0
    for it in range(MAX_ROOT_ITERS):
        s = 0.0
        ds = 0.0
        for i in range(n):
            den = w[i] + lam
            s += b2[i] / (den * den)
            ds += b2[i] / (den * den * den)
        nrm = sqrt(s)
        if fabs(nrm - radius) <= 1e-14 * radius:
            break
        if nrm > radius:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 4e-16 * hi:
            break
        ds = -2.0 * ds
        phi = 1.0 / nrm - 1.0 / radius
        dphi = -0.5 * ds / (s * nrm)
        nxt = lam - phi / dphi if dphi != 0.0 else -1.0
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        lam = nxt
    nrm = 0.0
    for j in range(n):
        s = 0.0
        for i in range(n):
            s += Q[j, i] * (w[i] * c[i] / (w[i] + lam))
        xv[j] = s
        nrm += s * s
    nrm = sqrt(nrm)
    if not fabs(nrm - radius) <= RADIUS_TOL * radius:
        return x, lam, NO_CONVERGENCE
    if nrm > radius:
        for j in range(n):
            xv[j] *= radius / nrm
    return x, lam, OK


cdef double _lse_shift(double[::1] a, double[::1] r, double mu, int n, double* dg) nogil:
    """log sum exp(a - r*mu); writes d/dmu into dg."""
    cdef double m = -INFINITY
    cdef double e, S = 0.0, D = 0.0, q
    cdef int i
    for i in range(n):
        e = a[i] - r[i] * mu
        if e > m:
            m = e
    for i in range(n):
        q = exp(a[i] - r[i] * mu - m)
        S += q
        D += r[i] * q
    dg[0] = -D / S
    return m + log(S)


def entropy_solve(log_prior, cost, rates):
    cdef double[::1] lp = np.ascontiguousarray(log_prior, dtype=np.float64)
    cdef double[::1] co = np.ascontiguousarray(cost, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    cdef int n = lp.shape[0]
    cdef int i, it
    cdef double[::1] a = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.empty(n, dtype=np.float64)
    cdef double[::1] pv = p
    cdef double rmin = INFINITY, rmax = -INFINITY, L, lo, hi, mu, g, dg, nxt, s, t
    for i in range(n):
        a[i] = lp[i] - r[i] * co[i]
        if r[i] < rmin:
            rmin = r[i]
        if r[i] > rmax:
            rmax = r[i]
    L = _lse_shift(a, r, 0.0, n, &dg)
    if rmin == rmax:
        s = 0.0
        for i in range(n):
            pv[i] = exp(a[i] - L)
            s += pv[i]
        for i in range(n):
            pv[i] /= s
        return p, L / rmin, OK

    lo = L / rmax
    hi = L / rmin
    if lo > hi:
        lo, hi = hi, lo
    for it in range(1024):
        if _lse_shift(a, r, lo, n, &dg) >= 0.0:
            break
        lo -= max(1.0, fabs(lo))
    else:
        p.fill(np.nan)
        return p, 0.0, NO_CONVERGENCE
    for it in range(1024):
        if _lse_shift(a, r, hi, n, &dg) <= 0.0:
            break
        hi += max(1.0, fabs(hi))
    else:
        p.fill(np.nan)
        return p, 0.0, NO_CONVERGENCE

    mu = 0.5 * (lo + hi)
    for it in range(MAX_ROOT_ITERS):
        g = _lse_shift(a, r, mu, n, &dg)
        if fabs(g) <= 1e-15:
            break
        if g > 0.0:
            lo = mu
        else:
            hi = mu
        if hi - lo <= 4e-16 * max(fabs(lo), fabs(hi)):
            break
        nxt = mu - g / dg
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        mu = nxt
    s = 0.0
    for i in range(n):
        pv[i] = exp(a[i] - r[i] * mu)
        s += pv[i]
    for i in range(n):
        pv[i] /= s
    if not fabs(s - 1.0) <= 1e-12:
        return p, mu, NO_CONVERGENCE
    return p, mu, OK
