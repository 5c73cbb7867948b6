"""Pure-Python/numpy implementation of the numerical hot kernels.

Mirrors ``_core.pyx`` function for function; ``seaoons.kernels`` picks one at
import time. Kernels never raise on numerical trouble, they return a status
code (``OK``, ``SINGULAR``, ``NO_CONVERGENCE``) and the caller raises.
"""

import math

import numpy as np

NAME = "python"

OK = 0
SINGULAR = 1
NO_CONVERGENCE = 2

# relative eigenvalue floor below which A is treated as singular
PD_FLOOR = 1e-14
BOUNDARY_TIE = 1e-12
MAX_ROOT_ITERS = 200
RADIUS_TOL = 1e-10


def sym_eig(A):
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric ``A``."""
    w, Q = np.linalg.eigh(np.asarray(A, dtype=np.float64))
    return w, Q


def ball_step(w, Q, anchor, linear, radius):
    """argmin over ``||x|| <= radius`` of ``<x, linear> + 0.5 ||x - anchor||_A^2``.

    ``A = Q diag(w) Q^T``. Returns ``(x, lam, status)`` where ``lam`` is the
    multiplier of the ball constraint.
    """
    w = np.asarray(w, dtype=np.float64)
    if w[0] <= 0.0 or w[0] <= PD_FLOOR * w[-1]:
        return np.full(w.shape[0], np.nan), 0.0, SINGULAR
    c = Q.T @ anchor - (Q.T @ linear) / w
    ny = math.sqrt(float(c @ c))
    if not math.isfinite(ny):
        return np.full(w.shape[0], np.nan), 0.0, NO_CONVERGENCE
    if radius == math.inf or ny <= radius * (1.0 + BOUNDARY_TIE):
        x = Q @ c
        if ny > radius:
            x *= radius / ny
        return x, 0.0, OK

    b = w * c
    b2 = b * b
    lo, hi = 0.0, math.sqrt(float(b2.sum())) / radius
    lam = 0.0
    n = ny
    for _ in range(MAX_ROOT_ITERS):
        den = w + lam
        s = float((b2 / (den * den)).sum())
        n = math.sqrt(s)
        if abs(n - radius) <= 1e-14 * radius:
            break
        if n > radius:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 4e-16 * hi:
            break
        ds = -2.0 * float((b2 / (den * den * den)).sum())
        phi = 1.0 / n - 1.0 / radius
        dphi = -0.5 * ds / (s * n)
        nxt = lam - phi / dphi if dphi != 0.0 else -1.0
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        lam = nxt
    x = Q @ (b / (w + lam))
    n = math.sqrt(float(x @ x))
    if not abs(n - radius) <= RADIUS_TOL * radius:
        return x, lam, NO_CONVERGENCE
    if n > radius:
        x *= radius / n
    return x, lam, OK


def _lse(v):
    m = float(v.max())
    return m + math.log(float(np.exp(v - m).sum()))


def entropy_solve(log_prior, cost, rates):
    """Solve ``p_k = exp(log_prior_k - rates_k * (cost_k + mu))`` with ``sum p = 1``.

    Arrays are restricted to the support. Returns ``(p, mu, status)``.
    """
    a = log_prior - rates * cost
    rmin = float(rates.min())
    rmax = float(rates.max())
    if rmin == rmax:
        L = _lse(a)
        p = np.exp(a - L)
        return p / p.sum(), L / rmin, OK

    L = _lse(a)
    lo, hi = sorted((L / rmax, L / rmin))
    # analytic bracket; widen only if rounding left it invalid
    for _ in range(1024):
        if _lse(a - rates * lo) >= 0.0:
            break
        lo -= max(1.0, abs(lo))
    else:
        return np.full(a.shape[0], np.nan), 0.0, NO_CONVERGENCE
    for _ in range(1024):
        if _lse(a - rates * hi) <= 0.0:
            break
        hi += max(1.0, abs(hi))
    else:
        return np.full(a.shape[0], np.nan), 0.0, NO_CONVERGENCE

    mu = 0.5 * (lo + hi)
    g = 0.0
    for _ in range(MAX_ROOT_ITERS):
        e = a - rates * mu
        m = float(e.max())
        q = np.exp(e - m)
        S = float(q.sum())
        g = m + math.log(S)
        if abs(g) <= 1e-15:
            break
        if g > 0.0:
            lo = mu
        else:
            hi = mu
        if hi - lo <= 4e-16 * max(abs(lo), abs(hi)):
            break
        dg = -float((rates * q).sum()) / S
        nxt = mu - g / dg
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        mu = nxt
    p = np.exp(a - rates * mu)
    s = float(p.sum())
    if not abs(s - 1.0) <= 1e-12:
        return p / s, mu, NO_CONVERGENCE
    return p / s, mu, OK
