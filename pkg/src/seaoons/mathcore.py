"""Ball domains, the ONS matrix accumulator and the two proximal steps.

``quad_bregman_step`` solves ``argmin_{||x|| <= R} <x, l> + 0.5 ||x - a||_A^2``
and ``entropy_step`` solves the weighted-negentropy proximal step on a
(restricted) probability simplex. Both delegate their inner loops to
``seaoons.kernels``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import (
    ConfigError,
    EmptySupportError,
    NormalizationError,
    ProjectionError,
    SingularRegularizerError,
)


@dataclass(frozen=True)
class DomainBall:
    """Origin-centred Euclidean ball; ``radius=inf`` is all of R^d."""

    radius: float = math.inf

    def __post_init__(self):
        r = float(self.radius)
        if not r > 0.0:
            raise ConfigError(f"ball radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "radius", r)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.radius)

    def contains(self, x, tol: float = 0.0) -> bool:
        return float(np.linalg.norm(x)) <= self.radius * (1.0 + tol) + tol

    def project(self, x) -> np.ndarray:
        """Euclidean projection."""
        x = np.asarray(x, dtype=np.float64)
        n = float(np.linalg.norm(x))
        if n > self.radius:
            return x * (self.radius / n)
        return x.copy()

    def intersect(self, other: "DomainBall") -> "DomainBall":
        return DomainBall(min(self.radius, other.radius))


class QuadAccumulator:
    """``A = base_scale*I + sum_s eta_s v_s v_s^T + ridge*I``.

    The rank-one part is stored densely. When ``track_inverse`` is set, the
    inverse of ``base_scale*I + terms`` (no ridge) is maintained with
    Sherman-Morrison updates; it is only usable for unconstrained solves
    because the ridge changes every round.
    """

    def __init__(self, dim: int, base_scale: float, track_inverse: bool = False):
        if dim < 1:
            raise ConfigError("dim must be >= 1")
        if base_scale < 0:
            raise ConfigError("base_scale must be nonnegative")
        self.dim = int(dim)
        self.base_scale = float(base_scale)
        self.terms = np.zeros((self.dim, self.dim))
        self.ridge = 0.0
        self.track_inverse = track_inverse
        self._inv = None
        if track_inverse:
            self._reset_inverse()

    def _reset_inverse(self):
        if self.base_scale <= 0:
            raise SingularRegularizerError("singular regularizer: base_scale must be > 0 for inverse tracking")
        self._inv = np.eye(self.dim) / self.base_scale

    def add(self, eta: float, v) -> None:
        v = np.asarray(v, dtype=np.float64)
        if eta < 0:
            raise ValueError("eta must be nonnegative")
        self.terms += eta * np.outer(v, v)
        if self._inv is not None:
            Mv = self._inv @ v
            self._inv -= (eta / (1.0 + eta * float(v @ Mv))) * np.outer(Mv, Mv)

    def clear(self, base_scale: float | None = None) -> None:
        if base_scale is not None:
            self.base_scale = float(base_scale)
        self.terms[:] = 0.0
        self.ridge = 0.0
        if self.track_inverse:
            self._reset_inverse()

    def materialize(self) -> np.ndarray:
        A = self.terms + (self.base_scale + self.ridge) * np.eye(self.dim)
        # keep exact symmetry; the rank-one sums are symmetric up to rounding
        return 0.5 * (A + A.T)

    def solve_unridged(self, b) -> np.ndarray:
        """``(base_scale*I + terms)^{-1} b`` via the Sherman-Morrison inverse."""
        if self._inv is None:
            raise RuntimeError("inverse tracking disabled")
        return self._inv @ np.asarray(b, dtype=np.float64)

    def copy(self) -> "QuadAccumulator":
        out = QuadAccumulator.__new__(QuadAccumulator)
        out.dim = self.dim
        out.base_scale = self.base_scale
        out.terms = self.terms.copy()
        out.ridge = self.ridge
        out.track_inverse = self.track_inverse
        out._inv = None if self._inv is None else self._inv.copy()
        return out


@dataclass
class SimplexPoint:
    """A distribution whose mass lives on ``support`` (0-based indices)."""

    weights: np.ndarray
    support: tuple = field(default=())

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not self.support:
            self.support = tuple(int(i) for i in np.flatnonzero(self.weights > 0))
        else:
            self.support = tuple(sorted(int(i) for i in self.support))

    @classmethod
    def uniform(cls, n: int, support: Sequence[int] | None = None) -> "SimplexPoint":
        support = tuple(range(n)) if support is None else tuple(support)
        if not support:
            raise EmptySupportError("empty support")
        w = np.zeros(n)
        w[list(support)] = 1.0 / len(support)
        return cls(w, support)

    def validate(self, tol: float = 1e-12) -> None:
        w = self.weights
        mask = np.ones(w.shape[0], dtype=bool)
        mask[list(self.support)] = False
        if np.any(w < 0) or np.any(w[mask] != 0.0) or abs(w.sum() - 1.0) > tol:
            raise ValueError("not a valid simplex point on its support")

    def copy(self) -> "SimplexPoint":
        return SimplexPoint(self.weights.copy(), self.support)


def eig_of(A):
    """Symmetric eigendecomposition through the active kernel backend."""
    return kernels.sym_eig(A)


def quad_bregman_step(A, anchor, linear, dom: DomainBall, eig=None) -> np.ndarray:
    """argmin over ``dom`` of ``<x, linear> + 0.5 ||x - anchor||_A^2``.

    ``A`` is a matrix or a :class:`QuadAccumulator`. Pass ``eig=(w, Q)`` to
    reuse a decomposition of the same matrix.
    """
    if isinstance(A, QuadAccumulator):
        A = A.materialize()
    if eig is None:
        eig = kernels.sym_eig(A)
    w, Q = eig
    x, _lam, status = kernels.ball_step(
        w, Q, np.asarray(anchor, dtype=np.float64), np.asarray(linear, dtype=np.float64), dom.radius
    )
    if status == kernels.SINGULAR:
        raise SingularRegularizerError(f"singular regularizer: smallest eigenvalue {w[0]!r}")
    if status != kernels.OK:
        raise ProjectionError(f"projection failure onto ball of radius {dom.radius!r}")
    return x


def quad_bregman(A, x, y) -> float:
    """``D_psi(x, y) = 0.5 ||x - y||_A^2`` for ``psi = 0.5 ||.||_A^2``."""
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return 0.5 * float(d @ (A @ d))


def solve_eig(eig, b) -> np.ndarray:
    w, Q = eig
    return Q @ ((Q.T @ b) / w)


def entropy_step(prior: SimplexPoint, cost, rates) -> SimplexPoint:
    """argmin over the prior's support of ``<p, cost> + D_phi(p, prior)``,
    ``phi(p) = sum_k p_k / rates_k * ln p_k``.

    ``cost`` is indexed like ``prior.weights``; ``rates`` is a scalar or an
    array of the same length.
    """
    sup = list(prior.support)
    if not sup:
        raise EmptySupportError("empty support")
    pw = prior.weights[sup]
    if not np.any(pw > 0):
        raise EmptySupportError("empty support: prior has no mass")
    cost = np.asarray(cost, dtype=np.float64)
    if np.ndim(rates) == 0:
        r = np.full(len(sup), float(rates))
    else:
        r = np.asarray(rates, dtype=np.float64)[sup]
    if np.any(r <= 0):
        raise ValueError("rates must be positive on the support")
    with np.errstate(divide="ignore"):
        lp = np.log(pw)
    p, _mu, status = kernels.entropy_solve(lp, cost[sup], r)
    if status != kernels.OK:
        raise NormalizationError("normalization failure in entropy step")
    w = np.zeros_like(prior.weights)
    w[sup] = p
    return SimplexPoint(w, prior.support)
