"""Expert grid, multi-scale multiplicative weights with correction, and the
two-layer meta aggregator that sits above the base learners."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LossRangeError
from .mathcore import SimplexPoint, entropy_step

RANGE_TOL = 1e-9


def beta_of(k: int) -> float:
    """Top-layer rate ``1/(32 * 2^k)``."""
    return math.ldexp(1.0 / 32.0, -k)


@dataclass(frozen=True)
class ExpertGrid:
    """Base-learner diameters and the scale set of the meta layer.

    ``supports[k]`` holds 0-based learner indices ``j-1`` with
    ``G * D_j <= 2^(k-2)``.
    """

    N: int
    G: float
    T: int
    diameters: np.ndarray
    S: tuple
    beta: dict
    supports: dict

    @property
    def bounds(self) -> np.ndarray:
        """Per-learner range ``G * D_j`` for hints and losses."""
        return self.G * self.diameters


def build_grid(G: float, T: int, n_learners: int | None = None) -> ExpertGrid:
    if not G > 0:
        raise ConfigError("G must be positive")
    if T < 2:
        raise ConfigError("horizon T must be at least 2")
    N = int(math.ceil(math.log2(T))) if n_learners is None else int(n_learners)
    if N < 1:
        raise ConfigError("need at least one base learner")
    D = np.array([math.ldexp(1.0, j) for j in range(1, N + 1)])
    GD = G * D
    root = math.sqrt(T)
    k_lo = math.floor(math.log2(GD[0])) + 1
    k_hi = math.ceil(math.log2(GD[-1] * root)) + 3
    S = []
    for k in range(k_lo, k_hi + 1):
        s = math.ldexp(1.0, k - 2)
        if np.any((GD <= s) & (s <= GD * root)):
            S.append(k)
    supports = {k: tuple(int(j) for j in np.flatnonzero(GD <= math.ldexp(1.0, k - 2))) for k in S}
    beta = {k: beta_of(k) for k in S}
    return ExpertGrid(N, float(G), int(T), D, tuple(S), beta, supports)


class MsMwC:
    """Multiplicative weights over a fixed support with a uniform rate and a
    squared-deviation correction."""

    def __init__(self, n: int, support, rate: float):
        if not rate > 0:
            raise ConfigError("rate must be positive")
        self.n = int(n)
        self.rate = float(rate)
        self.prior = SimplexPoint.uniform(self.n, support)

    @property
    def support(self):
        return self.prior.support

    def predict(self, hint) -> SimplexPoint:
        return entropy_step(self.prior, hint, self.rate)

    def correction(self, loss, hint) -> np.ndarray:
        d = np.asarray(loss, dtype=np.float64) - hint
        return 32.0 * self.rate * d * d

    def update(self, loss, hint) -> None:
        loss = np.asarray(loss, dtype=np.float64)
        self.prior = entropy_step(self.prior, loss + self.correction(loss, hint), self.rate)


@dataclass
class MetaRound:
    """Per-round meta diagnostics."""

    w: np.ndarray
    p: np.ndarray
    H: np.ndarray
    L: np.ndarray | None = None
    b: np.ndarray | None = None
    range_ok: bool = True


class MetaState:
    """Top distribution over scales ``k`` mixing one :class:`MsMwC` per scale.

    Rounds are split in two: :meth:`phase_a` takes the hints and returns the
    played weights over base learners, :meth:`phase_b` takes the losses.
    With ``on_range="record"`` out-of-range inputs are noted in
    ``range_violations`` instead of raising.
    """

    def __init__(self, grid: ExpertGrid, on_range: str = "raise"):
        if on_range not in ("raise", "record"):
            raise ConfigError("on_range must be 'raise' or 'record'")
        self.grid = grid
        self.on_range = on_range
        self.range_violations = 0
        self.ks = list(grid.S)
        self.rates = np.array([grid.beta[k] for k in self.ks])
        self.experts = [MsMwC(grid.N, grid.supports[k], 2.0 * grid.beta[k]) for k in self.ks]
        init = self.rates**2
        self.top = SimplexPoint(init / init.sum(), tuple(range(len(self.ks))))
        self._round: MetaRound | None = None
        self._wk = None
        self._h = None

    def _check_range(self, v, what: str) -> bool:
        bounds = self.grid.bounds
        bad = np.flatnonzero(np.abs(v) > bounds * (1.0 + RANGE_TOL))
        if bad.size == 0:
            return True
        if self.on_range == "raise":
            j = int(bad[0])
            raise LossRangeError(j + 1, float(v[j]), float(bounds[j]), what=what)
        self.range_violations += 1
        return False

    def phase_a(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=np.float64)
        ok = self._check_range(h, "hint")
        wk = [e.predict(h) for e in self.experts]
        H = np.array([float(w.weights @ h) for w in wk])
        p = entropy_step(self.top, H, self.rates).weights
        w = np.zeros(self.grid.N)
        for pk, wki in zip(p, wk):
            w += pk * wki.weights
        self._wk = wk
        self._h = h
        self._round = MetaRound(w, p, H, range_ok=ok)
        return w

    def phase_b(self, loss) -> MetaRound:
        if self._round is None:
            raise RuntimeError("phase_b() without a matching phase_a()")
        loss = np.asarray(loss, dtype=np.float64)
        rnd = self._round
        rnd.range_ok = self._check_range(loss, "loss") and rnd.range_ok
        L = np.array([float(w.weights @ loss) for w in self._wk])
        d = L - rnd.H
        b = 32.0 * self.rates * d * d
        self.top = entropy_step(self.top, L + b, self.rates)
        for e in self.experts:
            e.update(loss, self._h)
        rnd.L, rnd.b = L, b
        self._round = None
        self._wk = None
        return rnd


def meta_round(meta: MetaState, h, loss) -> np.ndarray:
    """Both phases in one call; returns the played weights."""
    w = meta.phase_a(h)
    meta.phase_b(loss)
    return w
