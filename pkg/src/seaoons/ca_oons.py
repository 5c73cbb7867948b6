"""Comparator-adaptive stack: OONS base learners on nested balls mixed by the
meta layer."""

from __future__ import annotations

import numpy as np

from .hedge import ExpertGrid, MetaState, build_grid
from .mathcore import DomainBall
from .oons import Oons, StepSizePolicy


class CaOons:
    """``N`` OONS learners with radii ``D_j = 2^j`` combined by :class:`MetaState`.

    Base ``j`` lives on ``DomainBall(min(D_j, R))`` where ``R`` is the outer
    domain radius (infinite by default). Each round needs one gradient per
    base point, all taken from the same sampled loss.
    """

    def __init__(
        self,
        G: float,
        T: int,
        dim: int,
        domain: DomainBall | None = None,
        n_learners: int | None = None,
        on_range: str = "raise",
    ):
        self.domain = DomainBall() if domain is None else domain
        self.grid: ExpertGrid = build_grid(G, T, n_learners)
        self.dim = int(dim)
        self.bases = [
            Oons(self.dim, self.domain.intersect(DomainBall(Dj)), StepSizePolicy.per_expert(Dj, G))
            for Dj in self.grid.diameters
        ]
        self.meta = MetaState(self.grid, on_range=on_range)
        N = self.grid.N
        self.hints = np.zeros((N, self.dim))
        self.points = np.zeros((N, self.dim))
        self.weights = np.zeros(N)
        self.t = 0
        self.last_meta = None

    @property
    def N(self) -> int:
        return self.grid.N

    def predict(self) -> np.ndarray:
        for j, base in enumerate(self.bases):
            self.points[j] = base.predict(self.hints[j])
        h = np.einsum("ij,ij->i", self.hints, self.points)
        self.weights = self.meta.phase_a(h)
        return self.weights @ self.points

    def observe(self, grads) -> None:
        grads = np.asarray(grads, dtype=np.float64).reshape(self.N, self.dim)
        loss = np.einsum("ij,ij->i", grads, self.points)
        self.last_meta = self.meta.phase_b(loss)
        for j, base in enumerate(self.bases):
            base.update(grads[j])
        self.hints = grads.copy()
        self.t += 1

    def round(self, grad_fn) -> np.ndarray:
        """Play one round against ``grad_fn(x)``; returns the decision."""
        x = self.predict()
        self.observe([grad_fn(p) for p in self.points])
        return x

    def top_base(self) -> int:
        """0-based index of the base with the largest meta weight."""
        return int(np.argmax(self.weights))
