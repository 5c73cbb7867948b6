"""Optimistic online mirror descent with a Euclidean regularizer, used as the
reference line in regret comparisons."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .mathcore import DomainBall


class OptimisticOMD:
    """``x_t = P(x'_t - eta_t m_t)``, ``x'_{t+1} = P(x'_t - eta_t g_t)`` with
    ``eta_t = D / sqrt(delta + 4 G^2 + V_{t-1})``."""

    def __init__(self, dim: int, D: float, G: float, delta: float = 1.0, domain: DomainBall | None = None):
        if not (D > 0 and G > 0 and delta > 0):
            raise ConfigError("OMD needs positive D, G and delta")
        self.dim = int(dim)
        self.D = float(D)
        self.G = float(G)
        self.delta = float(delta)
        self.domain = DomainBall(D) if domain is None else domain
        self.anchor = np.zeros(self.dim)
        self.m = np.zeros(self.dim)
        self.V = 0.0
        self.eta = None
        self.t = 0
        self._x = None

    def step_size(self) -> float:
        return self.D / math.sqrt(self.delta + 4.0 * self.G**2 + self.V)

    def predict(self) -> np.ndarray:
        self.eta = self.step_size()
        self._x = self.domain.project(self.anchor - self.eta * self.m)
        return self._x

    def observe(self, g) -> None:
        if self._x is None:
            raise RuntimeError("observe() without a matching predict()")
        g = np.asarray(g, dtype=np.float64)
        self.anchor = self.domain.project(self.anchor - self.eta * g)
        d = g - self.m
        self.V += float(d @ d)
        self.m = g
        self.t += 1
        self._x = None

    def round(self, grad_fn) -> np.ndarray:
        x = self.predict()
        self.observe(grad_fn(x))
        return x
