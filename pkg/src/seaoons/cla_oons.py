"""Comparator- and Lipschitz-adaptive OONS: gradient truncation against a
running scale, and a doubling test on the domain radius that restarts the
inner learner."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .mathcore import DomainBall
from .oons import Oons, StepSizePolicy


def truncate_gradient(g, m, B_prev: float, B_curr: float) -> np.ndarray:
    """``m + (B_prev / B_curr) (g - m)``; keeps ``||g~ - m|| <= B_prev``."""
    g = np.asarray(g, dtype=np.float64)
    if B_curr == B_prev:
        return g.copy()
    return m + (B_prev / B_curr) * (g - m)


@dataclass
class ClaRecord:
    t: int
    x: np.ndarray
    g: np.ndarray
    g_trunc: np.ndarray
    m: np.ndarray
    B_prev: float
    B: float
    D: float  # radius the round was played on
    D_next: float
    eta: float
    reset: bool


class ClaOons:
    """Needs neither a diameter nor a Lipschitz bound.

    Starts on the unit ball with scale ``B0``. Call :meth:`predict`, play the
    point, then :meth:`observe` the raw gradient.
    """

    def __init__(self, dim: int, B0: float = 1.0, keep_records: bool = False):
        if not B0 > 0:
            raise ConfigError("B0 must be positive")
        self.dim = int(dim)
        self.B0 = float(B0)
        self.B = float(B0)
        self.D = 1.0
        self.inner = Oons(self.dim, DomainBall(self.D), StepSizePolicy.segment_local(), z_first=self.B0)
        self.m = np.zeros(self.dim)
        self.dd_sum = 0.0
        self.max_norm = 1.0
        self.reset_count = 0
        self.reset_rounds: list[int] = []
        self.t = 0
        self.keep_records = keep_records
        self.records: list[ClaRecord] = []
        self.last: ClaRecord | None = None
        self._x = None

    def predict(self) -> np.ndarray:
        self._x = self.inner.predict(self.m, self.B)
        return self._x

    def doubling_check(self, g) -> float | None:
        """Fold ``||g||`` into the running sum; return the new radius on a trip."""
        n = float(np.linalg.norm(g))
        self.max_norm = max(self.max_norm, n)
        self.dd_sum += n / self.max_norm
        root = math.sqrt(self.dd_sum)
        if self.D < root:
            return 2.0 * root
        return None

    def observe(self, g) -> None:
        if self._x is None:
            raise RuntimeError("observe() without a matching predict()")
        g = np.asarray(g, dtype=np.float64)
        self.t += 1
        D_used = self.D
        B_prev = self.B
        B = max(B_prev, float(np.linalg.norm(g - self.m)))
        gt = truncate_gradient(g, self.m, B_prev, B)
        self.B = B
        new_D = self.doubling_check(g)
        eta = self.inner.eta
        self.inner.update(gt)
        if new_D is not None:
            # the restart overrides the update just made; it affects the next round only
            self.D = new_D
            self.inner.reset_segment(DomainBall(new_D), B, self.t + 1)
            self.reset_count += 1
            self.reset_rounds.append(self.t)
        rec = ClaRecord(self.t, self._x, g, gt, self.m, B_prev, B, D_used, self.D, eta, new_D is not None)
        self.last = rec
        if self.keep_records:
            self.records.append(rec)
        self.m = g
        self._x = None

    def round(self, grad_fn) -> np.ndarray:
        x = self.predict()
        self.observe(grad_fn(x))
        return x
