"""Optimistic Online Newton Step with adaptive step sizes and segment resets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .mathcore import DomainBall, QuadAccumulator, eig_of, quad_bregman_step

KNOWN_DG = "known_dg"
PER_EXPERT = "per_expert"
SEGMENT_LOCAL = "segment_local"


@dataclass(frozen=True)
class StepSizePolicy:
    """Adaptive step-size rule.

    ``known_dg`` and ``per_expert`` share the formula
    ``min{1/(64 D z_T), 1/(D sqrt(S))}`` with the constant hint ``z_T = 2G``;
    they differ only in which diameter is plugged in. ``segment_local`` uses
    ``min{1/(64 D_t z_t), 1/sqrt(S)}`` with the current ball radius and hint,
    where ``S`` only covers rounds since the last reset.
    """

    kind: str
    D: float | None = None
    G: float | None = None

    def __post_init__(self):
        if self.kind not in (KNOWN_DG, PER_EXPERT, SEGMENT_LOCAL):
            raise ConfigError(f"unknown step-size policy {self.kind!r}")
        if self.kind != SEGMENT_LOCAL:
            if self.D is None or self.G is None or not (self.D > 0 and self.G > 0):
                raise ConfigError("step-size policy needs positive D and G")

    @classmethod
    def known_dg(cls, D: float, G: float) -> "StepSizePolicy":
        return cls(KNOWN_DG, float(D), float(G))

    @classmethod
    def per_expert(cls, D_j: float, G: float) -> "StepSizePolicy":
        return cls(PER_EXPERT, float(D_j), float(G))

    @classmethod
    def segment_local(cls) -> "StepSizePolicy":
        return cls(SEGMENT_LOCAL)

    @property
    def fixed_hint(self) -> float | None:
        """The constant range hint 2G, or None for the segment-local rule."""
        return None if self.kind == SEGMENT_LOCAL else 2.0 * self.G

    def eta(self, sq_dev_sum: float, z_t: float, radius: float) -> float:
        if self.kind == SEGMENT_LOCAL:
            first = 1.0 / (64.0 * radius * z_t)
            second = 1.0 / math.sqrt(sq_dev_sum) if sq_dev_sum > 0 else math.inf
        else:
            first = 1.0 / (64.0 * self.D * 2.0 * self.G)
            second = 1.0 / (self.D * math.sqrt(sq_dev_sum)) if sq_dev_sum > 0 else math.inf
        return min(first, second)


def surrogate_gradient(x, g, m, eta: float) -> np.ndarray:
    """``g + 32 eta <x, g - m> (g - m)``."""
    dev = np.asarray(g, dtype=np.float64) - m
    return g + (32.0 * eta * float(np.dot(x, dev))) * dev


@dataclass
class OonsStep:
    """Everything one round touched; consumed by the invariant checks."""

    t: int
    x: np.ndarray
    anchor: np.ndarray
    anchor_next: np.ndarray
    A: np.ndarray
    eta: float
    z: float
    m: np.ndarray
    g: np.ndarray
    nabla: np.ndarray
    radius: float


class Oons:
    """One OONS learner on a ball domain.

    Call :meth:`predict` with the hint ``m_t`` (and range hint ``z_t``) to get
    ``x_t``, then :meth:`update` with the observed gradient. Under the
    segment-local policy the gradient passed to ``update`` is the truncated one.
    """

    def __init__(self, dim: int, domain: DomainBall, policy: StepSizePolicy, z_first: float | None = None):
        if z_first is None:
            z_first = policy.fixed_hint
        if z_first is None or not z_first > 0:
            raise ConfigError("z_first must be positive")
        self.dim = int(dim)
        self.domain = domain
        self.policy = policy
        self.z_first = float(z_first)
        self.z_current = float(z_first)
        self.acc = QuadAccumulator(self.dim, 4.0 * self.z_first**2)
        self.anchor = np.zeros(self.dim)
        self.eta = None
        self.sq_dev_sum = 0.0
        self.segment_start = 1
        self.t = 0
        self.last: OonsStep | None = None
        self._pending = None

    def step_size(self, z_t: float) -> float:
        return self.policy.eta(self.sq_dev_sum, z_t, self.domain.radius)

    def predict(self, m, z: float | None = None) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        if z is None:
            z = self.policy.fixed_hint
            if z is None:
                raise ConfigError("segment-local policy needs an explicit range hint")
        z = float(z)
        if z < self.z_current * (1.0 - 1e-12):
            raise ValueError(f"range hint decreased within a segment: {z} < {self.z_current}")
        eta = self.step_size(z)
        self.acc.ridge = 4.0 * eta * z * z
        A = self.acc.materialize()
        eig = eig_of(A)
        x = quad_bregman_step(A, self.anchor, m, self.domain, eig=eig)
        self.eta = eta
        self._pending = (m, z, eta, A, eig, x)
        return x

    def update(self, g) -> np.ndarray:
        if self._pending is None:
            raise RuntimeError("update() without a matching predict()")
        m, z, eta, A, eig, x = self._pending
        self._pending = None
        g = np.asarray(g, dtype=np.float64)
        nabla = surrogate_gradient(x, g, m, eta)
        nxt = quad_bregman_step(A, self.anchor, nabla, self.domain, eig=eig)
        self.t += 1
        self.last = OonsStep(self.t, x, self.anchor, nxt, A, eta, z, m, g, nabla, self.domain.radius)
        self.acc.add(eta, nabla - m)
        dev = g - m
        self.sq_dev_sum += float(dev @ dev)
        self.anchor = nxt
        self.z_current = z
        return nxt

    def reset_segment(self, new_domain: DomainBall, new_z_first: float, t: int) -> None:
        """Restart the regularizer: anchor 0, empty rank-one sum, base ``4 z^2``."""
        self.domain = new_domain
        self.z_first = float(new_z_first)
        self.z_current = float(new_z_first)
        self.acc.clear(4.0 * self.z_first**2)
        self.anchor = np.zeros(self.dim)
        self.sq_dev_sum = 0.0
        self.segment_start = int(t)
        self._pending = None


def step_size(policy: StepSizePolicy, state: Oons, z_t: float | None = None) -> float:
    if z_t is None:
        z_t = policy.fixed_hint
    return policy.eta(state.sq_dev_sum, z_t, state.domain.radius)
