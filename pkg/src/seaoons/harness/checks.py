"""Randomised checks of the inequalities the learners rely on.

Each check returns counts of instances and violations plus the worst margin
(``rhs - lhs``; negative beyond the slack means a violation). Failures are
data, never exceptions.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..cla_oons import ClaOons
from ..mathcore import DomainBall, quad_bregman, quad_bregman_step
from ..oons import Oons, StepSizePolicy
from ..sea_env import EnvSpec, make_env
from .config import RunConfig
from .runner import SLACK, guard_value, stability_margin, variation_check


@dataclasses.dataclass
class CheckResult:
    name: str
    instances: int = 0
    violations: int = 0
    worst_margin: float = math.inf

    def add(self, margin: float, tol: float = SLACK) -> None:
        self.instances += 1
        self.worst_margin = min(self.worst_margin, margin)
        if margin < -tol:
            self.violations += 1

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _spd(rng, d):
    M = rng.standard_normal((d, d))
    return M @ M.T + rng.uniform(0.05, 2.0) * np.eye(d)


def _in_ball(rng, d, R):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v) * R * rng.uniform() ** (1.0 / d)


def check_bregman_prox(rng, n: int) -> CheckResult:
    """``<l, x+ - u> <= D(u, a) - D(u, x+) - D(a, x+)`` for the ball step."""
    res = CheckResult("bregman_prox")
    for _ in range(n):
        d = int(rng.integers(1, 5))
        A = _spd(rng, d)
        R = float(rng.uniform(0.2, 3.0))
        a = _in_ball(rng, d, R)
        lin = rng.standard_normal(d) * rng.choice([0.1, 1.0, 10.0])
        xp = quad_bregman_step(A, a, lin, DomainBall(R))
        u = _in_ball(rng, d, R)
        lhs = float(lin @ (xp - u))
        rhs = quad_bregman(A, u, a) - quad_bregman(A, u, xp) - quad_bregman(A, a, xp)
        res.add(rhs - lhs, SLACK * max(1.0, abs(rhs)))
    return res


def check_sqrt_sum(rng, n: int) -> CheckResult:
    """``sum s_t / sqrt(S_t) <= 2 sqrt(S_T)`` for nonnegative sequences."""
    res = CheckResult("sqrt_sum")
    for i in range(n):
        T = int(rng.integers(1, 200))
        s = rng.exponential(size=T) * (rng.random(T) < rng.uniform(0.2, 1.0))
        if i % 10 == 0:
            s[: T // 2] = 0.0
        S = np.cumsum(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(s > 0, s / np.sqrt(S), 0.0)
        lhs = float(terms.sum())
        rhs = 2.0 * math.sqrt(float(S[-1]))
        res.add(rhs - lhs, SLACK * max(1.0, rhs))
    return res


def _random_spec(rng, base: EnvSpec | None, T: int, seed: int) -> EnvSpec:
    if base is not None and base.family != "cell":
        return dataclasses.replace(base, T=T, seed=seed, radius=min(base.radius, 4.0))
    fam = ["quadratic", "linear", "sign"][int(rng.integers(0, 3))]
    d = int(rng.integers(1, 4))
    kw = dict(family=fam, dim=d, T=T, seed=seed, radius=float(rng.uniform(0.5, 3.0)),
              center=tuple(rng.uniform(-1, 1, d)), drift=float(rng.uniform(0, 0.5)),
              period=float(rng.integers(2, 20)))
    if fam == "quadratic":
        kw.update(noise=float(rng.uniform(0, 1)), curvature=float(rng.uniform(0.2, 2)),
                  curvature_amp=float(rng.uniform(0, 0.5)))
    elif fam == "linear":
        kw.update(noise=float(rng.uniform(0, 1)))
    else:
        kw.update(schedule=["alternate", "blocks", "random"][int(rng.integers(0, 3))],
                  block=int(rng.integers(1, 5)))
    return EnvSpec(**kw)


def check_trajectories(rng, n: int, base: EnvSpec | None = None, rounds: int = 16):
    """OONS trajectories: per-round stability sandwich, guard, and the pathwise
    split of the gradient variation."""
    lower = CheckResult("stability_lower")
    upper = CheckResult("stability_upper")
    guard = CheckResult("guard")
    variation = CheckResult("gradient_variation")
    for k in range(n):
        spec = _random_spec(rng, base, rounds, seed=int(rng.integers(0, 2**31)))
        env = make_env(spec, trial=k)
        D = spec.radius
        G = env.G_bound(D)
        alg = Oons(spec.dim, DomainBall(D), StepSizePolicy.known_dg(D, G))
        m = np.zeros(spec.dim)
        xs = np.empty((rounds, spec.dim))
        gs = np.empty((rounds, spec.dim))
        for t in range(1, rounds + 1):
            orc = env.round_sample(t)
            x = alg.predict(m)
            g = orc.grad(x)
            alg.update(g)
            lhs, rhs, tol = stability_margin(alg.last)
            lower.add(lhs, tol)
            upper.add(rhs - lhs, tol)
            guard.add(0.5 - guard_value(alg.last), 1e-9)
            xs[t - 1], gs[t - 1] = x, g
            m = g
        v = variation_check(env, xs, gs)
        variation.add(v["rhs"] - v["lhs"], SLACK * max(1.0, v["rhs"]))
    return [lower, upper, guard, variation]


def check_truncation(rng, n: int, rounds: int = 32):
    """Scale-free learner: truncation contract and the telescoping bound."""
    trunc = CheckResult("truncation")
    tele = CheckResult("truncation_telescoping")
    for _ in range(n):
        d = int(rng.integers(1, 4))
        alg = ClaOons(d, B0=float(rng.uniform(0.1, 2.0)))
        scale = rng.exponential(size=rounds) * rng.choice([0.1, 1.0, 10.0, 100.0])
        tsum = 0.0
        mx = 0.0
        for t in range(rounds):
            g = rng.standard_normal(d) * scale[t]
            alg.round(lambda x: g)
            r = alg.last
            dev = float(np.linalg.norm(r.g - r.m))
            trunc.add(r.B_prev - float(np.linalg.norm(r.g_trunc - r.m)), 1e-12 * max(1.0, r.B_prev))
            tsum += (r.B - r.B_prev) / r.B * dev
            mx = max(mx, dev)
        tele.add(2.0 * mx - tsum, SLACK * max(1.0, mx))
    return [trunc, tele]


def check_suite(cfg: RunConfig | None = None, instances: int = 1000, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed if cfg is None else [seed, cfg.seed])
    base = None if cfg is None else cfg.env
    results = [check_bregman_prox(rng, instances), check_sqrt_sum(rng, instances)]
    results += check_trajectories(rng, instances, base)
    results += check_truncation(rng, max(1, instances // 10))
    out = {r.name: r.as_dict() for r in results}
    return {"checks": out, "violations": sum(r.violations for r in results)}
