"""Round loop, comparator, regret traces and run summaries."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..baseline import OptimisticOMD
from ..ca_oons import CaOons
from ..cla_oons import ClaOons
from ..errors import ComparatorError, ConfigError
from ..mathcore import DomainBall
from ..oons import Oons, OonsStep, StepSizePolicy
from ..sea_env import SeaEnv, make_env, variance_report
from .config import RunConfig

CSV_HEADER = "t,regret_cum,loss_play,loss_comp,eta,aux1,aux2,flag"

FLAG_GUARD = 1
FLAG_STABILITY = 2
FLAG_FEASIBILITY = 4
FLAG_TRUNCATION = 8
FLAG_LOSS_RANGE = 16
FLAG_ETA_MONOTONE = 32
FLAG_STEP_CAP = 64
FLAG_NAMES = {
    FLAG_GUARD: "guard",
    FLAG_STABILITY: "stability",
    FLAG_FEASIBILITY: "feasibility",
    FLAG_TRUNCATION: "truncation",
    FLAG_LOSS_RANGE: "loss_range",
    FLAG_ETA_MONOTONE: "eta_monotone",
    FLAG_STEP_CAP: "step_cap",
}
AUX_COLUMNS = {
    "oons": ("z_t", "norm_x"),
    "ca_oons": ("top_base", "norm_x"),
    "cla_oons": ("B_t", "D_t"),
    "omd_baseline": ("V_bar", "norm_x"),
}

FEAS_TOL = 1e-9
SLACK = 1e-8


def fmt(v) -> str:
    return "%.17g" % v


def stability_margin(step: OonsStep) -> tuple[float, float, float]:
    """``(lhs, rhs, tol)`` for ``0 <= <x_t - x'_{t+1}, nabla - m> <= 2 ||nabla - m||^2_{A^-1}``."""
    dv = step.nabla - step.m
    lhs = float((step.x - step.anchor_next) @ dv)
    rhs = 2.0 * float(dv @ np.linalg.solve(step.A, dv))
    return lhs, rhs, SLACK * max(1.0, abs(rhs))


def guard_value(step: OonsStep) -> float:
    return abs(32.0 * step.eta * float(step.x @ (step.g - step.m)))


def step_flags(step: OonsStep, diameter: float, z_cap: float, prev_eta, checks: bool) -> int:
    flag = 0
    R = step.radius
    if math.isfinite(R):
        if guard_value(step) > 0.5 + 1e-9:
            flag |= FLAG_GUARD
        if 64.0 * step.eta * diameter * z_cap > 1.0 + 1e-12:
            flag |= FLAG_STEP_CAP
        lim = R * (1.0 + FEAS_TOL)
        if np.linalg.norm(step.x) > lim or np.linalg.norm(step.anchor_next) > lim:
            flag |= FLAG_FEASIBILITY
    if prev_eta is not None and step.eta > prev_eta * (1.0 + 1e-12):
        flag |= FLAG_ETA_MONOTONE
    if checks:
        lhs, rhs, tol = stability_margin(step)
        if lhs < -tol or lhs > rhs + tol:
            flag |= FLAG_STABILITY
    return flag


@dataclass
class Play:
    x: np.ndarray
    g: np.ndarray | None
    eta: float
    aux1: float
    aux2: float
    flag: int


class OonsDriver:
    def __init__(self, cfg: RunConfig, env: SeaEnv):
        L = cfg.learner
        self.D, self.G = float(L.D), float(L.G)
        self.alg = Oons(env.dim, DomainBall(self.D), StepSizePolicy.known_dg(self.D, self.G))
        self.m = np.zeros(env.dim)
        self.prev_eta = None
        self.checks = cfg.checks

    def play(self, orc) -> Play:
        x = self.alg.predict(self.m)
        g = orc.grad(x)
        self.alg.update(g)
        st = self.alg.last
        flag = step_flags(st, self.D, 2.0 * self.G, self.prev_eta, self.checks)
        self.prev_eta = st.eta
        self.m = g
        return Play(x, g, st.eta, st.z, float(np.linalg.norm(x)), flag)


class CaDriver:
    def __init__(self, cfg: RunConfig, env: SeaEnv):
        L = cfg.learner
        self.G = float(L.G)
        self.alg = CaOons(self.G, env.T, env.dim, DomainBall(env.spec.radius), L.n_learners, on_range="record")
        self.prev_eta = [None] * self.alg.N
        self.checks = cfg.checks

    def play(self, orc) -> Play:
        alg = self.alg
        x = alg.predict()
        alg.observe([orc.grad(p) for p in alg.points])
        flag = 0 if alg.last_meta.range_ok else FLAG_LOSS_RANGE
        for j, base in enumerate(alg.bases):
            st = base.last
            flag |= step_flags(st, alg.grid.diameters[j], 2.0 * self.G, self.prev_eta[j], self.checks)
            self.prev_eta[j] = st.eta
        top = alg.top_base()
        return Play(x, None, alg.bases[top].last.eta, top + 1, float(np.linalg.norm(x)), flag)


class ClaDriver:
    def __init__(self, cfg: RunConfig, env: SeaEnv):
        self.alg = ClaOons(env.dim, cfg.learner.B0)
        self.prev_eta = None
        self.checks = cfg.checks

    def play(self, orc) -> Play:
        alg = self.alg
        x = alg.round(orc.grad)
        rec = alg.last
        st = alg.inner.last
        flag = step_flags(st, rec.D, rec.B_prev, self.prev_eta, self.checks)
        if np.linalg.norm(rec.g_trunc - rec.m) > rec.B_prev * (1.0 + 1e-12):
            flag |= FLAG_TRUNCATION
        self.prev_eta = None if rec.reset else st.eta
        return Play(x, rec.g, rec.eta, rec.B, rec.D, flag)


class OmdDriver:
    def __init__(self, cfg: RunConfig, env: SeaEnv):
        L = cfg.learner
        self.alg = OptimisticOMD(env.dim, L.D, L.G, L.delta)
        self.prev_eta = None

    def play(self, orc) -> Play:
        alg = self.alg
        x = alg.round(orc.grad)
        flag = 0
        if not alg.domain.contains(x, FEAS_TOL) or not alg.domain.contains(alg.anchor, FEAS_TOL):
            flag |= FLAG_FEASIBILITY
        if self.prev_eta is not None and alg.eta > self.prev_eta * (1.0 + 1e-12):
            flag |= FLAG_ETA_MONOTONE
        self.prev_eta = alg.eta
        return Play(x, alg.m, alg.eta, alg.V, float(np.linalg.norm(x)), flag)


DRIVERS = {"oons": OonsDriver, "ca_oons": CaDriver, "cla_oons": ClaDriver, "omd_baseline": OmdDriver}


def report_radius(cfg: RunConfig) -> float:
    """Radius of the ball the comparator is chosen from."""
    R = cfg.env.radius
    if cfg.learner.name in ("oons", "omd_baseline"):
        R = min(R, float(cfg.learner.D))
    return R


def learner_radius(cfg: RunConfig) -> float:
    if cfg.learner.name in ("oons", "omd_baseline"):
        return float(cfg.learner.D)
    if cfg.learner.name == "ca_oons":
        return cfg.env.radius
    return math.inf


def config_flags(cfg: RunConfig, env: SeaEnv) -> list[str]:
    """Mismatches between the environment and what the learner assumes."""
    flags = []
    if cfg.learner.G is not None and cfg.learner.name != "cla_oons":
        Gt = env.G_bound(learner_radius(cfg))
        if not math.isfinite(Gt):
            flags.append("unbounded_gradient")
        elif Gt > cfg.learner.G * (1.0 + 1e-12):
            flags.append("G_underestimated")
    return flags


def compute_comparator(env: SeaEnv, radius: float, method: str = "auto") -> np.ndarray:
    """Minimiser of ``sum_t F_t`` over the ball of ``radius``."""
    dom = DomainBall(radius)
    fam = env.spec.family
    if fam == "cell":
        return np.zeros(1)
    if method == "auto" or env.L == 0.0:
        if fam == "quadratic":
            a = env._a[1:]
            return dom.project((a @ env._vec[1:]) / a.sum())
        s = env._vec[1:].sum(axis=0)
        n = float(np.linalg.norm(s))
        if n == 0.0:
            return np.zeros(env.dim)
        if not dom.bounded:
            raise ComparatorError("comparator failure: linear losses are unbounded below on R^d")
        return -radius * s / n
    step = 1.0 / (env.L * env.T)
    x = np.zeros(env.dim)
    for _ in range(500):
        nxt = dom.project(x - step * env.expected_grad_sum(x))
        if not np.all(np.isfinite(nxt)):
            raise ComparatorError("comparator failure: projected gradient diverged")
        done = float(np.linalg.norm(nxt - x)) <= 1e-8
        x = nxt
        if done:
            break
    return x


@dataclass
class TrialResult:
    trial: int
    path: str
    regret: np.ndarray
    pseudo_final: float
    comparator: list
    flag_counts: dict
    flagged_rounds: int
    extra: dict


def _trace_name(cfg: RunConfig, trial: int) -> str:
    return f"trace_{cfg.learner.name}_seed{cfg.seed}_trial{trial}.csv"


def variation_check(env: SeaEnv, xs: np.ndarray, gs: np.ndarray) -> dict:
    """Pathwise split of ``sum ||g_t - g_{t-1}||^2`` into noise, drift and motion."""
    T = xs.shape[0]
    lhs = float(np.sum((gs[1:] - gs[:-1]) ** 2)) + float(gs[0] @ gs[0])
    drift = 0.0
    noise = 0.0
    for t in range(1, T + 1):
        x = xs[t - 1]
        d = gs[t - 1] - env.expected_grad(t, x)
        noise += float(d @ d)
        if t >= 2:
            xp = xs[t - 2]
            e = env.expected_grad(t, xp) - env.expected_grad(t - 1, xp)
            drift += float(e @ e)
    motion = float(np.sum((xs[1:] - xs[:-1]) ** 2))
    G2 = float(gs[0] @ gs[0])
    rhs = G2 + 4.0 * drift + 8.0 * noise + 4.0 * env.L**2 * motion
    return {"lhs": lhs, "rhs": rhs, "ok": lhs <= rhs + SLACK * max(1.0, rhs)}


def run_trial(cfg: RunConfig, trial: int, out_dir: str | None = None) -> TrialResult:
    env = make_env(cfg.env, trial)
    u = compute_comparator(env, report_radius(cfg), cfg.comparator)
    drv = DRIVERS[cfg.learner.name](cfg, env)
    T = env.T
    regret = np.empty(T)
    cum = 0.0
    pseudo = 0.0
    lines = [CSV_HEADER]
    counts = {name: 0 for name in FLAG_NAMES.values()}
    flagged = 0
    track = cfg.checks and cfg.learner.name != "ca_oons"
    xs = np.empty((T, env.dim)) if track else None
    gs = np.empty((T, env.dim)) if track else None
    for t in range(1, T + 1):
        orc = env.round_sample(t)
        p = drv.play(orc)
        lp = orc.value(p.x)
        lc = orc.value(u)
        cum += lp - lc
        pseudo += orc.expected_value(p.x) - orc.expected_value(u)
        regret[t - 1] = cum
        if track:
            xs[t - 1] = p.x
            gs[t - 1] = p.g
        if p.flag:
            flagged += 1
            for bit, name in FLAG_NAMES.items():
                if p.flag & bit:
                    counts[name] += 1
        lines.append(f"{t},{fmt(cum)},{fmt(lp)},{fmt(lc)},{fmt(p.eta)},{fmt(p.aux1)},{fmt(p.aux2)},{p.flag}")
    extra = {}
    if track:
        extra["variation_check"] = variation_check(env, xs, gs)
    if cfg.learner.name == "cla_oons":
        extra["resets"] = drv.alg.reset_count
        extra["reset_rounds"] = list(drv.alg.reset_rounds)
    if cfg.learner.name == "ca_oons":
        extra["loss_range_violations"] = drv.alg.meta.range_violations
    path = ""
    if out_dir is not None:
        path = os.path.join(out_dir, _trace_name(cfg, trial))
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    return TrialResult(trial, path, regret, pseudo, [float(v) for v in u], counts, flagged, extra)


def _trial_job(args):
    cfg, trial, out_dir = args
    return run_trial(cfg, trial, out_dir)


@dataclass
class RunResult:
    summary: dict
    trials: list
    summary_path: str
    plot_path: str | None

    @property
    def violations(self) -> int:
        return self.summary["violations"]


def run(cfg: RunConfig, out_dir: str | None = None) -> RunResult:
    out_dir = cfg.out_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(cfg, k, out_dir) for k in range(cfg.trials)]
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    env0 = make_env(cfg.env, 0)
    rep = variance_report(env0, report_radius(cfg), cfg.mc_samples)
    finals = [float(r.regret[-1]) for r in results]
    counts = {name: sum(r.flag_counts[name] for r in results) for name in FLAG_NAMES.values()}
    variation = [r.extra["variation_check"] for r in results if "variation_check" in r.extra]
    violations = sum(counts.values()) + sum(1 for v in variation if not v["ok"])
    summary = {
        "config": cfg.to_dict(),
        "aux_columns": list(AUX_COLUMNS[cfg.learner.name]),
        "config_flags": config_flags(cfg, env0),
        "comparator": [r.comparator for r in results],
        "report_radius": report_radius(cfg),
        "variance": rep.summary(),
        "final_regret": finals,
        "mean_final_regret": float(np.mean(finals)),
        "std_final_regret": float(np.std(finals, ddof=1)) if len(finals) > 1 else 0.0,
        "pseudo_regret": [r.pseudo_final for r in results],
        "mean_pseudo_regret": float(np.mean([r.pseudo_final for r in results])),
        "flag_counts": counts,
        "flagged_rounds": sum(r.flagged_rounds for r in results),
        "violations": violations,
        "traces": [os.path.basename(r.path) for r in results],
        "trial_extra": [r.extra for r in results],
    }
    spath = os.path.join(out_dir, "summary.json")
    with open(spath, "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    ppath = None
    if cfg.plot:
        from .svg import regret_svg

        mean = np.mean([r.regret for r in results], axis=0)
        ppath = os.path.join(out_dir, "regret.svg")
        with open(ppath, "w") as fh:
            fh.write(regret_svg([(cfg.learner.name, np.arange(1, mean.size + 1), mean)], loglog=cfg.loglog))
    return RunResult(summary, results, spath, ppath)


def _clean(v):
    """Plain JSON: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def read_trace(path: str) -> dict:
    """Columns of a trace CSV as numpy arrays."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: not a regret trace (header {header!r})")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(CSV_HEADER.split(","))}
