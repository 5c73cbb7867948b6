"""Acceptance criteria, one test per criterion. Each prints a PASS/FAIL line."""

import filecmp
import math
import os
import time

import numpy as np
import pytest

import oracles
import scripted as sc
from seaoons.ca_oons import CaOons
from seaoons.cla_oons import ClaOons
from seaoons.harness import cli
from seaoons.harness.checks import check_suite
from seaoons.harness.config import load_config
from seaoons.harness.runner import run_trial
from seaoons.harness.svg import loglog_slope
from seaoons.mathcore import DomainBall, QuadAccumulator, eig_of, quad_bregman_step, solve_eig
from seaoons.oons import Oons, StepSizePolicy
from seaoons.sea_env import EnvSpec, make_env, variance_report

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def quadratic_text(T, noise, curvature, center, D, G, extra=""):
    return (
        f'[env]\nfamily="quadratic"\ndim={len(center)}\nT={T}\nnoise={noise}\ncurvature={curvature}\n'
        f"center={list(center)}\nradius={D}\n{extra}\n"
        f'[learner]\nname="oons"\nD={D}\nG={G}\n[run]\nchecks=false\n'
    )


def test_criterion_01_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    ca = CaOons(sc.CA_G, sc.CA_T, 2, n_learners=sc.CA_N)
    xs, pts = [], []
    for t in range(1, sc.CA_T + 1):
        xs.append(ca.predict())
        pts.append(ca.points.copy())
        ca.observe([sc.ca_grad(t, p) for p in ca.points])
    cla = ClaOons(2, keep_records=True)
    for t in range(1, sc.CLA_T + 1):
        cla.round(lambda x: sc.cla_grad(t, x))
    elapsed = time.perf_counter() - t0
    ref_ca = oracles.ca_transcript(sc.ca_grad, sc.CA_T, 2, sc.CA_G, sc.CA_N)
    ref_cla = oracles.cla_transcript(sc.cla_grad, sc.CLA_T, 2)
    err = max(
        np.abs(np.array(xs) - ref_ca["x"]).max(),
        np.abs(np.array(pts) - ref_ca["points"]).max(),
        np.abs(np.array([r.x for r in cla.records]) - ref_cla["x"]).max(),
    )
    ok = err <= 1e-9 and elapsed < 1.0
    verdict(1, "oracle equivalence", ok, f"max coordinate error {err:.2e} (<= 1e-9), {elapsed:.2f}s (< 1s)")


def test_criterion_02_invariant_suite(verdict):
    t0 = time.perf_counter()
    rep = check_suite(instances=1000, seed=2024)
    elapsed = time.perf_counter() - t0
    checks = rep["checks"]
    per = {k: checks[k]["instances"] for k in ("bregman_prox", "stability_lower", "stability_upper",
                                               "sqrt_sum", "gradient_variation")}
    ok = rep["violations"] == 0 and min(per.values()) >= 1000 and elapsed < 30
    verdict(2, "invariant suite", ok, f"violations {rep['violations']}, instances {per}, {elapsed:.1f}s (< 30s)")


def test_criterion_03_step_size_hypotheses(verdict):
    matrix = []
    for D in (0.5, 1.0, 4.0):
        matrix += [
            EnvSpec("quadratic", dim=2, T=8192, noise=0.3, curvature=0.7, center=(0.2, -0.4), drift=0.2, radius=D, seed=1),
            EnvSpec("linear", dim=3, T=8192, noise=0.5, center=(0.3, 0.1, -0.2), drift=0.4, radius=D, seed=2),
            EnvSpec("sign", dim=2, T=8192, schedule="random", center=(1.0, 2.0), radius=D, seed=3),
            EnvSpec("cell", T=8192, n_cells=16, radius=D, seed=4),
        ]
    matrix.append(EnvSpec("quadratic", dim=1, T=8192, noise=1.0, curvature_amp=0.5, period=33, radius=2.0, seed=5))
    t0 = time.perf_counter()
    rounds = cap_bad = guard_bad = 0
    worst_cap = worst_guard = 0.0
    for spec in matrix:
        env = make_env(spec)
        D = spec.radius
        policy = StepSizePolicy.known_dg(D, env.G_bound(D))
        alg = Oons(spec.dim, DomainBall(D), policy)
        z = policy.fixed_hint
        m = np.zeros(spec.dim)
        for t in range(1, spec.T + 1):
            orc = env.round_sample(t)
            x = alg.predict(m)
            g = orc.grad(x)
            alg.update(g)
            cap = 64 * alg.last.eta * D * z
            guard = abs(32 * alg.last.eta * float(x @ (g - m)))
            cap_bad += cap > 1 + 1e-12
            guard_bad += guard > 0.5 + 1e-12
            worst_cap, worst_guard = max(worst_cap, cap), max(worst_guard, guard)
            rounds += 1
            m = g
    elapsed = time.perf_counter() - t0
    ok = cap_bad == 0 and guard_bad == 0 and rounds >= 10**5 and elapsed < 60
    verdict(3, "step-size hypotheses", ok,
            f"{rounds} rounds, cap violations {cap_bad} (max {worst_cap:.6f}), guard violations {guard_bad} "
            f"(max {worst_guard:.4f}), {elapsed:.1f}s (< 60s)")


@pytest.mark.slow
def test_criterion_04_variance_scaling(verdict):
    T, trials, a = 8192, 32, 0.05
    means, totals = [], []
    for sigma in (0.1, 0.5, 1.0):
        cfg = load_config(text=quadratic_text(T, sigma / a, a, (0.5, 0.0), 1.0, 1.0))
        totals.append(variance_report(make_env(cfg.env)).sigma2_total)
        means.append(float(np.mean([run_trial(cfg, k).regret[-1] for k in range(trials)])))
    assert np.allclose(totals, [T / 100, T / 4, T])
    ratio = means[2] / means[0]
    ok = means[0] < means[1] < means[2] and 3 <= ratio <= 30
    verdict(4, "variance scaling", ok,
            f"mean final regret {[round(v, 2) for v in means]} at sigma2 {[round(v, 2) for v in totals]}, ratio {ratio:.2f} (in [3, 30])")


def test_criterion_05_predictable_flatness(verdict):
    t0 = time.perf_counter()
    finals = []
    for T in (512, 4096):
        spec = EnvSpec("quadratic", dim=2, T=T, center=(0.3, -0.2), radius=1.0)
        G = make_env(spec).G_bound(1.0)
        cfg = load_config(text=quadratic_text(T, 0.0, 1.0, (0.3, -0.2), 1.0, G))
        finals.append(run_trial(cfg, 0).regret[-1])
    elapsed = time.perf_counter() - t0
    ratio = finals[1] / finals[0]
    ok = ratio <= 1.5 and elapsed < 30
    verdict(5, "predictable flatness", ok,
            f"regret T=512 {finals[0]:.4f}, T=4096 {finals[1]:.4f}, ratio {ratio:.3f} (<= 1.5), {elapsed:.1f}s (< 30s)")


@pytest.mark.slow
def test_criterion_06_comparator_adaptivity(verdict):
    T, trials = 4096, 4
    norms = np.array([1.0, 4.0, 16.0])
    means = []
    for R in norms:
        text = (f'[env]\nfamily="linear"\ndim=2\nT={T}\nnoise=0.3\ncenter=[0.4, 0.3]\nradius={R}\n'
                f'[learner]\nname="ca_oons"\nG=1.0\n[run]\nchecks=false\n')
        cfg = load_config(text=text)
        res = [run_trial(cfg, k) for k in range(trials)]
        assert abs(np.linalg.norm(res[0].comparator) - R) <= 1e-9
        means.append(float(np.mean([r.regret[-1] for r in res])))
    slope = loglog_slope(norms, np.array(means))
    ok = slope <= 2.3
    verdict(6, "comparator adaptivity", ok,
            f"mean final regret {[round(v, 1) for v in means]} at |u| {norms.tolist()}, fitted exponent {slope:.3f} (<= 2.3)")


@pytest.mark.slow
def test_criterion_07_reset_budget(verdict):
    families = [
        lambda T: EnvSpec("sign", dim=2, T=T, schedule="blocks", block=64, center=(3.0, 4.0), seed=T),
        lambda T: EnvSpec("linear", dim=3, T=T, noise=5.0, center=(100.0, -50.0, 20.0), drift=10.0, seed=T),
        lambda T: EnvSpec("quadratic", dim=2, T=T, noise=0.5, center=(2.0, 1.0), drift=0.2, seed=T),
        lambda T: EnvSpec("cell", T=T, n_cells=64, seed=T),
    ]
    runs = budget_bad = trunc_bad = 0
    worst = []
    for make in families:
        for T in (2**10, 2**12, 2**14, 2**16):
            for B0 in (1e-3, 0.1, 1.0, 100.0):
                spec = make(T)
                env = make_env(spec)
                alg = ClaOons(spec.dim, B0)
                for t in range(1, T + 1):
                    alg.round(env.round_sample(t).grad)
                    r = alg.last
                    trunc_bad += np.linalg.norm(r.g_trunc - r.m) > r.B_prev * (1 + 1e-12)
                budget = math.ceil(math.log2(T)) + 2
                budget_bad += alg.reset_count > budget
                worst.append(alg.reset_count - budget)
                runs += 1
    ok = runs == 64 and budget_bad == 0 and trunc_bad == 0
    verdict(7, "reset budget", ok,
            f"{runs} runs, over-budget runs {budget_bad} (closest to budget: {max(worst)}), "
            f"truncation violations {trunc_bad}")


def test_criterion_08_cell_separation(verdict):
    t0 = time.perf_counter()
    T = 256
    rep = variance_report(make_env(EnvSpec("cell", T=T, n_cells=T, seed=8)), mc_samples=10**4)
    elapsed = time.perf_counter() - t0
    s2, st2 = rep.mc["sigma2_total"], rep.mc["sigma_tilde2_total"]
    floor = (1 - math.exp(-1)) * T * 0.9
    ok = abs(s2 - 1.0) <= 0.1 and st2 >= floor and elapsed < 60
    verdict(8, "cell separation", ok,
            f"sigma2 {s2:.4f} (within 10% of 1), sigma_tilde2 {st2:.2f} (>= {floor:.2f}), {elapsed:.1f}s (< 60s)")


def test_criterion_09_numerics(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    resid = 0.0
    for d in (1, 2, 3, 5, 8):
        for D, G in ((0.5, 1.0), (1.0, 4.0), (8.0, 0.25)):
            alg = Oons(d, DomainBall(D), StepSizePolicy.known_dg(D, G))
            acc = QuadAccumulator(d, 1.0, track_inverse=True)
            m = np.zeros(d)
            for _ in range(64):
                alg.predict(m)
                g = rng.standard_normal(d) * G / math.sqrt(d)
                alg.update(g)
                A = alg.last.A
                b = rng.standard_normal(d)
                resid = max(resid, float(np.linalg.norm(A @ solve_eig(eig_of(A), b) - b)))
                acc.add(alg.last.eta, g - m)
                Au = acc.materialize()
                resid = max(resid, float(np.linalg.norm(Au @ acc.solve_unridged(b) - b)))
                m = g
    x_err = f_err = 0.0
    for _ in range(100):
        th = rng.uniform(0, np.pi)
        Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        A = Q @ np.diag(rng.uniform(1, 2, 2)) @ Q.T
        R = rng.uniform(0.2, 2.0)
        anchor = rng.uniform(-1, 1, 2) * R
        lin = rng.standard_normal(2) * rng.choice([0.1, 1.0, 5.0])
        x = quad_bregman_step(A, anchor, lin, DomainBall(R))
        xg, fg = oracles.ball_grid(A, anchor, lin, R)
        x_err = max(x_err, float(np.linalg.norm(x - xg)))
        f_err = max(f_err, abs(oracles.ball_objective(A, anchor, lin, x) - fg))
    elapsed = time.perf_counter() - t0
    ok = resid <= 1e-8 and x_err <= 1e-3 and f_err <= 1e-6 and elapsed < 10
    verdict(9, "numerics", ok,
            f"solve residual {resid:.1e} (<= 1e-8), projection iterate gap {x_err:.1e} (<= 1e-3), "
            f"objective gap {f_err:.1e} (<= 1e-6), {elapsed:.1f}s (< 10s)")


def test_criterion_10_determinism(verdict, tmp_path, capsys):
    cfg = os.path.join(CONFIGS, "quadratic_oons.toml")
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [cli.main(["run", cfg, "--trials", "2", "--out-dir", str(d)]) for d in (a, b)]
    names = sorted(p.name for p in a.glob("*.csv"))
    same = [filecmp.cmp(a / n, b / n, shallow=False) for n in names]
    ok = codes == [0, 0] and len(names) == 2 and all(same)
    verdict(10, "determinism", ok, f"{len(names)} trace pairs, byte-identical {sum(same)}/{len(names)}")
