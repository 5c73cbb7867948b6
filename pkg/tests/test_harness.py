import json
import math
import os

import numpy as np
import pytest

import oracles
from seaoons.errors import ComparatorError, ConfigError
from seaoons.harness import cli
from seaoons.harness.checks import check_suite
from seaoons.harness.config import load_config, replace
from seaoons.harness.runner import CSV_HEADER, compute_comparator, read_trace, run, run_trial
from seaoons.harness.svg import loglog_slope, regret_svg
from seaoons.sea_env import EnvSpec, make_env

BASE = """
[env]
family = "quadratic"
dim = 2
T = 64
noise = 0.2
center = [0.3, -0.2]
drift = 0.1
radius = 1.0

[learner]
name = "oons"
D = 1.0
G = 2.0

[run]
trials = 3
seed = 5
"""


def cfg_for(tmp_path, text=BASE, overrides=()):
    return replace(load_config(text=text, overrides=overrides), out_dir=str(tmp_path))


# ---- configuration ----------------------------------------------------------


def test_config_parsing_and_overrides():
    cfg = load_config(text=BASE, overrides=["env.noise=0.5", "trials=7", "T=32", "learner.name=omd"])
    assert cfg.env.noise == 0.5 and cfg.env.T == 32 and cfg.trials == 7
    assert cfg.learner.name == "omd_baseline" and cfg.seed == 5
    assert cfg.env.center == (0.3, -0.2)


@pytest.mark.parametrize(
    "override, msg",
    [
        ("learner.D=0", "positive finite D"),
        ("learner.name=bogus", "unknown learner"),
        ("run.colour=1", "unknown \\[run\\] keys"),
        ("env.family=spiral", "unknown environment family"),
    ],
)
def test_config_errors(override, msg):
    with pytest.raises(ConfigError, match=msg):
        load_config(text=BASE, overrides=[override])


def test_learner_requirements():
    load_config(text='[env]\nfamily="sign"\n[learner]\nname="cla"\n')
    with pytest.raises(ConfigError, match="positive finite G"):
        load_config(text='[env]\nfamily="sign"\n[learner]\nname="ca"\n')


def test_config_roundtrip_through_summary(tmp_path):
    res = run(cfg_for(tmp_path))
    stored = json.load(open(res.summary_path))["config"]
    assert stored["env"]["noise"] == 0.2 and stored["learner"]["name"] == "oons"
    assert stored["run"]["seed"] == 5


# ---- comparator -------------------------------------------------------------


def test_comparator_constant_center():
    env = make_env(EnvSpec("quadratic", dim=2, T=10, center=(0.2, 0.1), radius=1.0))
    assert np.allclose(compute_comparator(env, 1.0), [0.2, 0.1])


def test_comparator_linear():
    env = make_env(EnvSpec("linear", dim=2, T=1, center=(1.0, 0.0)))
    assert np.allclose(compute_comparator(env, 1.0), [-1.0, 0.0])
    with pytest.raises(ComparatorError, match="comparator failure"):
        compute_comparator(env, math.inf)


def test_comparator_cell():
    env = make_env(EnvSpec("cell", T=5, n_cells=4))
    assert np.array_equal(compute_comparator(env, 4.0), [0.0])


@pytest.mark.parametrize("seed", range(3))
def test_comparator_fallback_matches_grid(seed):
    rng = np.random.default_rng(seed)
    spec = EnvSpec("quadratic", dim=2, T=60, curvature=1.0, curvature_amp=0.6, period=9,
                   center=tuple(rng.uniform(-1.5, 1.5, 2)), drift=0.8, seed=seed)
    env = make_env(spec)
    R = 1.0

    def sum_F(P):
        return sum(0.5 * env._a[t] * np.sum((P - env._vec[t]) ** 2, axis=1) for t in range(1, spec.T + 1))

    u_ref, v_ref = oracles.comparator_grid(sum_F, R)
    for method in ("pgd", "auto"):
        u = compute_comparator(env, R, method)
        v = float(sum_F(u[None, :])[0])
        assert np.linalg.norm(u) <= R * (1 + 1e-12)
        assert v <= v_ref + 1e-2 and abs(v - v_ref) <= 1e-2


# ---- traces and summaries ---------------------------------------------------


def test_trace_schema_and_regret_column(tmp_path):
    res = run(cfg_for(tmp_path))
    path = os.path.join(tmp_path, res.summary["traces"][0])
    assert os.path.basename(path) == "trace_oons_seed5_trial0.csv"
    with open(path) as fh:
        assert fh.readline().strip() == CSV_HEADER
    cols = read_trace(path)
    diffs = cols["loss_play"] - cols["loss_comp"]
    assert np.abs(np.cumsum(diffs) - cols["regret_cum"]).max() <= 1e-9
    assert np.array_equal(cols["t"], np.arange(1, 65))


def test_trial_averaging(tmp_path):
    res = run(cfg_for(tmp_path))
    finals = [read_trace(os.path.join(tmp_path, p))["regret_cum"][-1] for p in res.summary["traces"]]
    assert len(finals) == 3
    assert abs(res.summary["mean_final_regret"] - np.mean(finals)) <= 1e-9


def test_floats_print_seventeen_digits(tmp_path):
    res = run(cfg_for(tmp_path, overrides=["trials=1"]))
    with open(os.path.join(tmp_path, res.summary["traces"][0])) as fh:
        fh.readline()
        row = fh.readline().strip().split(",")
    loss = float(row[2])
    assert f"{loss:.17g}" == row[2]


@pytest.mark.parametrize("learner", ["oons", "ca_oons", "cla_oons", "omd_baseline"])
def test_zero_loss_environment_has_zero_regret(tmp_path, learner):
    text = f'[env]\nfamily="linear"\ndim=2\nT=40\nradius=2.0\n[learner]\nname="{learner}"\nD=2.0\nG=1.0\n'
    res = run(cfg_for(tmp_path, text))
    cols = read_trace(os.path.join(tmp_path, res.summary["traces"][0]))
    assert np.all(cols["regret_cum"] == 0.0)
    assert res.violations == 0


@pytest.mark.parametrize("cfgfile", sorted(os.listdir(os.path.join(os.path.dirname(__file__), "..", "configs"))))
def test_shipped_configs_parse(cfgfile):
    cfg = load_config(os.path.join(os.path.dirname(__file__), "..", "configs", cfgfile))
    assert cfg.env.T >= 256


def test_identical_seeds_identical_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    ra = run(cfg_for(a))
    rb = run(cfg_for(b, overrides=["workers=2"]))
    for name in ra.summary["traces"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rc = run(cfg_for(tmp_path / "c", overrides=["seed=6"]))
    assert (tmp_path / "c" / rc.summary["traces"][0]).read_bytes() != (a / ra.summary["traces"][0]).read_bytes()


def test_cla_trial_reports_resets(tmp_path):
    text = '[env]\nfamily="sign"\ndim=2\nT=200\nschedule="blocks"\nblock=20\ncenter=[3.0,4.0]\n[learner]\nname="cla"\n'
    res = run_trial(load_config(text=text), 0)
    assert res.extra["resets"] == len(res.extra["reset_rounds"]) >= 1
    assert res.extra["variation_check"]["ok"]


def test_predictable_quadratic_is_flat(tmp_path):
    text = '[env]\nfamily="quadratic"\ndim=2\nT={T}\ncenter=[0.3,-0.2]\nradius=1.0\n[learner]\nname="oons"\nD=1.0\nG=2.0\n'
    short = run_trial(load_config(text=text.format(T=512)), 0).regret[-1]
    long = run_trial(load_config(text=text.format(T=4096)), 0).regret[-1]
    assert long <= 1.5 * short


# ---- check suite ------------------------------------------------------------


def test_check_suite_small():
    rep = check_suite(instances=50, seed=1)
    assert rep["violations"] == 0
    assert {"bregman_prox", "sqrt_sum", "stability_lower", "stability_upper", "guard",
            "gradient_variation", "truncation"} <= set(rep["checks"])


# ---- plots ------------------------------------------------------------------


def test_svg_writer():
    t = np.arange(1, 101)
    svg = regret_svg([("a", t, np.sqrt(t)), ("b", t, -np.log(t))], loglog=False)
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
    svg = regret_svg([("a", t, np.sqrt(t))], loglog=True)
    assert "<polyline" in svg
    assert loglog_slope(t, 3 * t**1.5) == pytest.approx(1.5)


# ---- command line -----------------------------------------------------------


def write_cfg(tmp_path, text=BASE):
    p = tmp_path / "cfg.toml"
    p.write_text(text)
    return str(p)


def test_cli_run_and_plot(tmp_path, capsys):
    path = write_cfg(tmp_path)
    out = str(tmp_path / "out")
    assert cli.main(["run", path, "--out-dir", out, "--trials", "2", "--plot"]) == 0
    assert os.path.exists(os.path.join(out, "summary.json")) and os.path.exists(os.path.join(out, "regret.svg"))
    traces = sorted(str(p) for p in (tmp_path / "out").glob("trace_*.csv"))
    assert len(traces) == 2
    svg = str(tmp_path / "p.svg")
    assert cli.main(["plot", *traces, "-o", svg, "--loglog"]) == 0
    assert open(svg).read().count("<polyline") == 2


def test_cli_sweep(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "sw"
    assert cli.main(["sweep", path, "--out-dir", str(out), "--grid", "env.noise=0.0,0.3", "--grid", "learner.G=2.0,3.0"]) == 0
    rows = json.load(open(out / "sweep.json"))
    assert len(rows) == 4 and all(r["violations"] == 0 for r in rows)


def test_cli_check(tmp_path):
    path = write_cfg(tmp_path)
    assert cli.main(["check", path, "--out-dir", str(tmp_path / "ck"), "--instances", "20", "--strict"]) == 0
    assert json.load(open(tmp_path / "ck" / "checks.json"))["violations"] == 0


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.toml")]) == 1
    assert "error:" in capsys.readouterr().err
    bad = write_cfg(tmp_path, BASE.replace('name = "oons"', 'name = "nope"'))
    assert cli.main(["run", bad]) == 1
    # an understated gradient bound trips the step-size and guard checks
    path = write_cfg(tmp_path, BASE.replace("G = 2.0", "G = 0.01").replace("noise = 0.2", "noise = 1.5"))
    out = str(tmp_path / "strict")
    assert cli.main(["run", path, "--out-dir", out, "--strict"]) == 2
    assert cli.main(["run", path, "--out-dir", out]) == 0
    assert json.load(open(os.path.join(out, "summary.json")))["violations"] > 0
