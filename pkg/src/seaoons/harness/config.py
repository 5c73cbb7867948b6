"""Run configuration: a TOML file with ``[env]``, ``[learner]`` and ``[run]``
tables, plus ``section.key=value`` overrides from the command line.

Example::

    [env]
    family = "quadratic"      # quadratic | linear | sign | cell
    dim = 2
    T = 4096
    noise = 0.1
    center = [0.3, -0.2]
    radius = 1.0              # reporting ball; inf for all of R^d

    [learner]
    name = "oons"             # oons | ca_oons | cla_oons | omd_baseline
    D = 1.0
    G = 2.0

    [run]
    trials = 4
    seed = 0
    out_dir = "out"
    plot = true
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

try:
    import tomllib as toml
except ModuleNotFoundError:  # python < 3.11
    import tomli as toml

from ..errors import ConfigError
from ..sea_env import EnvSpec

LEARNERS = ("oons", "ca_oons", "cla_oons", "omd_baseline")
LEARNER_ALIASES = {"ca": "ca_oons", "cla": "cla_oons", "omd": "omd_baseline", "fpf_oons": "cla_oons"}


@dataclass(frozen=True)
class LearnerSpec:
    name: str
    D: float | None = None
    G: float | None = None
    B0: float = 1.0
    delta: float = 1.0
    n_learners: int | None = None

    def __post_init__(self):
        name = LEARNER_ALIASES.get(self.name, self.name)
        if name not in LEARNERS:
            raise ConfigError(f"unknown learner {self.name!r}")
        object.__setattr__(self, "name", name)
        need = {"oons": ("D", "G"), "omd_baseline": ("D", "G"), "ca_oons": ("G",), "cla_oons": ()}[name]
        for key in need:
            v = getattr(self, key)
            if v is None or not (float(v) > 0 and math.isfinite(float(v))):
                raise ConfigError(f"learner {name} needs a positive finite {key}")
        if not self.B0 > 0 or not self.delta > 0:
            raise ConfigError("B0 and delta must be positive")


@dataclass(frozen=True)
class RunConfig:
    env: EnvSpec
    learner: LearnerSpec
    trials: int = 1
    out_dir: str = "out"
    plot: bool = False
    loglog: bool = False
    checks: bool = True
    strict: bool = False
    workers: int = 1
    mc_samples: int = 0
    comparator: str = "auto"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.comparator not in ("auto", "pgd"):
            raise ConfigError("comparator must be 'auto' or 'pgd'")

    @property
    def seed(self) -> int:
        return self.env.seed

    def to_dict(self) -> dict:
        return {
            "env": self.env.to_dict(),
            "learner": dataclasses.asdict(self.learner),
            "run": {
                "trials": self.trials,
                "seed": self.seed,
                "out_dir": self.out_dir,
                "plot": self.plot,
                "loglog": self.loglog,
                "checks": self.checks,
                "strict": self.strict,
                "workers": self.workers,
                "mc_samples": self.mc_samples,
                "comparator": self.comparator,
            },
        }


_RUN_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"env", "learner", "extra"} | {"seed"}


def parse_value(text: str):
    """A TOML scalar or array; bare words fall back to strings."""
    try:
        return toml.loads(f"v = {text}")["v"]
    except toml.TOMLDecodeError:
        return text


def apply_override(tables: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, text = item.split("=", 1)
    key = key.strip()
    section, _, name = key.rpartition(".")
    if not section:
        section = "run" if name in _RUN_KEYS else "env"
    tables.setdefault(section, {})[name] = parse_value(text.strip())


def _build(tables: dict) -> RunConfig:
    unknown = set(tables) - {"env", "learner", "run"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    env = dict(tables.get("env", {}))
    run = dict(tables.get("run", {}))
    learner = dict(tables.get("learner", {}))
    if "seed" in run:
        env["seed"] = run.pop("seed")
    if "center" in env:
        env["center"] = tuple(env["center"])
    try:
        env_spec = EnvSpec(**env)
    except TypeError as exc:
        raise ConfigError(f"bad [env] table: {exc}") from None
    if "name" not in learner:
        raise ConfigError("[learner] needs a name")
    try:
        lspec = LearnerSpec(**learner)
    except TypeError as exc:
        raise ConfigError(f"bad [learner] table: {exc}") from None
    bad = set(run) - _RUN_KEYS
    if bad:
        raise ConfigError(f"unknown [run] keys: {sorted(bad)}")
    return RunConfig(env=env_spec, learner=lspec, **run)


def load_config(path: str | None = None, overrides=(), text: str | None = None) -> RunConfig:
    if text is None:
        try:
            with open(path, "rb") as fh:
                tables = toml.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        except toml.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path!r}: {exc}") from None
    else:
        tables = toml.loads(text)
    tables = {k: dict(v) for k, v in tables.items()}
    for item in overrides:
        apply_override(tables, item)
    return _build(tables)


def replace(cfg: RunConfig, **changes) -> RunConfig:
    """``dataclasses.replace`` that also reaches into ``env`` and ``learner``."""
    env = {k[4:]: v for k, v in changes.items() if k.startswith("env.")}
    lrn = {k[8:]: v for k, v in changes.items() if k.startswith("learner.")}
    rest = {k: v for k, v in changes.items() if "." not in k}
    if "seed" in rest:
        env["seed"] = rest.pop("seed")
    new = cfg
    if env:
        new = dataclasses.replace(new, env=dataclasses.replace(new.env, **env))
    if lrn:
        new = dataclasses.replace(new, learner=dataclasses.replace(new.learner, **lrn))
    if rest:
        new = dataclasses.replace(new, **rest)
    return new
