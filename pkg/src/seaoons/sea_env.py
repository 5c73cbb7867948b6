"""Stochastically extended adversarial environments.

Each round ``t`` has a distribution over convex losses. :meth:`SeaEnv.round_sample`
freezes one draw as a :class:`RoundOracle`; the expected loss and gradient are
available in closed form for every family, and :func:`variance_report`
computes the per-round noise and drift quantities analytically and by
Monte-Carlo.

Families:

``quadratic``  ``f = a_t/2 ||x - c_t - xi||^2`` with ``xi`` uniform on the sphere
               of radius ``noise``.
``linear``     ``f = <theta_t + xi, x>`` with the same noise law.
``sign``       ``f = <s_t v, x>``, deterministic, ``s_t`` from a sign schedule.
``cell``       1-D piecewise-linear field: on cell ``[i-1, i)`` the slope is
               ``c s`` with ``c ~ Bernoulli(1/n)`` and a random sign ``s``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, RoundAlreadySampled

FAMILIES = ("quadratic", "linear", "sign", "cell")
ALIASES = {
    "stochastic_quadratic": "quadratic",
    "drifting_linear": "linear",
    "adversarial_sign": "sign",
    "cell_separation": "cell",
}
SIGN_SCHEDULES = ("alternate", "blocks", "constant", "random")

# query words of the counter; the round index sits in the word below
Q_ROUND = 0
Q_MONTE_CARLO = 1
Q_SCHEDULE = 2


def stream(seed: int, trial: int, t: int, query: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, trial, round, query)``."""
    bg = np.random.Philox(key=np.array([seed, trial], dtype=np.uint64),
                          counter=np.array([0, 0, t, query], dtype=np.uint64))
    return np.random.Generator(bg)


def sphere(rng: np.random.Generator, k: int, d: int, radius: float) -> np.ndarray:
    """``k`` points uniform on the sphere of ``radius`` in ``R^d``."""
    if d == 1:
        return radius * (2.0 * rng.integers(0, 2, size=(k, 1)) - 1.0)
    z = rng.standard_normal((k, d))
    return radius * z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass(frozen=True)
class EnvSpec:
    family: str
    dim: int = 2
    T: int = 1024
    seed: int = 0
    noise: float = 0.0
    curvature: float = 1.0
    curvature_amp: float = 0.0
    center: tuple = ()
    drift: float = 0.0
    period: float = 0.0
    schedule: str = "alternate"
    block: int = 1
    n_cells: int = 4
    radius: float = math.inf

    def __post_init__(self):
        fam = ALIASES.get(self.family, self.family)
        if fam not in FAMILIES:
            raise ConfigError(f"unknown environment family {self.family!r}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if fam == "cell":
            object.__setattr__(self, "dim", 1)
            if self.n_cells < 1:
                raise ConfigError("n_cells must be >= 1")
        if self.dim < 1 or self.T < 1:
            raise ConfigError("dim and T must be positive")
        if self.center and len(self.center) != self.dim:
            raise ConfigError(f"center has length {len(self.center)}, expected dim={self.dim}")
        if self.noise < 0 or self.drift < 0:
            raise ConfigError("noise and drift must be nonnegative")
        if not self.radius > 0:
            raise ConfigError("radius must be positive")
        if fam == "quadratic" and (self.curvature <= 0 or abs(self.curvature_amp) >= 1):
            raise ConfigError("quadratic needs curvature > 0 and |curvature_amp| < 1")
        if fam == "sign" and self.schedule not in SIGN_SCHEDULES:
            raise ConfigError(f"unknown sign schedule {self.schedule!r}")
        if self.block < 1:
            raise ConfigError("block must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class SeaEnv:
    """Environment instance for one trial."""

    def __init__(self, spec: EnvSpec, trial: int = 0):
        self.spec = spec
        self.trial = int(trial)
        self.dim = spec.dim
        self.T = spec.T
        self._sampled: set[int] = set()
        c = np.zeros(spec.dim)
        if spec.center:
            c[:] = spec.center
        elif spec.family == "sign":
            c[0] = 1.0
        self._base = c
        P = spec.period if spec.period > 0 else spec.T
        ts = np.arange(0, spec.T + 1)
        ang = 2.0 * math.pi * ts / P
        drift = np.zeros((ts.size, spec.dim))
        drift[:, 0] = np.cos(ang)
        if spec.dim > 1:
            drift[:, 1] = np.sin(ang)
        # row t holds the round-t parameter, row 0 is never played
        self._vec = c + spec.drift * drift
        if spec.family == "quadratic":
            self._a = spec.curvature * (1.0 + spec.curvature_amp * np.sin(ang))
        else:
            self._a = np.zeros(ts.size)
        if spec.family == "sign":
            self._sign = self._sign_schedule()
            self._vec = self._sign[:, None] * c[None, :]
        self._vec[0] = 0.0
        self._a[0] = 0.0

    # ---- schedules -------------------------------------------------------
    def _sign_schedule(self) -> np.ndarray:
        sp = self.spec
        t = np.arange(0, sp.T + 1)
        if sp.schedule == "alternate":
            s = np.where((t - 1) % 2 == 0, 1.0, -1.0)
        elif sp.schedule == "blocks":
            s = np.where(((t - 1) // sp.block) % 2 == 0, 1.0, -1.0)
        elif sp.schedule == "constant":
            s = np.ones(t.size)
        else:
            s = np.ones(t.size)
            for k in range(1, sp.T + 1):
                s[k] = 1.0 if stream(sp.seed, self.trial, k, Q_SCHEDULE).random() < 0.5 else -1.0
        s[0] = 0.0
        return s

    def curvature(self, t: int) -> float:
        return float(self._a[t])

    def param(self, t: int) -> np.ndarray:
        """Center ``c_t`` (quadratic) or direction ``theta_t`` (linear, sign)."""
        return self._vec[t]

    @property
    def L(self) -> float:
        if self.spec.family == "quadratic":
            return float(self._a[1:].max())
        return 0.0

    def G_bound(self, radius: float | None = None) -> float:
        """Sup of ``||grad f||`` over the ball of ``radius`` and all draws."""
        sp = self.spec
        R = sp.radius if radius is None else float(radius)
        if sp.family == "quadratic":
            if not math.isfinite(R):
                return math.inf
            cn = np.linalg.norm(self._vec[1:], axis=1)
            return float((self._a[1:] * (R + cn + sp.noise)).max())
        if sp.family == "cell":
            return 1.0
        return float(np.linalg.norm(self._vec[1:], axis=1).max() + sp.noise)

    # ---- latent draws ----------------------------------------------------
    def draw(self, rng: np.random.Generator, k: int) -> np.ndarray:
        sp = self.spec
        if sp.family == "cell":
            n = sp.n_cells
            c = rng.random((k, n)) < 1.0 / n
            s = 2.0 * rng.integers(0, 2, size=(k, n)) - 1.0
            return c * s
        if sp.family == "sign" or sp.noise == 0.0:
            return np.zeros((k, sp.dim))
        return sphere(rng, k, sp.dim, sp.noise)

    def _cell_index(self, X) -> np.ndarray:
        # boundary points take the left cell; slopes are clamped outside [0, n)
        idx = np.ceil(np.asarray(X, dtype=np.float64)[..., 0]).astype(np.int64) - 1
        return np.clip(idx, 0, self.spec.n_cells - 1)

    def grad_batch(self, t: int, latent: np.ndarray, X) -> np.ndarray:
        """Gradients for ``k`` draws at ``m`` points: shape ``(k, m, d)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        fam = self.spec.family
        if fam == "quadratic":
            a = self._a[t]
            return a * (X[None, :, :] - self._vec[t] - latent[:, None, :])
        if fam == "cell":
            return latent[:, self._cell_index(X)][:, :, None]
        return np.broadcast_to((self._vec[t] + latent)[:, None, :], (latent.shape[0], X.shape[0], self.dim)).copy()

    def value(self, t: int, latent: np.ndarray, x) -> float:
        """Loss of a single draw ``latent`` (1-D latent vector) at ``x``."""
        x = np.asarray(x, dtype=np.float64)
        fam = self.spec.family
        if fam == "quadratic":
            r = x - self._vec[t] - latent
            return 0.5 * self._a[t] * float(r @ r)
        if fam == "cell":
            return self._cell_value(latent, float(x[0]))
        return float((self._vec[t] + latent) @ x)

    def _cell_value(self, slopes: np.ndarray, x: float) -> float:
        n = self.spec.n_cells
        if x <= 0.0:
            return slopes[0] * x
        if x >= n:
            return float(slopes.sum()) + slopes[n - 1] * (x - n)
        i = math.ceil(x) - 1
        return float(slopes[:i].sum()) + slopes[i] * (x - i)

    def expected_grad(self, t: int, x) -> np.ndarray:
        """``grad F_t(x)``; ``t = 0`` gives the zero field."""
        x = np.asarray(x, dtype=np.float64)
        fam = self.spec.family
        if t == 0 or fam == "cell":
            return np.zeros_like(x)
        if fam == "quadratic":
            return self._a[t] * (x - self._vec[t])
        return self._vec[t].copy()

    def expected_value(self, t: int, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        fam = self.spec.family
        if fam == "quadratic":
            r = x - self._vec[t]
            return 0.5 * self._a[t] * (float(r @ r) + self.spec.noise**2)
        if fam == "cell":
            return 0.0
        return float(self._vec[t] @ x)

    def expected_grad_sum(self, x) -> np.ndarray:
        """``sum_t grad F_t(x)`` over the horizon."""
        x = np.asarray(x, dtype=np.float64)
        fam = self.spec.family
        if fam == "cell":
            return np.zeros_like(x)
        if fam == "quadratic":
            a = self._a[1:]
            return a.sum() * x - a @ self._vec[1:]
        return self._vec[1:].sum(axis=0)

    # ---- sampling --------------------------------------------------------
    def round_sample(self, t: int) -> "RoundOracle":
        if not 1 <= t <= self.T:
            raise ConfigError(f"round {t} outside 1..{self.T}")
        if t in self._sampled:
            raise RoundAlreadySampled(f"round already sampled: t={t}")
        self._sampled.add(t)
        return self.oracle(t)

    def oracle(self, t: int, query: int = Q_ROUND) -> "RoundOracle":
        """Non-latching access to the round-``t`` draw (used by checks and tests)."""
        latent = self.draw(stream(self.spec.seed, self.trial, t, query), 1)[0]
        return RoundOracle(self, t, latent)


class RoundOracle:
    """One sampled loss, frozen for the round."""

    def __init__(self, env: SeaEnv, t: int, latent: np.ndarray):
        self.env = env
        self.t = t
        self.latent = latent
        self.queries = 0

    def grad(self, x) -> np.ndarray:
        self.queries += 1
        return self.env.grad_batch(self.t, self.latent[None, ...], np.atleast_1d(x)[None, :])[0, 0]

    def value(self, x) -> float:
        return self.env.value(self.t, self.latent, np.atleast_1d(x))

    def expected_grad(self, x) -> np.ndarray:
        return self.env.expected_grad(self.t, np.atleast_1d(x))

    def expected_value(self, x) -> float:
        return self.env.expected_value(self.t, np.atleast_1d(x))


def make_env(spec: EnvSpec, trial: int = 0) -> SeaEnv:
    return SeaEnv(spec, trial)


@dataclass
class VarianceReport:
    radius: float
    sigma2: np.ndarray | None
    Sigma2: np.ndarray | None
    sigma: np.ndarray | None
    frakG: np.ndarray | None
    sigma_tilde2: np.ndarray | None
    flags: list = field(default_factory=list)
    mc: dict | None = None

    def _sum(self, v):
        return None if v is None else float(v.sum())

    @property
    def sigma2_total(self):
        return self._sum(self.sigma2)

    @property
    def Sigma2_total(self):
        return self._sum(self.Sigma2)

    @property
    def sigma_total(self):
        return self._sum(self.sigma)

    @property
    def frakG_total(self):
        return self._sum(self.frakG)

    @property
    def sigma_tilde2_total(self):
        return self._sum(self.sigma_tilde2)

    def summary(self) -> dict:
        out = {
            "radius": self.radius,
            "sigma2_total": self.sigma2_total,
            "Sigma2_total": self.Sigma2_total,
            "sigma_total": self.sigma_total,
            "frakG_total": self.frakG_total,
            "sigma_tilde2_total": self.sigma_tilde2_total,
            "flags": list(self.flags),
        }
        if self.mc is not None:
            out["monte_carlo"] = dict(self.mc)
        return out


def _analytic(env: SeaEnv, R: float):
    sp = env.spec
    T = sp.T
    fam = sp.family
    flags = []
    if fam == "cell":
        n = sp.n_cells
        sig2 = np.full(T, 1.0 / n)
        return sig2, np.zeros(T), np.full(T, 1.0 / n), np.zeros(T), np.full(T, 1.0 - (1.0 - 1.0 / n) ** n), flags
    vec = env._vec
    if fam == "quadratic":
        a = env._a
        sig = a[1:] * sp.noise
        ac = a[:, None] * vec
        dv = np.linalg.norm(ac[1:] - ac[:-1], axis=1)
        da = np.abs(a[1:] - a[:-1])
        with np.errstate(invalid="ignore"):
            Sig2 = np.where(da > 0, (da * R + dv) ** 2, dv**2)
            fG = a[1:] * (R + np.linalg.norm(vec[1:], axis=1))
        if not math.isfinite(R):
            flags.append("unbounded_sup")
            Sig2 = None if np.any(~np.isfinite(Sig2)) else Sig2
            fG = None
        return sig**2, Sig2, sig, fG, sig**2, flags
    sig = np.full(T, sp.noise)
    Sig2 = np.sum((vec[1:] - vec[:-1]) ** 2, axis=1)
    fG = np.linalg.norm(vec[1:], axis=1)
    return sig**2, Sig2, sig, fG, sig**2, flags


def query_points(env: SeaEnv, R: float, rng: np.random.Generator, extra: int = 8) -> np.ndarray:
    """Points on which Monte-Carlo suprema are taken."""
    sp = env.spec
    if sp.family == "cell":
        return (np.arange(sp.n_cells) + 0.5)[:, None]
    d = sp.dim
    r = R if math.isfinite(R) else 1.0
    pts = [np.zeros(d)]
    for i in range(d):
        e = np.zeros(d)
        e[i] = r
        pts += [e, -e]
    pts += list(sphere(rng, extra, d, r))
    return np.array(pts)


def variance_report(env: SeaEnv, radius: float | None = None, mc_samples: int = 0, mc_rounds=None) -> VarianceReport:
    """Analytic noise/drift quantities, optionally with a Monte-Carlo cross-check.

    The Monte-Carlo sup of an expectation uses a split sample: the maximising
    query point is picked on one half of the draws and the value is read off
    the other half, which keeps the estimate free of the upward bias that a
    max over noisy means would have. The expectation of a sup is estimated
    directly.
    """
    sp = env.spec
    R = sp.radius if radius is None else float(radius)
    sig2, Sig2, sig, fG, sigt2, flags = _analytic(env, R)
    rep = VarianceReport(R, sig2, Sig2, sig, fG, sigt2, flags)
    if mc_samples and mc_samples >= 4:
        rounds = range(1, sp.T + 1) if mc_rounds is None else mc_rounds
        k = int(mc_samples)
        h = k // 2
        s2 = []
        s2_var = []
        s1 = []
        st2 = []
        st2_var = []
        Sg = []
        for t in rounds:
            rng = stream(sp.seed, env.trial, t, Q_MONTE_CARLO)
            X = query_points(env, R, rng)
            lat = env.draw(rng, k)
            mean = np.stack([env.expected_grad(t, x) for x in X])
            dev = env.grad_batch(t, lat, X) - mean[None]
            sq = np.sum(dev * dev, axis=2)
            j = int(np.argmax(sq[:h].mean(axis=0)))
            held = sq[h:, j]
            s2.append(held.mean())
            s2_var.append(held.var(ddof=1) / held.size)
            nrm = np.sqrt(sq)
            j1 = int(np.argmax(nrm[:h].mean(axis=0)))
            s1.append(nrm[h:, j1].mean())
            mx = sq.max(axis=1)
            st2.append(mx.mean())
            st2_var.append(mx.var(ddof=1) / k)
            prev = np.stack([env.expected_grad(t - 1, x) for x in X])
            Sg.append(float(np.max(np.sum((mean - prev) ** 2, axis=1))))
        rep.mc = {
            "samples": k,
            "rounds": len(s2),
            "sigma2_total": float(np.sum(s2)),
            "sigma2_se": float(math.sqrt(np.sum(s2_var))),
            "sigma_total": float(np.sum(s1)),
            "sigma_tilde2_total": float(np.sum(st2)),
            "sigma_tilde2_se": float(math.sqrt(np.sum(st2_var))),
            "Sigma2_grid_total": float(np.sum(Sg)),
        }
        if rep.sigma2 is None:
            rep.flags.append("monte_carlo_only")
    return rep
