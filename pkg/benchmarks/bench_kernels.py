"""Time the kernel backends and a full OONS round.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from seaoons import kernels


def cases(rng, d, n):
    out = []
    for _ in range(n):
        M = rng.standard_normal((d, d))
        A = M @ M.T + 0.5 * np.eye(d)
        w, Q = np.linalg.eigh(A)
        out.append((A, w, Q, rng.standard_normal(d), 3 * rng.standard_normal(d)))
    return out


def bench_backend(mod, rng, repeat):
    rows = []
    for d in (2, 8, 32):
        data = cases(rng, d, 64)
        t = min(timeit.repeat(lambda: [mod.sym_eig(c[0]) for c in data], number=1, repeat=repeat)) / len(data)
        rows.append((f"sym_eig d={d}", t))
        t = min(timeit.repeat(lambda: [mod.ball_step(c[1], c[2], c[3], c[4], 1.0) for c in data],
                              number=1, repeat=repeat)) / len(data)
        rows.append((f"ball_step d={d}", t))
    for n in (4, 16):
        lp = np.log(np.full(n, 1.0 / n))
        cost = rng.standard_normal(n)
        rates = np.exp(rng.uniform(-6, 0, n))
        t = min(timeit.repeat(lambda: mod.entropy_solve(lp, cost, rates), number=200, repeat=repeat)) / 200
        rows.append((f"entropy_solve n={n}", t))
    return rows


ROUND = """
import numpy as np, timeit
from seaoons import kernels
from seaoons.mathcore import DomainBall
from seaoons.oons import Oons, StepSizePolicy
rng = np.random.default_rng(0)
o = Oons(4, DomainBall(1.0), StepSizePolicy.known_dg(1.0, 1.0))
gs = rng.uniform(-0.5, 0.5, (2000, 4))
def go():
    m = np.zeros(4)
    for g in gs:
        o.predict(m); o.update(g); m = g
print(kernels.BACKEND, min(timeit.repeat(go, number=1, repeat=3)) / len(gs))
"""


def bench_round(pure):
    env = dict(os.environ, SEAOONS_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", ROUND], env=env, capture_output=True, text=True, check=True)
    name, t = out.stdout.split()
    return name, float(t)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    results = {name: dict(bench_backend(mod, np.random.default_rng(0), args.repeat)) for name, mod in backends.items()}
    names = sorted(results)
    print(f"{'kernel':22s}" + "".join(f"{n:>14s}" for n in names))
    for key in results["python"]:
        print(f"{key:22s}" + "".join(f"{results[n][key] * 1e6:12.2f}us" for n in names))
    print()
    for pure in (True, False):
        name, t = bench_round(pure)
        print(f"OONS round (d=4, bounded), backend {name}: {t * 1e6:.1f}us")


if __name__ == "__main__":
    main()
