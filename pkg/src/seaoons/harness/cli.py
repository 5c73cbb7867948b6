"""Command-line entry point: ``seaoons run|sweep|check|plot``."""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys

from ..errors import SeaError
from .config import load_config, parse_value, replace

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_STRICT = 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="TOML run configuration")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--trials", type=int, help="override [run] trials")
    p.add_argument("--strict", action="store_true", help="exit 2 if any invariant is violated")
    p.add_argument("--out-dir", help="override [run] out_dir")
    p.add_argument("--workers", type=int, help="parallel trial workers")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config entry (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seaoons", description="Online learning experiments in stochastic/adversarial environments.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one configuration")
    _common(p)
    p.add_argument("--plot", action="store_true", help="also write regret.svg")
    p = sub.add_parser("sweep", help="run the cartesian product of parameter grids")
    _common(p)
    p.add_argument("--grid", action="append", required=True, metavar="PARAM=V1,V2,...",
                   help="e.g. env.noise=0.1,0.5 (repeatable)")
    p = sub.add_parser("check", help="randomised invariant suite")
    _common(p)
    p.add_argument("--instances", type=int, default=1000)
    p = sub.add_parser("plot", help="plot regret traces")
    p.add_argument("traces", nargs="+", help="trace CSV files")
    p.add_argument("-o", "--output", required=True, help="output SVG path")
    p.add_argument("--loglog", action="store_true")
    return ap


def _load(args):
    cfg = load_config(args.config, args.overrides)
    changes = {}
    for key in ("seed", "trials", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            changes[key] = v
    if args.out_dir is not None:
        changes["out_dir"] = args.out_dir
    if args.strict:
        changes["strict"] = True
    if getattr(args, "plot", False):
        changes["plot"] = True
    return replace(cfg, **changes) if changes else cfg


def _report(summary: dict, out) -> None:
    print(f"mean final regret: {summary['mean_final_regret']:.6g} over {len(summary['final_regret'])} trial(s)", file=out)
    bad = {k: v for k, v in summary["flag_counts"].items() if v}
    print(f"flagged rounds: {summary['flagged_rounds']} {bad if bad else ''}".rstrip(), file=out)
    for flag in summary["config_flags"]:
        print(f"warning: {flag}", file=out)


def cmd_run(args) -> int:
    from .runner import run

    cfg = _load(args)
    res = run(cfg)
    _report(res.summary, sys.stdout)
    print(f"wrote {res.summary_path}")
    if cfg.strict and res.violations:
        return EXIT_STRICT
    return EXIT_OK


def _grid(items):
    axes = []
    for item in items:
        if "=" not in item:
            raise SeaError(f"grid entry {item!r} is not param=v1,v2")
        key, vals = item.split("=", 1)
        key = key.strip()
        if "." not in key:
            key = "env." + key
        axes.append([(key, parse_value(v.strip())) for v in vals.split(",")])
    return itertools.product(*axes)


def cmd_sweep(args) -> int:
    from .runner import run

    base = _load(args)
    rows = []
    worst = 0
    for combo in _grid(args.grid):
        tag = ",".join(f"{k.split('.', 1)[1]}={v}" for k, v in combo)
        changes = {}
        for k, v in combo:
            if k.startswith("run."):
                changes[k[4:]] = v
            else:
                changes[k] = tuple(v) if isinstance(v, list) else v
        cfg = replace(base, out_dir=os.path.join(base.out_dir, tag), **changes)
        res = run(cfg)
        worst = max(worst, res.violations)
        rows.append({"params": dict(combo), "mean_final_regret": res.summary["mean_final_regret"],
                     "violations": res.violations, "out_dir": cfg.out_dir})
        print(f"{tag}: mean final regret {res.summary['mean_final_regret']:.6g}, violations {res.violations}")
    os.makedirs(base.out_dir, exist_ok=True)
    path = os.path.join(base.out_dir, "sweep.json")
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    return EXIT_STRICT if base.strict and worst else EXIT_OK


def cmd_check(args) -> int:
    from .checks import check_suite

    cfg = _load(args)
    rep = check_suite(cfg, instances=args.instances, seed=cfg.seed)
    for name, r in rep["checks"].items():
        status = "ok" if r["violations"] == 0 else "FAIL"
        print(f"{name:24s} {status:4s} instances={r['instances']} violations={r['violations']} "
              f"worst_margin={r['worst_margin']:.3e}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "checks.json"), "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg.strict and rep["violations"]:
        return EXIT_STRICT
    return EXIT_OK


def cmd_plot(args) -> int:
    import numpy as np

    from .runner import read_trace
    from .svg import regret_svg

    series = []
    for path in args.traces:
        cols = read_trace(path)
        series.append((os.path.basename(path), cols["t"], cols["regret_cum"]))
    with open(args.output, "w") as fh:
        fh.write(regret_svg(series, loglog=args.loglog))
    print(f"wrote {args.output} ({len(series)} series, {int(np.max([s[1].size for s in series]))} rounds)")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "check": cmd_check, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (SeaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
