"""Command line entry point.

    steprl run --config cfg.json --method step --seed 0 --rounds 40 --out runs/step
    steprl compare --configs a.json b.json --seeds 0 1 2 3 4 --out runs/cmp
    steprl report --runs runs/cmp/a runs/cmp/b --out runs/cmp/report
    steprl suite --out suite.json

``STEPRL_SEED`` and ``STEPRL_OUT`` override the seed and output directory of
a config file; explicit flags override both.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..envsim import default_suite, save_suite
from .config import METHODS, load_config
from .report import load_run, render_report
from .runner import run_experiment

log = logging.getLogger("steprl")

EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2


def _cmd_run(args) -> int:
    cfg = load_config(args.config, method=args.method, seed=args.seed, rounds=args.rounds, out=args.out)
    summary = run_experiment(cfg)
    print(json.dumps(summary.to_record(), sort_keys=True))
    if cfg.out and args.figures:
        render_report({cfg.method: [load_run(cfg.out)]}, Path(cfg.out) / "report")
    return EXIT_OK


def _label(path: str) -> str:
    return Path(path).stem


def _cmd_compare(args) -> int:
    out = Path(args.out)
    runs: dict[str, list[dict]] = {}
    for cfg_path in args.configs:
        label = _label(cfg_path)
        if label in runs:
            raise ValueError(f"duplicate config name {label!r}")
        runs[label] = []
        for seed in args.seeds:
            run_dir = out / label / f"seed{seed}"
            cfg = load_config(cfg_path, seed=seed, rounds=args.rounds, out=str(run_dir))
            s = run_experiment(cfg)
            log.info("%s seed %d: final tasks_above_60=%d", label, seed, s.final_tasks_above_60)
            runs[label].append(load_run(run_dir))
    for path in render_report(runs, out / "report", window=args.window):
        print(path)
    return EXIT_OK


def _cmd_report(args) -> int:
    runs: dict[str, list[dict]] = {}
    for run_dir in args.runs:
        d = Path(run_dir)
        seeds = sorted(p for p in d.iterdir() if (p / "metrics.jsonl").exists()) if d.is_dir() else []
        dirs = seeds or [d]
        runs[d.name] = [load_run(x) for x in dirs]
    for path in render_report(runs, args.out, window=args.window):
        print(path)
    return EXIT_OK


def _cmd_suite(args) -> int:
    priors = {int(k): float(v) for k, v in (p.split("=") for p in args.prior)}
    specs = default_suite(args.tasks, range(args.min_length, args.max_length + 1), args.actions,
                          args.tolerance, args.suite_seed, priors)
    save_suite(specs, args.out)
    print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steprl", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config")
    r.add_argument("--method", choices=METHODS)
    r.add_argument("--seed", type=int)
    r.add_argument("--rounds", type=int)
    r.add_argument("--out")
    r.add_argument("--figures", action="store_true", help="also render figures into OUT/report")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("compare", help="run several configs over the same seeds and report")
    c.add_argument("--configs", nargs="+", required=True)
    c.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2, 3, 4])
    c.add_argument("--rounds", type=int)
    c.add_argument("--out", required=True)
    c.add_argument("--window", type=int, default=4)
    c.set_defaults(func=_cmd_compare)

    rep = sub.add_parser("report", help="tables and figures from existing run directories")
    rep.add_argument("--runs", nargs="+", required=True,
                     help="run directories, or directories holding one sub-directory per seed")
    rep.add_argument("--out", required=True)
    rep.add_argument("--window", type=int, default=4)
    rep.set_defaults(func=_cmd_report)

    s = sub.add_parser("suite", help="write the default task suite to a file")
    s.add_argument("--out", required=True)
    s.add_argument("--tasks", type=int, default=64)
    s.add_argument("--min-length", type=int, default=2)
    s.add_argument("--max-length", type=int, default=8)
    s.add_argument("--actions", type=int, default=5)
    s.add_argument("--tolerance", type=int, default=0)
    s.add_argument("--suite-seed", type=int, default=0)
    s.add_argument("--prior", action="append", default=[], metavar="LENGTH=LOGIT")
    s.set_defaults(func=_cmd_suite)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError) as exc:
        print(f"steprl: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"steprl: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
