"""Command line entry point: ``run``, ``compare``, ``sweep``, ``memtable``."""
import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from mlorc.errors import ConfigError, DivergenceError
from mlorc.harness import compare_runs, parse_config, read_csv, resolve_output, run_experiment
from mlorc.metrics import MEMORY_METHODS, memory_count

log = logging.getLogger("mlorc")


def _load(path):
    path = Path(path)
    cfg = parse_config(path.read_text())
    if not cfg.output_path:
        cfg = dataclasses.replace(cfg, output_path=str(Path("runs") / path.stem))
    return cfg


def _run_one(path):
    try:
        cfg = _load(path)
    except (OSError, ConfigError) as exc:
        log.error("%s: %s", path, exc)
        return 2
    try:
        records = run_experiment(cfg)
    except DivergenceError as exc:
        log.error("%s: run aborted at step %d (%s)", path, exc.step, exc)
        return 1
    last = records[-1]
    print(f"{path}: {len(records)} records -> {resolve_output(cfg.output_path)} "
          f"(final loss {last.loss:.6g}, grad_l11 {last.grad_l11:.6g})")
    return 0


def cmd_run(args):
    return _run_one(args.config)


def cmd_sweep(args):
    configs = sorted(Path(args.directory).glob("*.json"))
    if not configs:
        log.error("no *.json configs in %s", args.directory)
        return 2
    codes = [_run_one(p) for p in configs]
    failed = sum(c != 0 for c in codes)
    print(f"{len(configs) - failed}/{len(configs)} runs succeeded")
    return 0 if failed == 0 else 1


def cmd_compare(args):
    try:
        report = compare_runs(read_csv(args.a), read_csv(args.b))
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2
    if args.json:
        print(json.dumps({"steps": report.steps, "max": report.max, "mean": report.mean}, indent=2))
        return 0
    print(f"{'column':<16}{'max rel delta':>16}{'mean rel delta':>16}")
    for col in report.max:
        print(f"{col:<16}{report.max[col]:>16.6e}{report.mean[col]:>16.6e}")
    return 0


def cmd_memtable(args):
    print(f"m={args.m} n={args.n} r={args.r}  (element counts)")
    print(f"{'method':<14}{'weights':>14}{'optimizer states':>18}")
    for method in MEMORY_METHODS:
        mc = memory_count(method, args.m, args.n, args.r)
        print(f"{method:<14}{mc.weights:>14}{mc.optimizer_states:>18}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mlorc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one JSON experiment config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="per-step relative deltas between two records.csv files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="run every *.json config in a directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("memtable", help="optimizer-state accounting for all methods")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.set_defaults(func=cmd_memtable)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
