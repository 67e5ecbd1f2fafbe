"""Command-line entry point: ``cimsde {simulate,sweep,ground-truth,validate}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from pathlib import Path

from . import experiment, kernels, validate
from .errors import CapabilityError, CimError, ConfigError
from .ising import ground_states_bruteforce

DEFAULT_OUTPUT = "cimsde_output"


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="TOML file with experiment keys")
    p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--backend", choices=experiment.BACKENDS)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output-dir", help=f"result directory (default ${experiment.OUTPUT_ENV} "
                                              f"or ./{DEFAULT_OUTPUT})")


def _load(args, extra=()) -> experiment.ExperimentConfig:
    over = list(args.set)
    for key in ("backend", "seed", "output_dir", "trials", "workers", "M"):
        v = getattr(args, key, None)
        if v is not None:
            over.append((key, v))
    if getattr(args, "full_scale", False):
        over.append(("full_scale", True))
    over.extend(extra)
    cfg = experiment.load_config(args.config, over)
    if cfg.output_dir is None:
        cfg = dataclasses.replace(cfg, output_dir=DEFAULT_OUTPUT)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args)
    backends = experiment.BACKENDS if args.both else (cfg.backend,)
    res = experiment.run_traced_trials(cfg, backends=backends, trace_every=args.trace_every, t=args.trial)
    for b, r in res.items():
        spins = "".join("+" if s > 0 else "-" if s < 0 else "0" for s in r.spins)
        status = "valid" if r.valid else f"invalid ({r.error})"
        print(f"{b}: spins={spins} success={r.success} energy={r.energy:g} {status} "
              f"wall={r.wall_time:.2f}s -> {Path(cfg.output_dir) / f'trace_{b}.csv'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)

    def progress(done, total):
        if args.verbose:
            print(f"\r{done}/{total} trials", end="", file=sys.stderr, flush=True)

    res = experiment.run_batch(cfg, progress=progress)
    if args.verbose:
        print(file=sys.stderr)
    name = res.param or "-"
    print(f"{name:>10} {'trials':>7} {'success':>8} {'invalid':>8} {'ties':>5} {'rate':>7} {'se':>7} {'wall[s]':>8}")
    for pt in res.points:
        v = "-" if pt.value is None else f"{pt.value:g}"
        print(f"{v:>10} {pt.trials:>7} {pt.successes:>8} {pt.invalid:>8} {pt.ties:>5} "
              f"{pt.success_rate:>7.3f} {pt.stderr:>7.3f} {pt.mean_wall_time:>8.2f}")
    print(f"results in {cfg.output_dir}")
    return 0


def cmd_ground_truth(args) -> int:
    cfg = _load(args)
    problem = cfg.load_problem()
    try:
        e_min, states = ground_states_bruteforce(problem)
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "ground_truth.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["energy", "spins"])
        for s in states:
            w.writerow([repr(e_min), "".join("+" if v > 0 else "-" for v in s)])
    print(f"n={problem.n} E_min={e_min:g} ground states={len(states)} -> {path}")
    for s in states[:args.show]:
        print("  " + "".join("+" if v > 0 else "-" for v in s))
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    checks = validate.run_validation(cfg.phys, dtau=cfg.dtau, quick=args.quick)
    print(f"kernel: {kernels.KERNEL}")
    print(validate.format_report(checks))
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cimsde", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one trial with observable traces")
    _config_args(p)
    p.add_argument("--trace-every", type=int, default=10, help="keep every k-th step")
    p.add_argument("--trial", type=int, default=0, help="trial index (selects the seed)")
    p.add_argument("--both", action="store_true", help="run both backends on the same seed")
    p.add_argument("--M", type=int, help="particles per DOPO")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="success-rate batches over a parameter grid")
    _config_args(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--M", type=int, help="particles per DOPO")
    p.add_argument("-j", "--workers", type=int)
    p.add_argument("--full-scale", action="store_true", help="M=10000, 1000 trials")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ground-truth", help="brute-force ground states of the configured problem")
    _config_args(p)
    p.add_argument("--show", type=int, default=8, help="print at most this many states")
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("validate", help="invariant suite; nonzero exit on any failure")
    _config_args(p)
    p.add_argument("--quick", action="store_true", help="fewer Monte Carlo repetitions")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
