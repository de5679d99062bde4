"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime or
numerical failure, 4 a verify check failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .ensemble import PathFailure, run_ensemble, sweep
from .io import fmt, write_results, write_snapshot
from .model import compute_thresholds
from .observables import UnderflowError
from .stepper import NumericalFailure, simulate_path
from .verify import run_verify_suite

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3, 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="epispde", description="Stochastic reaction-diffusion SIR simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("thresholds", help="print threshold quantities for a config")
    p.add_argument("config")

    p = sub.add_parser("simulate", help="run the Monte Carlo ensemble and write statistics")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--paths", type=int, help="override mc.n_paths")
    p.add_argument("--workers", type=int, help="worker processes (default EPISPDE_THREADS or CPU count)")
    p.add_argument("--snapshot-times", type=_float_list, default=(),
                   help="comma-separated times at which to dump path 0's fields")
    p.add_argument("--snapshot-dir", default=".")

    p = sub.add_parser("sweep", help="classify extinction/permanence along a parameter axis")
    p.add_argument("config")
    p.add_argument("--param", required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--paths", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("verify", help="run the invariant suite on a config")
    p.add_argument("config")
    return parser


def _float_list(text: str):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror or exc}") from None
    return parse_config(text, base_dir=Path(path).parent)


def axis_values(start: float, stop: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ConfigError("--step must be positive")
    if stop < start:
        raise ConfigError("--to must not be below --from")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _constant(field) -> bool:
    return bool(np.ptp(field) == 0)


def cmd_thresholds(config, out) -> int:
    noise = config.noise
    p = config.analysis.p if noise.is_space_independent else None
    rep = compute_thresholds(config.params, noise, config.grid, p)
    print(f"r_hat={fmt(rep.r_hat)}", file=out)
    print(f"mu2_minus_alpha_star={fmt(rep.mu2_minus_alpha_star)}", file=out)
    print(f"mu_star={fmt(rep.mu_star)}", file=out)
    print(f"lambda_star={fmt(rep.lambda_star)}", file=out)
    print(f"a2={fmt(rep.a2)}", file=out)
    print(f"a2_truncation_tail={fmt(rep.a2_tail)}", file=out)
    if rep.r_p is not None:
        print(f"r_p={fmt(rep.r_p)} (p={fmt(rep.p)})", file=out)
    params = config.params
    if all(_constant(f) for f in (params.mu2, params.alpha)):
        print(f"boundary_alpha={fmt(float(params.mu2[0]) + rep.a2 / 2)}", file=out)
    print(f"classification={rep.prediction(noise.is_space_independent)}", file=out)
    return EXIT_OK


def cmd_simulate(config, args, out) -> int:
    stats = run_ensemble(config, n_paths=args.paths, workers=args.workers)
    write_results(stats, args.output)
    if args.snapshot_times:
        traj = simulate_path(config.initial_state(), config.params, config.noise, config.step,
                             config.horizon, config.grid, config.seed, 0, config.analysis.p,
                             args.snapshot_times)
        for t, (s, i) in sorted(traj.snapshots.items()):
            write_snapshot(Path(args.snapshot_dir) / f"snapshot_t{fmt(t)}.txt", config.grid, s, i)
    print(f"wrote {len(stats.times)} rows for {stats.n_paths} paths to {args.output}; "
          f"clip fraction {stats.clip_fraction:.3g}", file=out)
    return EXIT_OK


def cmd_sweep(config, args, out) -> int:
    values = axis_values(args.start, args.stop, args.step)
    result = sweep(config, args.param, values, n_paths=args.paths, workers=args.workers)
    write_results(result, args.output)
    for row in result.rows:
        print(f"{args.param}={fmt(row.value)} {row.prediction} {row.verdict}", file=out)
    return EXIT_OK


def cmd_verify(config, out) -> int:
    checks = run_verify_suite(config)
    for c in checks:
        print(f"{c.status} {c.name}: {c.detail}", file=out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=err)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        config = _load(args.config)
        if args.command == "thresholds":
            return cmd_thresholds(config, out)
        if args.command == "simulate":
            return cmd_simulate(config, args, out)
        if args.command == "sweep":
            if args.param not in ("alpha", "lambda", "mu1", "mu2", "k1", "k2", "sigma1", "sigma2"):
                raise ConfigError(f"cannot sweep unknown parameter {args.param!r}")
            return cmd_sweep(config, args, out)
        return cmd_verify(config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    except (NumericalFailure, PathFailure, UnderflowError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=err)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O failure: {exc}", file=err)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
