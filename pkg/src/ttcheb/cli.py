"""
Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
from dataclasses import replace
from pathlib import Path

from .config import DEFAULT_TEXT, RunConfig, apply_overrides, parse_config
from .errors import ConfigError, DivergenceError, FormatError
from .propagators import bessel_j_sequence
from .runner import run_convergence_study, run_simulation, run_soft_comparison

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="configuration file (key = value lines)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    p.add_argument("--single-thread", action="store_true", help="limit BLAS to one thread")
    p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override one configuration key"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttcheb", description="Chebyshev wavepacket propagation on tensor trains."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="checkpointed propagation writing survival.csv")
    _add_common(p)
    p.add_argument("--resume", action="store_true", help="continue from the last state file")
    p.add_argument("--quiet", action="store_true", help="no per-checkpoint progress lines")

    p = sub.add_parser("converge", help="L2 error against the analytic oracle versus term count")
    _add_common(p)

    p = sub.add_parser("soft-compare", help="Chebyshev versus split-operator errors versus step size")
    _add_common(p)

    p = sub.add_parser("bessel", help="write J_0(x)..J_{n-1}(x) as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--out", help="file to write (default: standard output)")

    sub.add_parser("print-defaults", help="print the default configuration")
    return parser


def _load_config(args) -> RunConfig:
    text = Path(args.config).read_text() if args.config else DEFAULT_TEXT
    cfg = parse_config(apply_overrides(text, args.set))
    if args.out:
        cfg = replace(cfg, output=args.out)
    return cfg


def _thread_limit(single: bool):
    if not single:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=1)


def _progress(row):
    t, re_s, im_s, abs_s, norm, rank = row
    print(f"t={t:.6f} |S|={abs_s:.12f} norm={norm:.12f} max_rank={rank}", flush=True)


def _run(args) -> int:
    if args.command == "print-defaults":
        sys.stdout.write(DEFAULT_TEXT)
        return EXIT_OK
    if args.command == "bessel":
        if args.n < 1 or args.x < 0:
            raise ConfigError("bessel", "need n >= 1 and x >= 0")
        table = bessel_j_sequence(args.n, args.x)
        lines = ["k,j_k\n"] + [f"{k},{v!r}\n" for k, v in enumerate(table.values.tolist())]
        if args.out:
            Path(args.out).write_text("".join(lines))
        else:
            sys.stdout.write("".join(lines))
        return EXIT_OK

    cfg = _load_config(args)
    if args.jobs < 1:
        raise ConfigError("--jobs", "must be positive")
    with _thread_limit(args.single_thread):
        if args.command == "run":
            result = run_simulation(cfg, resume=args.resume, progress=None if args.quiet else _progress)
            print(f"wrote {Path(cfg.output) / 'survival.csv'}; max rank {result.report.max_rank}")
        elif args.command == "converge":
            rows = run_convergence_study(cfg, out=cfg.output, jobs=args.jobs)
            print(f"wrote {len(rows)} rows to {Path(cfg.output) / 'convergence.csv'}")
        else:
            rows = run_soft_comparison(cfg, out=cfg.output, jobs=args.jobs)
            print(f"wrote {len(rows)} rows to {Path(cfg.output) / 'soft_compare.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # invariant violations raised by the library on configured values
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
