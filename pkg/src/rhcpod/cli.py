"""Command line interface: single runs, the uncontrolled reference, benchmarks."""

from __future__ import annotations

import argparse
import os
import sys

from .bench import run_benchmark
from .config import describe_keys, parse_config
from .errors import ConfigError, NumericsError
from .rhc import run_rhc_fom, run_uncontrolled
from .reduced import run_rhc_pod


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rhcpod",
        description="Receding horizon stabilization with sparse controls and POD reduction",
        epilog="configuration keys:\n" + describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output directory (default: config 'out')")
        p.add_argument("--verbose", action="store_true", help="per-iteration optimizer log")
        p.add_argument(
            "--norm",
            choices=("mass", "euclidean"),
            default=None,
            help="spatial norm used in the reported L2 metric",
        )

    p_run = sub.add_parser("run", help="run one configuration (mode from the file)")
    p_run.add_argument("config", help="configuration file")
    common(p_run)

    p_unc = sub.add_parser("uncontrolled", help="forward run with zero control")
    p_unc.add_argument("config", help="configuration file")
    common(p_unc)

    p_bench = sub.add_parser("bench", help="run every *.cfg in a directory, emit tables")
    p_bench.add_argument("config_dir", help="directory of configuration files")
    common(p_bench)
    return parser


def _load(path, args, force_mode=None):
    with open(path) as fh:
        config = parse_config(fh.read())
    if force_mode is not None:
        config.mode = force_mode
    if args.norm is not None:
        config.norm = args.norm
    if args.verbose:
        config.verbose = True
    if args.out is not None:
        config.out_dir = args.out
    return config.validate()


_RUNNERS = {"fom": run_rhc_fom, "pod": run_rhc_pod, "uncontrolled": run_uncontrolled}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command in ("run", "uncontrolled"):
            force = "uncontrolled" if args.command == "uncontrolled" else None
            config = _load(args.config, args, force_mode=force)
            result = _RUNNERS[config.mode](config)
            result.write_outputs(config.out_dir)
            print(
                f"{config.mode}: l2_norm={result.l2_norm:.6g} "
                f"terminal_norm={result.terminal_norm:.6g} "
                f"total_cost={result.total_cost:.6g} zeta={result.zeta:.6g}"
            )
        else:
            names = sorted(
                f for f in os.listdir(args.config_dir) if f.endswith(".cfg")
            )
            if not names:
                raise ConfigError(f"no *.cfg files in {args.config_dir}")
            configs = []
            for name in names:
                configs.append((name, _load(os.path.join(args.config_dir, name), args)))
            report = run_benchmark(configs)
            outdir = args.out or "."
            report.write_outputs(outdir)
            for row in report.rows:
                print(
                    f"{row.name}: {row.mode} T={row.T} "
                    f"terminal={row.terminal_norm:.6g} [{row.status}]"
                )
    except (ConfigError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
