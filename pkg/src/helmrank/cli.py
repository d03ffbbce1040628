"""Command-line experiment harness.

Subcommands:
    solve   --config FILE [--out DIR]          run one experiment
    sweep   --config FILE --ranks 4,8,16 [...] rank sweep with timings
    oracle  --config FILE [--out DIR]          compare against a full-grid solve
    presets list                               list shipped configurations

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 resource limit exceeded.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources

from . import __version__, config as config_mod, experiments
from .errors import (
    BandStructureError,
    ConfigError,
    ParameterError,
    ResourceLimitError,
    SamplingError,
    SingularSystemError,
)

EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_RESOURCES = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="helmrank",
        description="Low-rank Helmholtz scattering experiments",
    )
    parser.add_argument("--version", action="version", version=f"helmrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one experiment from a config file")
    solve.add_argument("--config", required=True, help="experiment configuration file")
    solve.add_argument("--out", default=None, help="output directory override")

    sweep = sub.add_parser("sweep", help="run a rank sweep with median timings")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--ranks", required=True, help="comma-separated ranks, e.g. 4,8,16,24")
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--repetitions", type=int, default=3)

    oracle = sub.add_parser("oracle", help="compare the low-rank run with a full-grid solve")
    oracle.add_argument("--config", required=True)
    oracle.add_argument("--out", default=None)

    presets = sub.add_parser("presets", help="shipped experiment configurations")
    presets.add_argument("action", choices=["list"], help="list preset names and paths")
    return parser


def _load(path: str):
    return config_mod.load(path)


def _cmd_solve(args) -> int:
    report, out = experiments.run_experiment(_load(args.config), out_dir=args.out)
    final = report.residual_history[-1] if report.residual_history else float("nan")
    print(f"run complete: {report.iterations} iterations, final residual {final:.3e}, "
          f"converged={report.converged}, outputs in {out}")
    return 0


def _cmd_sweep(args) -> int:
    try:
        ranks = [int(r) for r in args.ranks.split(",") if r.strip()]
    except ValueError as exc:
        raise ConfigError("ranks", f"cannot parse rank list {args.ranks!r}") from exc
    if not ranks:
        raise ConfigError("ranks", "at least one rank is required")
    reports, out = experiments.sweep(_load(args.config), ranks, out_dir=args.out,
                                     repetitions=args.repetitions)
    for rank in ranks:
        rep = reports[rank]
        final = rep.residual_history[-1] if rep.residual_history else float("nan")
        print(f"rank {rank}: final residual {final:.3e}")
    print(f"sweep outputs in {out}")
    return 0


def _cmd_oracle(args) -> int:
    report, out = experiments.compare_with_oracle(_load(args.config), out_dir=args.out)
    print(f"oracle comparison written to {out}")
    return 0


def preset_files():
    root = resources.files("helmrank").joinpath("presets")
    return sorted(
        (entry.name[: -len(".cfg")], entry)
        for entry in root.iterdir()
        if entry.name.endswith(".cfg")
    )


def _cmd_presets(args) -> int:
    for name, entry in preset_files():
        print(f"{name}\t{entry}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "oracle": _cmd_oracle,
        "presets": _cmd_presets,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystemError, SamplingError, BandStructureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCES
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
