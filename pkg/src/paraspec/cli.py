"""Command line entry point: ``paraspec {simulate,correlate,conditions,spectrum,report}``.

Exit codes: 0 success, 2 configuration error or missing upstream artifact,
3 numerical failure (the error class name is printed on stderr).
"""
import argparse
import sys

from . import runner
from .config import load
from .errors import ConfigError, MissingArtifact, ParaspecError
from .parallel import default_workers

COMMANDS = {"simulate": runner.cmd_simulate, "correlate": runner.cmd_correlate,
            "conditions": runner.cmd_conditions, "spectrum": runner.cmd_spectrum}


def build_parser():
    p = argparse.ArgumentParser(prog="paraspec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        s = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        s.add_argument("--config", required=True, help="INI experiment config")
        s.add_argument("--seed", type=int, help="override experiment.master_seed")
        s.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: $PARASPEC_WORKERS or 1)")
        s.add_argument("--out", help="run directory (default: experiment.output_dir)")
    r = sub.add_parser("report", help="markdown summary of a run directory")
    r.add_argument("run_dir", nargs="?", help="run directory")
    r.add_argument("--config", help="take the run directory from this config")
    r.add_argument("--out", help="run directory")
    return p


def _run(args):
    if args.command == "report":
        run_dir = args.run_dir or args.out
        if run_dir is None:
            if args.config is None:
                raise ConfigError("run_dir", "give a run directory, --out or --config")
            run_dir = load(args.config).output_dir
        return runner.cmd_report(run_dir)
    cfg = load(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        cfg = cfg.with_seed(args.seed)
    workers = default_workers() if args.workers is None else args.workers
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")
    return COMMANDS[args.command](cfg, args.out, workers)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        out = _run(args)
    except (ConfigError, MissingArtifact) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ParaspecError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
