"""percoz: Ornstein-Zernike behaviour of finite connections in supercritical bond percolation.

    python percoz.py <subcommand> [common flags] [subcommand flags]

Common flags override a --config file (JSON or YAML mirroring the flags), which overrides .env
defaults (PERCOZ_THREADS). Exit codes: 0 success, 1 defects found, 2 usage error.
"""
from __future__ import annotations

import argparse
from typing import List, Optional

from command_list import COMMANDS
from console import get_logger, setup_logging
from errors import UsageError
from execute import CODE_VERSION, run
from experiment import ExperimentSpec

log = get_logger("percoz")

COMMON = ("dim", "p", "t", "box", "margin", "samples", "seed", "displacements", "threads", "out")


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("experiment")
    group.add_argument("--config", help="JSON or YAML file mirroring these flags")
    group.add_argument("--dim", help="lattice dimension")
    group.add_argument("--p", help="bond probability")
    group.add_argument("--t", help="direction t, e.g. 1,0,0")
    group.add_argument("--box", help="L, 'a,b,c' or 'lo..hi'")
    group.add_argument("--margin", help="minimal distance of points to the box shell")
    group.add_argument("--samples", help="Monte Carlo sample count")
    group.add_argument("--seed", help="master seed")
    group.add_argument("--displacements", "--x", dest="displacements", help="'1,0,0;2,0,0' or a file")
    group.add_argument("--threads", help="worker processes (default PERCOZ_THREADS or 1)")
    group.add_argument("--out", help="output directory, or a .json record path")
    group.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    group.add_argument("--quiet", action="store_true", default=None, help="no progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="percoz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"percoz {CODE_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for command in COMMANDS:
        p = sub.add_parser(command.name, help=command.description, description=command.description)
        _add_common(p)
        options = p.add_argument_group(f"{command.name} options")
        for opt in command.options:
            if opt.positional:
                options.add_argument(opt.key, nargs="?", default=None, help=opt.help)
            elif opt.flag:
                options.add_argument(f"--{opt.name}", dest=opt.key, action="store_true", default=None, help=opt.help)
            else:
                options.add_argument(f"--{opt.name}", dest=opt.key, default=None, help=opt.help)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    setup_logging(args.log_level)

    values = vars(args)
    overrides = {key: values.get(key) for key in COMMON}
    overrides["quiet"] = values.get("quiet")
    command = next(c for c in COMMANDS if c.name == args.command)
    overrides.update({opt.key: values.get(opt.key) for opt in command.options})
    try:
        spec = ExperimentSpec.load(args.command, args.config, overrides)
    except UsageError as exc:
        for problem in exc.fields:
            log.error("%s", problem)
        return 2
    log.debug("%r", spec)
    return run(spec, command)


if __name__ == "__main__":
    raise SystemExit(main())
