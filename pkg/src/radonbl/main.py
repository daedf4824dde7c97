"""radonbl command-line entry point."""

import argparse
import logging
import sys
from typing import Optional, Sequence

from radonbl import __version__
from radonbl.core.errors import ManifestError
from radonbl.core.manifest import ALLOWED_PARAMETERS, Command, Manifest, load_manifest
from radonbl.core.runner import ExperimentRunner
from radonbl.database.crud import get_recent_runs
from radonbl.database.database import init_database

logger = logging.getLogger(__name__)

FLAG_PARAMETERS = {"pattern"}

HELP = {
    "datum": "built-in datum name",
    "datum_file": "JSON file with n, dims, exps and maps",
    "model": "quadratic, moment, max-codim or parabola (ift also takes parabola-zero, sine)",
    "lambda": "c x k coefficient matrix, rows separated by ';'",
    "t": "parameters, comma separated",
    "deltas": "decreasing box scales in (0, 1), comma separated",
    "intervals": "closed intervals 'a,b;c,d'",
    "C": "transverse derivative bound (sampled when omitted)",
    "c": "contraction bound in [0, 1) (sampled when omitted)",
}


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit status 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_parameter_options(parser: argparse.ArgumentParser, keys: Sequence[str]):
    for key in sorted(keys):
        flag = "--" + key.replace("_", "-")
        if key in FLAG_PARAMETERS:
            parser.add_argument(flag, dest=key, action="store_true", default=None)
        else:
            parser.add_argument(flag, dest=key, default=None, help=HELP.get(key))


def _add_run_options(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    parser.add_argument("--output", "-o", default=None, help="artifact path")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="radonbl",
        description="Brascamp-Lieb weights and Radon-like operator experiments",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--debug", action="store_true", help="debug logging")
    parser.add_argument("--no-ledger", action="store_true", help="do not record the run")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    actions_by_command: dict[Command, list[str]] = {}
    for command, action in ALLOWED_PARAMETERS:
        if command != Command.REGRESS:
            actions_by_command.setdefault(command, []).append(action)
    for command, actions in actions_by_command.items():
        sub = commands.add_parser(command.value, allow_abbrev=False)
        action_parsers = sub.add_subparsers(dest="action", metavar="ACTION")
        action_parsers.required = True
        for action in actions:
            action_parser = action_parsers.add_parser(action, allow_abbrev=False)
            _add_parameter_options(action_parser, ALLOWED_PARAMETERS[(command, action)])
            _add_run_options(action_parser)

    regress_parser = commands.add_parser(
        "regress", help="compare two artifacts", allow_abbrev=False
    )
    regress_parser.add_argument("baseline")
    regress_parser.add_argument("current")
    regress_parser.add_argument("--rtol", default=None, help="relative tolerance (inf allowed)")
    regress_parser.add_argument("--output", "-o", default=None, help="write the report here")

    run_parser = commands.add_parser("run", help="run a JSON manifest", allow_abbrev=False)
    run_parser.add_argument("manifest")

    history_parser = commands.add_parser("history", help="recent runs", allow_abbrev=False)
    history_parser.add_argument("--limit", type=int, default=20)
    return parser


_CONSOLE_HANDLER: Optional[logging.Handler] = None


def configure_logging(verbose: bool, debug: bool):
    """WARNING by default so the summary line stays the only stdout output."""
    global _CONSOLE_HANDLER  # pylint: disable=global-statement
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter("%(asctime)s - %(levelname)s - %(message)s"))
    root = logging.getLogger()
    if _CONSOLE_HANDLER is not None:
        root.removeHandler(_CONSOLE_HANDLER)
    root.addHandler(handler)
    _CONSOLE_HANDLER = handler
    root.setLevel(level)


def manifest_from_args(args: argparse.Namespace) -> Manifest:
    if args.command == "regress":
        parameters = {"baseline": args.baseline, "current": args.current, "rtol": args.rtol}
        command, action, seed = Command.REGRESS, "compare", 0
    else:
        command, action, seed = Command(args.command), args.action, args.seed
        parameters = {key: getattr(args, key) for key in ALLOWED_PARAMETERS[(command, action)]}
    parameters = {k: v for k, v in parameters.items() if v is not None}
    return Manifest(command, action, parameters, seed=seed, output_path=args.output)


def print_history(limit: int):
    runs = get_recent_runs(limit)
    if not runs:
        print("no runs recorded")
        return
    for run in runs:
        created = run.created_at.strftime("%Y-%m-%d %H:%M:%S") if run.created_at else "-"
        print(
            f"{run.id:>5}  {created}  {run.command} {run.action:<14} seed={run.seed:<6} "
            f"exit={run.exit_code if run.exit_code is not None else '-'}  {run.summary or ''}"
        )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for radonbl."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.debug)

    # Initialize database
    if not args.no_ledger or args.command == "history":
        init_database()

    if args.command == "history":
        print_history(args.limit)
        return 0

    try:
        if args.command == "run":
            manifest = load_manifest(args.manifest)
        else:
            manifest = manifest_from_args(args)
    except ManifestError as e:
        print(f"radonbl: error: {e}", file=sys.stderr)
        return 1

    outcome = ExperimentRunner().run(manifest, ledger=not args.no_ledger)
    print(outcome.summary)
    for path in outcome.artifacts:
        logger.info(f"[Runner] wrote {path}")  # pylint: disable=logging-fstring-interpolation
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
