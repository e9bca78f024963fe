"""Command line entry point: ``romkit <stage> --config FILE``.

Exit codes: 0 success, 1 other failure, 2 configuration error,
3 numerical failure, 4 I/O or snapshot format error.
"""
import argparse
import logging
import sys

from ..exceptions import ConfigError, NumericalError, RomkitError, SnapshotFormatError
from .config import load_config
from .offline import Workspace, default_output_root, run_fom, run_offline, run_sample, run_train
from .online import load_reports, run_evaluate
from .report import markdown_table, run_plot, run_report

log = logging.getLogger("romkit")


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="pipeline configuration file")
    parser.add_argument("--seed", type=int, default=d(None), help="override [pipeline] seed")
    parser.add_argument("--out", default=d(None), help="output directory (default $ROMKIT_OUT or ./romkit-out)")
    parser.add_argument("--force", action="store_true", default=d(False), help="rerun stages with current artifacts")
    parser.add_argument("--threads", type=int, default=d(1), help="parallel full-order solves")


def build_parser():
    parser = argparse.ArgumentParser(prog="romkit", description="Reduced order modelling pipeline")
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    sub.add_parser("sample", parents=[common], help="draw training and test parameters")
    fom = sub.add_parser("fom", help="full-order solves")
    fom_sub = fom.add_subparsers(dest="fom_command", required=True)
    fom_sub.add_parser("run", parents=[common], help="solve at every training parameter")
    sub.add_parser("train", parents=[common], help="fit every configured method chain")
    sub.add_parser("evaluate", parents=[common], help="test errors and timings")
    sub.add_parser("report", parents=[common], help="write report.csv, errors.csv and report.md")
    sub.add_parser("plot", parents=[common], help="write SVG figures")
    sub.add_parser("all", parents=[common], help="every stage in order")
    return parser


def _run(args):
    if args.config is None:
        raise ConfigError("--config is required")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    cfg = load_config(args.config).with_overrides(seed=args.seed)
    out = args.out or cfg.get("pipeline", "output") or default_output_root()
    ws = Workspace(out, cfg)
    cmd = args.command
    ran = True
    if cmd == "sample":
        ran = run_sample(ws, args.force)
    elif cmd == "fom":
        ran = run_fom(ws, args.force, args.threads)
    elif cmd == "train":
        ran = run_train(ws, args.force)
    elif cmd == "evaluate":
        ran = run_evaluate(ws, args.force, args.threads)
    elif cmd == "report":
        ran = run_report(ws, args.force)
        sys.stdout.write(markdown_table(load_reports(ws)))
    elif cmd == "plot":
        ran = run_plot(ws, args.force)
    elif cmd == "all":
        stages = run_offline(ws, args.force, args.threads)
        ran = bool(stages)
        for step in (run_evaluate, run_report, run_plot):
            kwargs = {"threads": args.threads} if step is run_evaluate else {}
            ran = step(ws, args.force or ran, **kwargs) or ran
        sys.stdout.write(markdown_table(load_reports(ws)))
    if not ran:
        log.info("%s: artifacts in %s are current; nothing to do (use --force to rerun)", cmd, ws.root)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    except (SnapshotFormatError, OSError) as exc:
        log.error("I/O error: %s", exc)
        return 4
    except RomkitError as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
