"""Command line: ``graphcoords {extract,train,eval,diagnose,relabel}``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import ConfigError, load_config, preset_names
from .errors import NumericalError
from .matio import format_value

log = logging.getLogger("graphcoords")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# flag -> config key
_FLAG_KEYS = {
    "seed": "seed", "threads": "threads", "out": "out", "edges": "edges", "graph": "graph",
    "layers": "layers", "transform": "transform", "method": "method", "M": "M", "n_c": "n_c",
    "variance": "variance", "pairs": "pairs", "features": "features", "categories": "categories",
    "labels": "labels", "splits": "splits", "embeddings": "embeddings", "model": "model",
    "hidden": "hidden", "head": "head", "max_epochs": "max_epochs", "patience": "patience",
    "batch_size": "batch_size", "step_size": "step_size", "eval_every": "eval_every",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--preset", help=f"shipped preset ({', '.join(preset_names())})")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--edges")
    p.add_argument("--graph", choices=("unweighted", "weighted", "multilayer"))
    p.add_argument("--layers", type=int)
    p.add_argument("--transform", choices=("identity", "one_minus"))
    p.add_argument("--method", choices=("tc", "dvc"))
    p.add_argument("-M", "--anchors", dest="M", type=int)
    dims = p.add_mutually_exclusive_group()
    dims.add_argument("--n-c", dest="n_c", type=int)
    dims.add_argument("--variance", type=float)
    dims.add_argument("--pairs", type=int)


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features")
    p.add_argument("--categories")
    p.add_argument("--labels")
    p.add_argument("--splits")
    p.add_argument("--embeddings", help="directory written by 'extract' (otherwise extracts inline)")
    p.add_argument("--hidden")
    p.add_argument("--head", choices=("softmax", "sigmoid"))
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--step-size", dest="step_size", type=float)
    p.add_argument("--eval-every", dest="eval_every", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphcoords", description="Graph coordinate embeddings + feed-forward classifier")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="compute TC/DVC embeddings")
    _common(p)

    p = sub.add_parser("train", help="train the classifier")
    _common(p)
    _train_flags(p)

    p = sub.add_parser("eval", help="evaluate a trained model")
    _common(p)
    _train_flags(p)
    p.add_argument("--model", help="model directory written by 'train'")

    p = sub.add_parser("diagnose", help="ambiguous edges, duplicate coordinates, spectrum stability")
    _common(p)

    p = sub.add_parser("relabel", help="densify string node ids")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    return parser


def _overrides(args: argparse.Namespace) -> list[tuple[str, str]]:
    pairs = []
    for flag, key in _FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            pairs.append((key, str(val)))
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append((key.strip(), val.strip()))
    return pairs


def _print(record: dict) -> None:
    for k, v in record.items():
        print(f"{k} = {format_value(v)}")


def _run(args: argparse.Namespace) -> dict:
    if args.command == "relabel":
        return pipeline.cmd_relabel(args.input, args.out)
    cfg = load_config(args.config, args.preset, _overrides(args))
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        threadpool_limits = None
    command = {
        "extract": pipeline.cmd_extract,
        "train": lambda c: pipeline.cmd_train(c, log=log.info),
        "eval": pipeline.cmd_eval,
        "diagnose": pipeline.cmd_diagnose,
    }[args.command]
    if threadpool_limits is None:
        return command(cfg)
    with threadpool_limits(limits=cfg.threads):
        return command(cfg)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        record = _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, IndexError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    _print(record)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
