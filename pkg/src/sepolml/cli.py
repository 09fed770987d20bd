"""Command-line entry point: ``sepolml <verb> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, DataError, SepolmlError
from .parser import ParseError, UndeclaredType, parse_document, serialize, validate_references

log = logging.getLogger("sepolml")

VERBS = ("generate", "parse", "graph", "embed", "train", "evaluate", "predict", "report", "pipeline")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    # subcommands repeat the global flags so they may follow the verb;
    # SUPPRESS keeps a subparser default from clobbering a value given earlier
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=default, help="JSON run configuration")
    p.add_argument("--seed", type=int, metavar="N", default=default, help="overrides the config seed")
    p.add_argument("--out", metavar="DIR", default=default, help="run directory (overrides the config)")
    p.add_argument("--models", metavar="LIST", default=default, help="comma-separated subset of rf,svm,mlp,stacking")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sepolml", description="SELinux policy graph embedding and violation classification")
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    def verb(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    verb("generate", "write a synthetic labeled corpus")
    p = verb("parse", "echo a policy file in canonical form")
    p.add_argument("file")
    p.add_argument("--strict", action="store_true", help="require every type to be declared")
    p.add_argument("--output", metavar="PATH", help="write here instead of stdout")
    verb("graph", "build the policy graph and its JSON and Cypher exports")
    verb("embed", "learn node2vec embeddings of the graph")
    verb("train", "train the selected models")
    verb("evaluate", "score trained models on the held-out split")
    p = verb("predict", "label the examples of a policy file")
    p.add_argument("policy", nargs="?", help="policy file; rules sharing a type form one example")
    p.add_argument("--model", required=True, metavar="PATH")
    p.add_argument("--embeddings", metavar="PATH", help="defaults to the run directory's")
    p.add_argument("--dataset", metavar="PATH", help="take examples from a dataset CSV/JSON instead")
    p.add_argument("--output", metavar="PATH", help="CSV destination (default stdout)")
    p = verb("report", "consolidate metrics files into one table")
    p.add_argument("metrics", nargs="*", help="metrics JSON files (default: the run's)")
    verb("pipeline", "run every stage in order")
    return ap


def _cmd_parse(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {args.file}: {exc.strerror}") from None
    try:
        doc = parse_document(text, mode="strict" if args.strict else "lenient", source_name=args.file)
    except (ParseError, UndeclaredType) as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return 2
    for problem in validate_references(doc):
        log.info("%s: %s", args.file, problem)
    out = serialize(doc)
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return 0


def _run(args):
    from .manifest import MANIFEST_NAME
    from .pipeline import Run

    base = None
    if args.config is None and args.seed is None:
        # later stages reuse the configuration an earlier stage recorded
        manifest = Path(args.out or "run") / MANIFEST_NAME
        if manifest.exists():
            base = json.loads(manifest.read_text(encoding="utf-8")).get("config")
            if base is not None and args.out is not None:
                base["out"] = args.out
    cfg = load_config(args.config, seed=args.seed, out=args.out, models=args.models, base=base)
    return Run(cfg)


def _cmd_predict(args) -> int:
    from .pipeline import Paths, predict_file

    if args.policy is None and args.dataset is None:
        raise ConfigError("predict needs a policy file or --dataset")
    emb = args.embeddings
    if emb is None:
        emb = Paths(Path(args.out or "run")).embeddings
        if not emb.exists():
            raise DataError(f"missing embeddings {emb}; run `sepolml embed` or pass --embeddings")
    text = predict_file(args.model, args.policy, emb, args.dataset)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args) -> int:
    from .pipeline import load_metrics, render_report

    if args.metrics:
        sys.stdout.write(render_report(load_metrics(args.metrics)))
    else:
        sys.stdout.write(_run(args).report())
    return 0


def dispatch(args) -> int:
    if args.verb == "parse":
        return _cmd_parse(args)
    if args.verb == "predict":
        return _cmd_predict(args)
    if args.verb == "report":
        return _cmd_report(args)
    run = _run(args)
    if args.verb == "pipeline":
        sys.stdout.write(run.pipeline())
    else:
        getattr(run, args.verb)()
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"sepolml: error: {exc}", file=sys.stderr)
        return 1
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except SepolmlError as exc:
        print(f"sepolml: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # anything unexpected is a bug
        log.exception("internal error")
        print(f"sepolml: internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
