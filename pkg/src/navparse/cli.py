"""Command-line entry points: generate, train, eval, parse, serve.

Exit codes are stable: 2 for input validation problems (argparse uses the
same code for usage errors), 3 for training failures, 4 for unknown page
ids. FLIN_LOG_LEVEL ∈ {debug, info, warn, error} controls logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import (DatasetError, generate, load_examples, load_paraphrases,
                      load_templates, save_examples, split)
from .evaluation import format_metrics_table, report, report_to_dict
from .inference import prediction_to_dict
from .orchestrator import (TrainingConfig, load_bundle, train_all,
                           train_components)
from .schema import SchemaError, load_site_schema
from .server import serve as make_server

EXIT_VALIDATION = 2
EXIT_TRAINING = 3
EXIT_UNKNOWN_PAGE = 4

_LOG_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO,
               "warn": logging.WARNING, "error": logging.ERROR}


def _setup_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("FLIN_LOG_LEVEL", "warn").lower(),
                            logging.WARNING)
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


def cmd_generate(args) -> int:
    try:
        schema = load_site_schema(args.schema)
        templates = load_templates(args.templates)
        paraphrases = load_paraphrases(args.paraphrases)
        if args.count <= 0:
            raise DatasetError("--count must be positive")
        examples = generate(schema, templates, paraphrases, args.count,
                            args.seed)
        ratios = tuple(float(r) for r in args.ratios.split(","))
        if len(ratios) != 3:
            raise DatasetError("--ratios must be three comma-separated numbers")
        train, valid, test = split(examples, ratios, args.seed)
    except (SchemaError, DatasetError, OSError) as exc:
        return _fail(EXIT_VALIDATION, f"error: {exc}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_examples(train, out / "train.jsonl")
    save_examples(valid, out / "valid.jsonl")
    save_examples(test, out / "test.jsonl")
    print(json.dumps({"train": len(train), "valid": len(valid),
                      "test": len(test), "out": str(out)}))
    return 0


def _config_from_file(path: str | None) -> TrainingConfig:
    if path is None:
        return TrainingConfig()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return TrainingConfig(**raw)


def cmd_train(args) -> int:
    try:
        config = _config_from_file(args.config)
        schema = load_site_schema(Path(args.data) / "schema.json")
        train = load_examples(Path(args.data) / "train.jsonl", schema)
        valid = load_examples(Path(args.data) / "valid.jsonl", schema)
    except (SchemaError, DatasetError, OSError, TypeError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, f"error: {exc}")
    try:
        if args.component == "all":
            train_all(schema, train, valid, config, out_dir=args.out)
        else:
            train_components(schema, train, valid, config, out_dir=args.out,
                             components=(args.component,))
        _print_history(Path(args.out) / "history.jsonl")
    except Exception as exc:  # training failures map to a dedicated exit code
        return _fail(EXIT_TRAINING, f"training failed: {exc}")
    return 0


def _print_history(path: Path) -> None:
    if path.is_file():
        sys.stdout.write(path.read_text(encoding="utf-8"))


def cmd_eval(args) -> int:
    try:
        schema = load_site_schema(args.schema)
        test = load_examples(args.test, schema)
        if not test:
            raise DatasetError(f"{args.test} holds no examples")
        bundle = load_bundle(args.bundle)
    except (SchemaError, DatasetError, OSError, FileNotFoundError) as exc:
        return _fail(EXIT_VALIDATION, f"error: {exc}")
    pairs = []
    predictions = []
    for example in test:
        prediction = bundle.parse(schema, example.page_id, example.command)
        predictions.append(
            prediction_to_dict(example.command, example.page_id, prediction))
        pairs.append((example.gold,
                      None if prediction is None else prediction.instruction))
    rep = report(pairs, schema)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "predictions.jsonl").open("w", encoding="utf-8") as handle:
        for row in predictions:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    (out / "report.json").write_text(
        json.dumps(report_to_dict(rep), indent=2) + "\n", encoding="utf-8")
    print(format_metrics_table([(schema.site_id, rep)]))
    return 0


def cmd_parse(args) -> int:
    try:
        schema = load_site_schema(args.schema)
        bundle = load_bundle(args.bundle)
    except (SchemaError, OSError, FileNotFoundError) as exc:
        return _fail(EXIT_VALIDATION, f"error: {exc}")
    if args.page not in schema.pages:
        return _fail(EXIT_UNKNOWN_PAGE, f"error: unknown page id {args.page!r}")

    def parse_one(command: str) -> None:
        prediction = bundle.parse(schema, args.page, command)
        print(json.dumps(prediction_to_dict(command, args.page, prediction),
                         ensure_ascii=False))

    if args.repl:
        for line in sys.stdin:
            command = line.strip()
            if not command:
                continue
            parse_one(command)
        return 0
    if not args.command or not args.command.strip():
        return _fail(EXIT_VALIDATION, "error: --command must be non-empty")
    parse_one(args.command)
    return 0


def cmd_serve(args) -> int:
    try:
        schema = load_site_schema(args.schema)
        bundle = load_bundle(args.bundle)
    except (SchemaError, OSError, FileNotFoundError) as exc:
        return _fail(EXIT_VALIDATION, f"error: {exc}")
    server = make_server(bundle, schema, args.port)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (POST /v1/parse, GET /v1/health)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="navparse",
        description="Map natural-language commands to website navigation "
                    "instructions over declarative action schemas.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("generate", help="generate a synthetic labeled corpus")
    p.add_argument("--schema", required=True)
    p.add_argument("--templates", required=True)
    p.add_argument("--paraphrases", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the model components")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True,
                   help="directory with schema.json, train.jsonl, valid.jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--component", default="all",
                   choices=["action", "mention", "value", "all"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a bundle on a test file")
    p.add_argument("--bundle", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("parse", help="parse one command (or a REPL)")
    p.add_argument("--bundle", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--page", required=True)
    p.add_argument("--command", default=None)
    p.add_argument("--repl", action="store_true")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("serve", help="serve parse over HTTP")
    p.add_argument("--bundle", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
