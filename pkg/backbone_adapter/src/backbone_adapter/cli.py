"""Command-line entry point; flags mirror the engine's ``encode`` command."""

from __future__ import annotations

import argparse
import json
import sys

from .drpr_writer import validate
from .exporter import ExportSpec, export, read_items_jsonl


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="backbone-export")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="encode a JSONL corpus to a DRPR file")
    p.add_argument("--model", required=True, help="local model directory or identifier")
    p.add_argument("--corpus", required=True, help="JSONL with id/text fields")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--target", choices=["query", "passage"], default="passage")
    p.add_argument("--phrasing", default="a_few_words",
                   choices=["one_word", "a_few_words", "three_words"])
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--no-logits", action="store_true")
    p.add_argument("--top-logits", type=int, default=0,
                   help="keep only the top-t logits per row (sparse layout)")

    p = sub.add_parser("validate", help="structural check of a DRPR file")
    p.add_argument("path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        print(json.dumps(validate(args.path)))
        return 0
    spec = ExportSpec(
        model=args.model, k=args.k, target=args.target, phrasing=args.phrasing,
        batch_size=args.batch_size, with_logits=not args.no_logits,
        top_logits=args.top_logits, max_length=args.max_length,
    )
    header = export(spec, read_items_jsonl(args.corpus), args.out)
    print(json.dumps({"count": header.count, "k": header.k,
                      "h": header.h, "v": header.v, "flags": header.flags}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
