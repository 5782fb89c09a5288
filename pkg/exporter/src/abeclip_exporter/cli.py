"""Command-line frontend for the export jobs.

Subcommands: images, texts, concepts, phrases, parse. All take --backend
(toy or hf-clip); the hf-clip backend additionally needs --model and
honors --space pre|post.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .jobs import (
    ExportJob,
    export_concept_pool,
    export_images,
    export_texts,
    fulfill_requests,
    parse_captions,
    read_captions,
    read_list,
)


def _add_backend_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["toy", "hf-clip"], default="toy")
    parser.add_argument("--model", dest="model_id", help="checkpoint id or path (hf-clip)")
    parser.add_argument("--space", choices=["pre", "post"], default="post")
    parser.add_argument("--dim", type=int, default=64, help="embedding dim (toy backend)")
    parser.add_argument("--grid", type=int, default=7, help="patch grid side (toy backend)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abeclip-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_images = sub.add_parser("images", help="export an image bundle")
    p_images.add_argument("paths", nargs="+", help="image files")
    _add_backend_args(p_images)

    p_texts = sub.add_parser("texts", help="export a text bundle")
    p_texts.add_argument("captions", help="caption file (JSON lines or plain text)")
    _add_backend_args(p_texts)

    p_concepts = sub.add_parser("concepts", help="export a concept pool bundle")
    p_concepts.add_argument("concepts", help="concept list, one per line")
    _add_backend_args(p_concepts)

    p_phrases = sub.add_parser("phrases", help="fulfill a phrase request file")
    p_phrases.add_argument("requests", help="request file from the scoring engine")
    _add_backend_args(p_phrases)

    p_parse = sub.add_parser("parse", help="extract attribute-object pairs")
    p_parse.add_argument("captions", help="caption file (JSON lines or plain text)")
    p_parse.add_argument("--parser", choices=["auto", "stanza", "lexicon"], default="auto")
    p_parse.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "parse":
            job = ExportJob(parser=args.parser)
            out = parse_captions(job, read_captions(args.captions), args.out)
            print(f"wrote pairs to {out}")
            return 0

        job = ExportJob(
            backend=args.backend,
            model_id=args.model_id,
            space=args.space,
            dim=args.dim,
            patch_grid=args.grid,
            device=args.device,
        )
        if args.command == "images":
            out = export_images(job, [Path(p) for p in args.paths], args.out)
        elif args.command == "texts":
            out = export_texts(job, read_captions(args.captions), args.out)
        elif args.command == "concepts":
            out = export_concept_pool(job, read_list(args.concepts), args.out)
        elif args.command == "phrases":
            out = fulfill_requests(job, args.requests, args.out)
        else:
            raise ValueError(f"unknown command {args.command!r}")
        print(f"wrote bundle {out}")
        return 0
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
