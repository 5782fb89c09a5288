"""Command-line frontend.

Subcommands:
    score       score one image-text pair, print the report as JSON
    requests    emit the phrase-table request file a dataset needs
    bench       run a benchmark protocol (pairwise / retrieval / sweep / ablation)
    inspect     dump per-token alignment records as CSV

Options resolve as defaults < config file (TOML) < command-line flags.
Exit codes: 0 success, 2 configuration or data error, 3 missing phrase-table
entries (the needed request lines are printed first).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import bench as bench_mod
from .alignment import align_tokens
from .bundle import load_concept_pool, load_image_bundle, load_phrase_table, load_text_bundle
from .captions import extract_pairs_heuristic, load_lexicon, load_pairs_file
from .embeddings import similarity_matrix
from .errors import AbeClipError, MissingPhraseEntriesError
from .refinement import emit_phrase_requests, refine_encoding
from .scoring import ScoreParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_PHRASES = 3

_DEFAULTS = {
    "images": None,
    "texts": None,
    "pairs": None,
    "lexicon": None,
    "pool": None,
    "table": None,
    "cases": None,
    "queries": None,
    "gallery": None,
    "out": None,
    "k": 5,
    "omega": 0.3,
    "p_neighbors": 5,
    "include_special_tokens": False,
    "workers": 1,
    "timestamp": True,
    "deterministic": True,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file; flags override it")
    parser.add_argument("--images", help="image bundle directory")
    parser.add_argument("--texts", help="text bundle directory")
    parser.add_argument("--pairs", help="pre-parsed pairs file (JSON lines)")
    parser.add_argument("--lexicon", help="attribute word list for the heuristic extractor")
    parser.add_argument("--pool", help="concept pool bundle directory")
    parser.add_argument("--table", help="phrase table bundle directory")
    parser.add_argument("--cases", help="pairwise case file (JSON lines)")
    parser.add_argument("--queries", help="retrieval query file (JSON lines)")
    parser.add_argument("--gallery", help="retrieval gallery id list, one per line")
    parser.add_argument("--k", type=int, help="top-K patches per token")
    parser.add_argument("--omega", type=float, help="global/local fusion weight in [0,1]")
    parser.add_argument("--p-neighbors", dest="p_neighbors", type=int, help="concept neighbors per object")
    parser.add_argument(
        "--include-special-tokens",
        dest="include_special_tokens",
        action="store_true",
        default=None,
        help="aggregate over every token instead of content tokens only",
    )
    parser.add_argument("--workers", type=int, help="worker threads for benchmarks")
    parser.add_argument("--out", help="output file or directory")
    parser.add_argument(
        "--no-timestamp",
        dest="timestamp",
        action="store_false",
        default=None,
        help="omit the timestamp column so result files are byte-stable",
    )
    parser.add_argument(
        "--deterministic",
        dest="deterministic",
        action="store_true",
        default=None,
        help="force deterministic iteration order in outputs (always on; recorded in config)",
    )
    parser.add_argument(
        "--dump-config",
        action="store_true",
        help="print the effective configuration and exit",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abeclip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score one image-text pair")
    p_score.add_argument("--image-id", required=True)
    p_score.add_argument("--text-id", required=True)
    _add_common(p_score)

    p_req = sub.add_parser("requests", help="emit needed phrase-table requests")
    _add_common(p_req)

    p_bench = sub.add_parser("bench", help="run a benchmark protocol")
    p_bench.add_argument(
        "protocol", choices=["pairwise", "retrieval", "sweep", "ablation"]
    )
    p_bench.add_argument("--mode", choices=list(bench_mod.MODES), default="full")
    p_bench.add_argument("--k-grid", default="1,3,5,8,10", help="comma-separated K values for sweep")
    p_bench.add_argument(
        "--omega-grid", default="0.0,0.1,0.2,0.3,0.5,0.7,1.0",
        help="comma-separated omega values for sweep",
    )
    p_bench.add_argument("--recall-ks", default="1,5,10", help="comma-separated K for recall@K")
    _add_common(p_bench)

    p_inspect = sub.add_parser("inspect", help="dump per-token alignment CSV")
    p_inspect.add_argument("--image-id", required=True)
    p_inspect.add_argument("--text-id", required=True)
    p_inspect.add_argument(
        "--refined", action="store_true", help="inspect the refined token embeddings"
    )
    _add_common(p_inspect)

    return parser


def _effective_config(args: argparse.Namespace) -> dict:
    config = dict(_DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            loaded = tomllib.load(fh)
        unknown = set(loaded) - set(config)
        if unknown:
            raise AbeClipError(f"unknown config keys: {sorted(unknown)}")
        config.update(loaded)
    for key in config:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    return config


def _dump_config(config: dict) -> None:
    for key in sorted(config):
        value = config[key]
        if value is None:
            continue
        if isinstance(value, bool):
            print(f"{key} = {'true' if value else 'false'}")
        elif isinstance(value, (int, float)):
            print(f"{key} = {value}")
        else:
            print(f'{key} = "{value}"')


def _require(config: dict, *keys: str) -> None:
    missing = [key for key in keys if not config[key]]
    if missing:
        raise AbeClipError(f"missing required option(s): {', '.join('--' + m for m in missing)}")


def _params(config: dict) -> ScoreParams:
    return ScoreParams(
        omega=float(config["omega"]),
        k=int(config["k"]),
        p=int(config["p_neighbors"]),
        include_special_tokens=bool(config["include_special_tokens"]),
    )


def _load_structures(config: dict, texts: dict) -> dict:
    if config["pairs"]:
        return load_pairs_file(config["pairs"])
    lexicon = load_lexicon(config["lexicon"])
    return {
        text_id: extract_pairs_heuristic(text.caption, lexicon, caption_id=text_id)
        for text_id, text in texts.items()
    }


def _load_scorer(config: dict) -> bench_mod.Scorer:
    _require(config, "images", "texts", "pool", "table")
    images = load_image_bundle(config["images"])
    texts = load_text_bundle(config["texts"])
    pool = load_concept_pool(config["pool"])
    table = load_phrase_table(config["table"])
    structures = _load_structures(config, texts)
    return bench_mod.Scorer(images, texts, structures, pool, table, _params(config))


def _print_missing(exc: MissingPhraseEntriesError) -> None:
    print("missing phrase-table entries; request lines:", file=sys.stderr)
    for attribute, obj in exc.keys:
        print(json.dumps({"attribute": attribute, "object": obj}))


def cmd_score(args: argparse.Namespace, config: dict) -> int:
    scorer = _load_scorer(config)
    report = scorer.report(args.image_id, args.text_id)
    print(report.to_json())
    if config["out"]:
        with open(config["out"], "a", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_requests(args: argparse.Namespace, config: dict) -> int:
    _require(config, "texts", "pool", "out")
    texts = load_text_bundle(config["texts"])
    pool = load_concept_pool(config["pool"])
    structures = _load_structures(config, texts)
    params = _params(config)
    count = emit_phrase_requests(
        structures.values(), texts, pool, params.refinement, config["out"]
    )
    print(f"wrote {count} request(s) to {config['out']}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace, config: dict) -> int:
    scorer = _load_scorer(config)
    text = scorer.texts[args.text_id]
    image = scorer.images[args.image_id]
    if args.refined:
        text = refine_encoding(
            text,
            scorer.structure(args.text_id),
            scorer.pool,
            scorer.table,
            scorer.params.refinement,
        )
    sim = similarity_matrix(text, image)
    mask = (
        [True] * text.n_tokens
        if scorer.params.include_special_tokens
        else text.content_mask
    )
    rows = align_tokens(sim, mask, scorer.params.k)
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["token_index", "token_text", "phi", "patch_indices"])
    for row in rows:
        writer.writerow(
            [
                row.token_index,
                text.token_texts[row.token_index],
                repr(row.token_score),
                ";".join(str(i) for i in row.patch_indices),
            ]
        )
    if config["out"]:
        with open(config["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(buffer.getvalue())
    else:
        sys.stdout.write(buffer.getvalue())
    return EXIT_OK


def _grid(raw: str) -> list[float]:
    return [float(v) for v in str(raw).split(",") if v != ""]


def cmd_bench(args: argparse.Namespace, config: dict) -> int:
    scorer = _load_scorer(config)
    workers = int(config["workers"])
    if args.protocol == "pairwise":
        _require(config, "cases")
        cases = bench_mod.load_cases(config["cases"])
        results = [bench_mod.pairwise_accuracy(cases, scorer, args.mode, workers=workers)]
    elif args.protocol == "ablation":
        _require(config, "cases")
        cases = bench_mod.load_cases(config["cases"])
        results = [
            bench_mod.pairwise_accuracy(cases, scorer, mode, workers=workers)
            for mode in bench_mod.MODES
        ]
    elif args.protocol == "sweep":
        _require(config, "cases")
        cases = bench_mod.load_cases(config["cases"])
        results = bench_mod.sweep(
            cases,
            scorer,
            [int(k) for k in _grid(args.k_grid)],
            _grid(args.omega_grid),
            workers=workers,
        )
    else:
        _require(config, "queries", "gallery")
        retrieval = bench_mod.load_retrieval_set(config["queries"], config["gallery"])
        results = bench_mod.retrieval_recall(
            retrieval, scorer, [int(k) for k in _grid(args.recall_ks)], workers=workers
        )

    for result in results:
        row = result.row()
        print(
            f"{row['metric']:>20s}  mode={row['mode'] or '-':<11s} k={row['k']} "
            f"omega={row['omega']} -> {result.value:.4f} ({result.correct}/{result.total})"
        )
    if config["out"]:
        out_dir = config["out"]
        os.makedirs(out_dir, exist_ok=True)
        stamp = (
            datetime.datetime.now(datetime.timezone.utc).isoformat()
            if config["timestamp"]
            else None
        )
        bench_mod.write_results_csv(os.path.join(out_dir, "results.csv"), results, stamp)
        bench_mod.write_items_jsonl(os.path.join(out_dir, "items.jsonl"), results)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _effective_config(args)
        if args.dump_config:
            _dump_config(config)
            return EXIT_OK
        if args.command == "score":
            return cmd_score(args, config)
        if args.command == "requests":
            return cmd_requests(args, config)
        if args.command == "bench":
            return cmd_bench(args, config)
        if args.command == "inspect":
            return cmd_inspect(args, config)
        raise AbeClipError(f"unknown command {args.command!r}")
    except MissingPhraseEntriesError as exc:
        _print_missing(exc)
        return EXIT_MISSING_PHRASES
    except (AbeClipError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
