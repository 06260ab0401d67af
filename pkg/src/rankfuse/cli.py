"""Command-line interface.

Subcommands cover the whole pipeline: generate a synthetic bundle, build
a database file from a bundle, run single queries, evaluate a mode over a
held-out split, sweep fusion weights, and serve the HTTP API. Exit status
is 0 on success, 1 on validation or I/O failures, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .clinical import decode, encode
from .errors import RankfuseError
from .evaluation import (
    DEFAULT_SPLIT_FRACTION,
    confusion_csv,
    evaluate,
    format_report,
    format_sweep_table,
    split_bundle,
    sweep_csv,
    weight_sweep,
)
from .ingest import (
    PACKED_BINARY,
    TEXT_TABULAR,
    gen_synthetic,
    load_bundle,
    load_database,
    save_bundle,
    save_database,
)
from .retrieval import MODE_CBIDR, MODE_CBIR, Query, cbidr_query, cbir_query
from .service import DB_PATH_ENV

DEFAULT_BUNDLE_DIR = "synthetic-bundle"
DEFAULT_DB_FILE = "rankfuse.db"


def _weights_arg(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(
            f"weights must be two comma-separated numbers, got {text!r}"
        )
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"weights must be numeric, got {text!r}"
        ) from None


def _vector_arg(text: str):
    try:
        return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"embedding must be comma-separated numbers, got {text!r}"
        ) from None


def _clinical_pairs(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise RankfuseError(
                f"clinical values take the form name=value, got {pair!r}"
            )
        out[name] = value
    return out


def _resolve_db_path(args) -> str:
    path = args.db or os.environ.get(DB_PATH_ENV)
    if not path:
        raise RankfuseError(
            f"no database path: pass --db or set {DB_PATH_ENV}"
        )
    return path


def cmd_gen_synth(args) -> int:
    bundle = gen_synthetic(
        classes=args.classes,
        per_class=args.per_class,
        dim=args.dim,
        cluster_sep=args.cluster_sep,
        clinical_noise=args.clinical_noise,
        seed=args.seed,
    )
    save_bundle(bundle, args.out, format=args.format)
    print(
        f"wrote bundle to {args.out}: {bundle.size} records, "
        f"{args.classes} classes, dim {args.dim}, "
        f"bit width {bundle.schema.total_bits}"
    )
    return 0


def cmd_build_index(args) -> int:
    bundle = load_bundle(args.bundle)
    db = bundle.to_database()
    save_database(db, args.out)
    print(
        f"wrote database to {args.out}: {db.size} records, "
        f"dim {db.index.dim}, {len(db.class_labels)} classes"
    )
    return 0


def cmd_query(args) -> int:
    db = load_database(_resolve_db_path(args))
    exclude_id = None
    if (args.embedding is None) == (args.item_id is None):
        raise RankfuseError(
            "exactly one of --embedding and --item-id must be given"
        )
    if args.item_id is not None:
        position = db.index.position_of(args.item_id)
        vector = db.index.vectors[position]
        bits = db.clinical[position]
        exclude_id = args.item_id
    else:
        vector = np.asarray(args.embedding, dtype=np.float32)
        bits = None
    raw = _clinical_pairs(args.clinical)
    if raw:
        bits = encode(raw, db.schema)

    started = time.perf_counter()
    if args.mode == MODE_CBIR:
        result = cbir_query(db, vector, args.k, exclude_id=exclude_id)
    else:
        result = cbidr_query(
            db,
            Query(vector=vector, clinical=bits, weights=args.weights,
                  k=args.k),
            exclude_id=exclude_id,
        )
    elapsed_ms = (time.perf_counter() - started) * 1000.0

    entries = []
    for entry in result.entries:
        position = db.index.position_of(entry.id)
        summary = (decode(db.clinical[position], db.schema)
                   if args.mode == MODE_CBIDR else {})
        entries.append({
            "id": entry.id,
            "label": entry.label,
            "score": entry.score,
            "d_image": entry.d_image,
            "d_clinical": entry.d_clinical,
            "clinical": summary,
        })
    print(json.dumps(
        {
            "entries": entries,
            "mode": result.mode,
            "weights": list(args.weights),
            "timing_ms": elapsed_ms,
        },
        indent=2,
    ))
    return 0


def _load_split(args):
    bundle = load_bundle(args.bundle)
    return split_bundle(bundle, fraction=args.fraction, seed=args.seed)


def cmd_evaluate(args) -> int:
    db, cases = _load_split(args)
    report = evaluate(db, cases, args.mode, weights=args.weights, k=args.k,
                      workers=args.workers)
    sys.stdout.write(format_report(report))
    if args.confusion_csv:
        Path(args.confusion_csv).write_text(confusion_csv(report),
                                            encoding="utf-8")
        print(f"wrote confusion matrix to {args.confusion_csv}")
    return 0


def cmd_sweep_weights(args) -> int:
    db, cases = _load_split(args)
    rows = weight_sweep(db, cases, k=args.k, workers=args.workers)
    sys.stdout.write(format_sweep_table(rows))
    if args.csv:
        Path(args.csv).write_text(sweep_csv(rows), encoding="utf-8")
        print(f"wrote sweep table to {args.csv}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(db_path=_resolve_db_path(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _add_split_flags(parser) -> None:
    parser.add_argument("--bundle", default=DEFAULT_BUNDLE_DIR,
                        help="bundle directory (default %(default)s)")
    parser.add_argument("--fraction", type=float,
                        default=DEFAULT_SPLIT_FRACTION,
                        help="searchable share of each class "
                             "(default %(default).4f)")
    parser.add_argument("--seed", type=int, default=0,
                        help="split shuffle seed (default %(default)s)")
    parser.add_argument("--k", type=int, default=5,
                        help="results per query (default %(default)s)")
    parser.add_argument("--workers", type=int, default=1,
                        help="concurrent query evaluations "
                             "(default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankfuse",
        description="Multimodal retrieval: embedding distance fused with "
                    "binary clinical distance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic bundle")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--cluster-sep", type=float, default=4.0,
                   help="distance of class centers from the origin "
                        "(default %(default)s)")
    p.add_argument("--clinical-noise", type=float, default=0.05,
                   help="per-bit flip probability (default %(default)s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=DEFAULT_BUNDLE_DIR,
                   help="bundle directory (default %(default)s)")
    p.add_argument("--format", choices=[TEXT_TABULAR, PACKED_BINARY],
                   default=TEXT_TABULAR,
                   help="embeddings file format (default %(default)s)")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("build-index",
                       help="build a database file from a bundle")
    p.add_argument("--bundle", default=DEFAULT_BUNDLE_DIR)
    p.add_argument("--out", default=DEFAULT_DB_FILE)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="run one query against a database file")
    p.add_argument("--db", help=f"database file (or set {DB_PATH_ENV})")
    p.add_argument("--embedding", type=_vector_arg,
                   help="comma-separated query vector")
    p.add_argument("--item-id", type=int,
                   help="use a stored item as the query; it is excluded "
                        "from its own results")
    p.add_argument("--clinical", action="append", metavar="NAME=VALUE",
                   help="clinical field value; repeatable")
    p.add_argument("--weights", type=_weights_arg, default=(0.5, 0.5),
                   help="image,clinical weights (default 0.5,0.5)")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--mode", choices=[MODE_CBIR, MODE_CBIDR],
                   default=MODE_CBIDR)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate",
                       help="score a mode on a held-out split of a bundle")
    _add_split_flags(p)
    p.add_argument("--mode", choices=[MODE_CBIR, MODE_CBIDR],
                   default=MODE_CBIDR)
    p.add_argument("--weights", type=_weights_arg, default=(0.5, 0.5))
    p.add_argument("--confusion-csv", metavar="PATH",
                   help="also write the confusion matrix as CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-weights",
                       help="fused accuracy across the default weight grid")
    _add_split_flags(p)
    p.add_argument("--csv", metavar="PATH",
                   help="also write the table as CSV")
    p.set_defaults(func=cmd_sweep_weights)

    p = sub.add_parser("serve", help="run the HTTP query service")
    p.add_argument("--db", help=f"database file (or set {DB_PATH_ENV})")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RankfuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
