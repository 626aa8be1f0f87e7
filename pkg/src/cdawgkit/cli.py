"""Command-line interface.

Subcommands: build, stats, query, novelty, bound, loss-bins, verify.
Every path is a thin composition of library calls; nothing is computed
only here.  Standard output carries data (JSON, JSONL, CSV); progress
and diagnostics go to standard error.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification
mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from contextlib import contextmanager

import numpy as np

from .cdawg import occurrence_count
from .corpus import CORPUS_FORMATS, Corpus, CorpusError, load_corpus
from .novelty import (
    DEFAULT_BIN_EDGES,
    LowerBoundParams,
    bins_to_json,
    completion_loss_bins,
    curve_to_json,
    lower_bound_curve,
    nnsl_stats,
    novelty_curve,
    read_losses,
    smallest_n_above,
    stats_to_json,
    write_bins_csv,
    write_bound_csv,
    write_curve_csv,
)
from .oracle import naive_count, oracle_nnsl
from .query import QueryFailure, read_annotations, read_query_docs, write_annotations
from .shardexec import build_sharded, load_sharded, save_sharded, shard_file_name
from .storage import IndexFormatError, read_header

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

INDEX_DIR_ENV = "CDAWGKIT_INDEX_DIR"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this artifact reserves 2 for
    # data errors, so route usage problems to exit code 1 instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


@contextmanager
def _open_out(path: str | None):
    if path in (None, "-"):
        yield sys.stdout
    else:
        fh = open(path, "w", encoding="utf-8", newline="")
        try:
            yield fh
        finally:
            fh.close()


@contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin
    else:
        fh = open(path, "r", encoding="utf-8")
        try:
            yield fh
        finally:
            fh.close()


def _index_dir(args, parser: argparse.ArgumentParser) -> str:
    directory = args.index or os.environ.get(INDEX_DIR_ENV)
    if not directory:
        parser.error(f"--index is required (or set {INDEX_DIR_ENV})")
    return directory


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- subcommands -------------------------------------------------------------


def cmd_build(args, parser) -> int:
    directory = _index_dir(args, parser)
    corpus = load_corpus(args.input, args.format, args.separator, vocab_size=args.vocab_size)
    _progress(
        f"loaded {corpus.n_tokens} tokens / {corpus.n_docs} documents "
        f"(vocab {corpus.vocab_size}, separator {corpus.separator})"
    )
    t0 = time.perf_counter()
    index = build_sharded(corpus, shard_count=args.shards, parallelism=args.parallelism)
    elapsed = time.perf_counter() - t0
    save_sharded(index, directory)
    rate = corpus.n_tokens / elapsed if elapsed > 0 else float("inf")
    n_states = sum(cd.n_states for cd in index.shards)
    n_edges = sum(cd.n_edges for cd in index.shards)
    n_bytes = sum(
        os.path.getsize(os.path.join(directory, shard_file_name(i)))
        for i in range(index.shard_count)
    )
    _progress(
        f"built {index.shard_count} shard(s) in {elapsed:.2f}s "
        f"({rate:.0f} tokens/s), wrote {n_bytes} bytes to {directory}"
    )
    print(
        json.dumps(
            {
                "shards": index.shard_count,
                "tokens": corpus.n_tokens,
                "documents": corpus.n_docs,
                "n_states": n_states,
                "n_edges": n_edges,
                "bytes": n_bytes,
                "tokens_per_sec": round(rate, 1),
            },
            separators=(",", ":"),
        )
    )
    return EXIT_OK


def cmd_stats(args, parser) -> int:
    directory = _index_dir(args, parser)
    manifest_path = os.path.join(directory, "manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise IndexFormatError(f"no manifest.json in {directory}") from None
    shards = []
    n_states = n_edges = n_bytes = 0
    for entry in manifest.get("shards", []):
        path = os.path.join(directory, entry["file"])
        head = read_header(path)
        size = os.path.getsize(path)
        shards.append({**entry, "bytes": size, "token_width": head["token_width"]})
        n_states += head["n_states"]
        n_edges += head["n_edges"]
        n_bytes += size
    total = manifest["total_tokens"]
    print(
        json.dumps(
            {
                "shard_count": manifest["shard_count"],
                "total_tokens": total,
                "separator": manifest["separator"],
                "vocab_size": manifest["vocab_size"],
                "n_states": n_states,
                "n_edges": n_edges,
                "bytes": n_bytes,
                "states_per_token": round(n_states / total, 6),
                "edges_per_token": round(n_edges / total, 6),
                "shards": shards,
            },
            separators=(",", ":"),
        )
    )
    return EXIT_OK


def _pooled_corpus(index) -> Corpus:
    tokens = np.concatenate([cd.corpus_tokens for cd in index.shards])
    return Corpus.from_tokens(tokens, separator=index.separator, vocab_size=index.vocab_size)


def cmd_query(args, parser) -> int:
    directory = _index_dir(args, parser)
    index = load_sharded(directory, backend=args.backend)
    with _open_in(args.docs) as fh:
        ids, docs = read_query_docs(fh, path=args.docs)
    if not args.keep_separators:
        sep = index.separator
        docs = [[t for t in doc if t != sep] for doc in docs]
    results = index.query_many(
        docs,
        doc_ids=ids,
        parallelism=args.parallelism,
        with_suffix_profiles=args.with_suffix_profiles,
        warn_on_separator=args.keep_separators,
    )
    failures = [r for r in results if isinstance(r, QueryFailure)]
    ok = [r for r in results if not isinstance(r, QueryFailure)]
    with _open_out(args.output) as out:
        write_annotations(out, ok)
    for f in failures:
        _progress(f"document {f.doc_id}: {f.error}")
    if failures:
        return EXIT_DATA

    if args.verify:
        corpus = _pooled_corpus(index)
        if corpus.n_tokens > args.verify_max_tokens:
            _progress(
                f"verify: corpus has {corpus.n_tokens} tokens, over the "
                f"--verify-max-tokens limit of {args.verify_max_tokens}"
            )
            return EXIT_DATA
        for did, doc, ann in zip(ids, docs, ok):
            want = oracle_nnsl(corpus, doc, doc_id=did)
            if not (
                np.array_equal(want.nnsl, ann.nnsl)
                and np.array_equal(want.counts, ann.counts)
            ):
                _progress(f"verify: document {did} disagrees with the oracle")
                return EXIT_VERIFY
        _progress(f"verify: {len(ok)} document(s) match the oracle")
    return EXIT_OK


def cmd_novelty(args, parser) -> int:
    with _open_in(args.annotations) as fh:
        anns = read_annotations(fh, path=args.annotations)
    if args.nnsl_stats:
        if not anns:
            raise ValueError("cannot summarize an empty annotations file")
        print(stats_to_json(nnsl_stats(anns)))
        return EXIT_OK
    curve = novelty_curve(anns, max_n=args.max_n, per_document=args.per_doc)
    if args.json:
        with _open_out(args.output) as out:
            out.write(curve_to_json(curve) + "\n")
    else:
        with _open_out(args.output) as out:
            write_curve_csv(out, curve)
    return EXIT_OK


def cmd_bound(args, parser) -> int:
    try:
        params = LowerBoundParams(
            corpus_size=args.corpus_size, p=args.p, entropy_bits=args.entropy_bits
        )
    except ValueError as exc:
        parser.error(str(exc))
    if args.threshold is not None:
        n = smallest_n_above(params, args.threshold, n_max=args.n_max)
        if n is None:
            _progress(f"no n <= {args.n_max} reaches bound {args.threshold}")
            return EXIT_DATA
        print(n)
        return EXIT_OK
    ns = range(1, args.n_max + 1)
    bounds = lower_bound_curve(params, ns)
    with _open_out(args.output) as out:
        if args.json:
            rows = [{"n": int(n), "bound": float(b)} for n, b in zip(ns, bounds)]
            out.write(json.dumps(rows, separators=(",", ":")) + "\n")
        else:
            write_bound_csv(out, ns, bounds)
    return EXIT_OK


def cmd_loss_bins(args, parser) -> int:
    with _open_in(args.annotations) as fh:
        anns = read_annotations(fh, path=args.annotations)
    with _open_in(args.losses) as fh:
        losses, metric = read_losses(fh)
    per_doc = []
    for ann in anns:
        key = str(ann.doc_id)
        if key not in losses:
            raise ValueError(f"loss file has no record for document {ann.doc_id!r}")
        per_doc.append(losses[key])
    edges = DEFAULT_BIN_EDGES if args.bin_edges is None else tuple(
        int(e) for e in args.bin_edges.split(",")
    )
    rows = completion_loss_bins(
        anns,
        per_doc,
        max_n=args.max_n,
        frequency_bin_edges=edges,
        multi_n=not args.exactly_one,
    )
    with _open_out(args.output) as out:
        if args.json:
            out.write(bins_to_json(rows, metric=metric) + "\n")
        else:
            write_bins_csv(out, rows)
    return EXIT_OK


def cmd_verify(args, parser) -> int:
    directory = _index_dir(args, parser)
    index = load_sharded(directory, backend=args.backend)
    rng = random.Random(args.seed)

    # structural pass: size bounds, count spot checks against a linear scan
    for s, cd in enumerate(index.shards):
        if cd.n_states > 2 * cd.corpus_len or cd.n_edges > 3 * cd.corpus_len:
            _progress(f"verify: shard {s} exceeds size bounds")
            return EXIT_VERIFY
        shard_corpus_obj = Corpus.from_tokens(
            cd.corpus_tokens, separator=cd.separator, vocab_size=cd.vocab_size
        )
        toks = cd.corpus_tokens
        for _ in range(args.samples):
            if cd.corpus_len == 0:
                break
            i = rng.randrange(cd.corpus_len)
            j = min(cd.corpus_len, i + rng.randint(1, 12))
            pattern = [int(t) for t in toks[i:j]]
            if occurrence_count(cd, pattern) != naive_count(shard_corpus_obj, pattern):
                _progress(f"verify: shard {s} count mismatch on span [{i}:{j})")
                return EXIT_VERIFY

    corpus = _pooled_corpus(index)
    checked_docs = 0
    if corpus.n_tokens > args.max_tokens:
        _progress(
            f"verify: skipping oracle replay, corpus has {corpus.n_tokens} tokens "
            f"(limit {args.max_tokens})"
        )
    else:
        if args.docs:
            with _open_in(args.docs) as fh:
                ids, docs = read_query_docs(fh, path=args.docs)
        else:
            ids, docs = _sample_docs(corpus, rng, args.samples)
        sep = index.separator
        docs = [[t for t in doc if t != sep] for doc in docs]
        for did, doc in zip(ids, docs):
            ann = index.query(doc, doc_id=did, warn_on_separator=False)
            want = oracle_nnsl(corpus, doc, doc_id=did)
            if not (
                np.array_equal(want.nnsl, ann.nnsl)
                and np.array_equal(want.counts, ann.counts)
            ):
                _progress(f"verify: document {did} disagrees with the oracle")
                return EXIT_VERIFY
            checked_docs += 1
    print(
        json.dumps(
            {
                "ok": True,
                "shards": index.shard_count,
                "tokens": corpus.n_tokens,
                "count_samples_per_shard": args.samples,
                "documents_checked": checked_docs,
            },
            separators=(",", ":"),
        )
    )
    return EXIT_OK


def _sample_docs(corpus: Corpus, rng: random.Random, k: int):
    """Sampled verification queries: in-document spans, mutations, random ids."""
    ids, docs = [], []
    n_docs = corpus.n_docs
    for idx in range(k):
        doc = corpus.document(rng.randrange(n_docs))
        if doc.size == 0:
            continue
        i = rng.randrange(doc.size)
        j = min(doc.size, i + rng.randint(1, 20))
        sample = [int(t) for t in doc[i:j]]
        kind = idx % 3
        if kind == 1 and sample:
            pos = rng.randrange(len(sample))
            sample[pos] = rng.randrange(corpus.vocab_size)
        elif kind == 2:
            sample = [rng.randrange(corpus.vocab_size) for _ in range(len(sample))]
        ids.append(f"sample-{idx}")
        docs.append(sample)
    return ids, docs


# -- parser wiring ------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="cdawgkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add_index(p):
        p.add_argument(
            "--index",
            help=f"index directory (default: ${INDEX_DIR_ENV})",
        )

    p = sub.add_parser("build", help="index a corpus file into shard files + manifest")
    add_index(p)
    p.add_argument("--input", required=True, help="corpus file path")
    p.add_argument(
        "--format",
        required=True,
        choices=CORPUS_FORMATS + ("jsonl",),
        help="corpus file format",
    )
    p.add_argument("--separator", type=_nonneg_int, required=True, help="separator token id")
    p.add_argument("--vocab-size", type=_positive_int, help="token id space size")
    p.add_argument("--shards", type=_positive_int, default=1, help="shard count (>= 1)")
    p.add_argument("--parallelism", type=_positive_int, default=1, help="build workers")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stats", help="print index size statistics as JSON")
    add_index(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("query", help="annotate documents with match lengths and counts")
    add_index(p)
    p.add_argument("--docs", required=True, help='JSONL {"id", "tokens"} file, or -')
    p.add_argument("--output", help="annotations JSONL path (default stdout)")
    p.add_argument("--backend", choices=("ram", "disk"), default="ram")
    p.add_argument("--parallelism", type=_positive_int, default=1, help="query threads")
    p.add_argument(
        "--with-suffix-profiles",
        action="store_true",
        help="include per-position suffix count profiles in the output",
    )
    p.add_argument(
        "--keep-separators",
        action="store_true",
        help="query raw token streams instead of stripping separator ids",
    )
    p.add_argument(
        "--verify",
        action="store_true",
        help="replay documents through the linear-scan oracle and compare",
    )
    p.add_argument(
        "--verify-max-tokens",
        type=_positive_int,
        default=1_000_000,
        help="refuse --verify above this corpus size",
    )
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("novelty", help="novelty curve (CSV/JSON) or NNSL stats from annotations")
    p.add_argument("--annotations", required=True, help="annotations JSONL file, or -")
    p.add_argument("--output", help="output path (default stdout)")
    p.add_argument("--max-n", type=_positive_int, help="largest n to report")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--per-doc", action="store_true", help="include per-document rows (JSON)")
    p.add_argument(
        "--nnsl-stats",
        action="store_true",
        help="emit match-length summary JSON instead of a curve",
    )
    p.set_defaults(func=cmd_novelty)

    p = sub.add_parser("bound", help="theoretical novelty lower-bound curve")
    p.add_argument("--corpus-size", type=float, required=True, help="|C|, tokens")
    p.add_argument("--p", type=float, required=True, help="per-token probability bound")
    p.add_argument("--entropy-bits", type=float, required=True, help="entropy per token, bits")
    p.add_argument("--n-max", type=_positive_int, default=100, help="largest n")
    p.add_argument("--threshold", type=float, help="print smallest n with bound >= this")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--output", help="output path (default stdout)")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("loss-bins", help="bin per-token losses by match length and frequency")
    p.add_argument("--annotations", required=True, help="annotations JSONL (with profiles)")
    p.add_argument("--losses", required=True, help='JSONL {"id", "losses"} file')
    p.add_argument("--max-n", type=_positive_int, required=True, help="largest n to bin")
    p.add_argument(
        "--bin-edges",
        help="comma-separated frequency bucket edges (default powers of 10)",
    )
    p.add_argument(
        "--exactly-one",
        action="store_true",
        help="assign each token to a single n instead of every qualifying n",
    )
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--output", help="output path (default stdout)")
    p.set_defaults(func=cmd_loss_bins)

    p = sub.add_parser("verify", help="check an index against the linear-scan oracle")
    add_index(p)
    p.add_argument("--docs", help="optional query JSONL to replay")
    p.add_argument("--backend", choices=("ram", "disk"), default="ram")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--samples", type=_positive_int, default=200, help="samples per check")
    p.add_argument(
        "--max-tokens",
        type=_positive_int,
        default=1_000_000,
        help="skip oracle replay above this corpus size",
    )
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, parser)
    except SystemExit as exc:  # parser.error inside a command
        return int(exc.code or 0)
    except BrokenPipeError:
        return EXIT_OK
    except (CorpusError, IndexFormatError, ValueError, OSError) as exc:
        print(f"cdawgkit: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
