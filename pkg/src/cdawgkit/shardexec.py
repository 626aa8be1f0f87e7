"""Sharded index construction and cross-shard query aggregation.

A corpus too large for one automaton is split at document boundaries
into k sub-corpora, each indexed independently.  Because no n-gram
spans a document boundary, every corpus occurrence of a separator-free
query lives entirely inside one shard.  Pooled statistics then follow
from per-shard answers:

    L(i) = max over shards of L_s(i)
    N(i) = sum of N_s(i) over the shards where L_s(i) == L(i)

(a shard with a shorter match at i contains zero occurrences of the
longer suffix, so it contributes nothing).  Suffix count profiles
merge the same way: the pooled count of the length-n suffix is the sum
of per-shard counts, where a shard contributes zero for n > L_s(i).

Queries containing the separator break the no-spanning argument and
get a warning from the per-shard layer; aggregation is still performed
but is only exact for separator-free queries.
"""

from __future__ import annotations

import io
import json
import os
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor

import numpy as np

from .cdawg import Cdawg, build_cdawg, populate_counts
from .corpus import Corpus, shard_corpus
from .query import MatchAnnotations, QueryFailure, nnsl_query
from .storage import (
    IndexFormatError,
    load_index,
    load_index_bytes,
    read_header,
    save_index,
)
from .validation import as_token_list

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "cdawgkit-sharded"
MANIFEST_VERSION = 1


def _merge_profiles(per_shard: list[list[tuple[int, int, int]]]) -> list[tuple[int, int, int]]:
    """Sum piecewise-constant per-shard profiles into one interval list.

    Interval boundaries are the union of the inputs' boundaries, never
    coalesced, so merging a single shard reproduces its profile verbatim.
    """
    bounds = set()
    for intervals in per_shard:
        for lo, hi, _ in intervals:
            bounds.add(lo)
            bounds.add(hi + 1)
    if not bounds:
        return []
    points = sorted(bounds)
    merged: list[tuple[int, int, int]] = []
    for a, b in zip(points, points[1:]):
        total = 0
        for intervals in per_shard:
            for lo, hi, count in intervals:
                if lo <= a <= hi:
                    total += count
                    break
        if total > 0:
            merged.append((a, b - 1, total))
    merged.reverse()  # deepest suffix first, matching the single-shard order
    return merged


class ShardedIndex:
    """k independent automata over a document-boundary partition of one corpus."""

    def __init__(self, shards: list[Cdawg], doc_ranges: list[tuple[int, int]]):
        if not shards:
            raise ValueError("ShardedIndex needs at least one shard")
        if len(shards) != len(doc_ranges):
            raise ValueError("one doc range per shard required")
        sep = shards[0].separator
        vocab = shards[0].vocab_size
        for cd in shards[1:]:
            if cd.separator != sep or cd.vocab_size != vocab:
                raise ValueError("shards disagree on separator or vocab_size")
        self.shards = shards
        self.doc_ranges = doc_ranges

    @property
    def shard_count(self) -> int:
        return len(self.shards)

    @property
    def separator(self) -> int:
        return self.shards[0].separator

    @property
    def vocab_size(self) -> int:
        return self.shards[0].vocab_size

    @property
    def corpus_len(self) -> int:
        return sum(cd.corpus_len for cd in self.shards)

    @property
    def n_docs(self) -> int:
        return self.doc_ranges[-1][1]

    def query(
        self,
        query,
        doc_id: int | None = None,
        with_suffix_profiles: bool = False,
        warn_on_separator: bool = True,
    ) -> MatchAnnotations:
        toks = as_token_list(query, "query")
        per_shard = [
            nnsl_query(
                cd,
                toks,
                doc_id=doc_id,
                with_suffix_profiles=with_suffix_profiles,
                warn_on_separator=warn_on_separator and s == 0,
            )
            for s, cd in enumerate(self.shards)
        ]
        m = len(toks)
        nnsl = np.zeros(m, dtype=np.int64)
        counts = np.zeros(m, dtype=np.int64)
        for i in range(m):
            best = max(int(ann.nnsl[i]) for ann in per_shard)
            nnsl[i] = best
            counts[i] = sum(
                int(ann.counts[i]) for ann in per_shard if int(ann.nnsl[i]) == best
            )
        profiles = None
        if with_suffix_profiles:
            profiles = [
                _merge_profiles([ann.suffix_profiles[i] for ann in per_shard])
                for i in range(m)
            ]
        return MatchAnnotations(
            doc_id=doc_id, nnsl=nnsl, counts=counts, suffix_profiles=profiles
        )

    def query_many(
        self,
        docs,
        doc_ids=None,
        parallelism: int = 1,
        with_suffix_profiles: bool = False,
        warn_on_separator: bool = True,
    ) -> list[MatchAnnotations | QueryFailure]:
        docs = list(docs)
        if doc_ids is None:
            doc_ids = list(range(len(docs)))
        else:
            doc_ids = list(doc_ids)
            if len(doc_ids) != len(docs):
                raise ValueError("doc_ids length must match docs")

        def one(pair):
            did, doc = pair
            try:
                return self.query(
                    doc,
                    doc_id=did,
                    with_suffix_profiles=with_suffix_profiles,
                    warn_on_separator=warn_on_separator,
                )
            except (TypeError, ValueError) as exc:
                return QueryFailure(doc_id=did, error=str(exc))

        pairs = list(zip(doc_ids, docs))
        if parallelism <= 1 or len(pairs) <= 1:
            return [one(p) for p in pairs]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(one, pairs))


def _build_shard_bytes(args) -> bytes:
    tokens_bytes, dtype_str, separator, vocab_size = args
    toks = np.frombuffer(tokens_bytes, dtype=dtype_str)
    corpus = Corpus.from_tokens(toks, separator=separator, vocab_size=vocab_size)
    cd = build_cdawg(corpus)
    populate_counts(cd)
    buf = io.BytesIO()
    save_index(cd, buf)
    return buf.getvalue()


def build_sharded(
    corpus: Corpus, shard_count: int = 1, parallelism: int = 1
) -> ShardedIndex:
    """Split `corpus` into `shard_count` pieces and index each one.

    With parallelism > 1 shards are built in worker processes and
    shipped back serialized; the parent rehydrates them, so peak parent
    memory stays proportional to the finished indexes, not the builds.
    """
    pieces = shard_corpus(corpus, shard_count)
    doc_ranges = [rng for _, rng in pieces]
    if parallelism <= 1 or len(pieces) <= 1:
        shards = []
        for piece, _ in pieces:
            cd = build_cdawg(piece)
            populate_counts(cd)
            shards.append(cd)
        return ShardedIndex(shards, doc_ranges)

    jobs = [
        (
            piece.tokens.tobytes(),
            str(piece.tokens.dtype),
            piece.separator,
            piece.vocab_size,
        )
        for piece, _ in pieces
    ]
    with ProcessPoolExecutor(max_workers=min(parallelism, len(jobs))) as pool:
        blobs = list(pool.map(_build_shard_bytes, jobs))
    shards = [load_index_bytes(blob, origin=f"shard {i}") for i, blob in enumerate(blobs)]
    return ShardedIndex(shards, doc_ranges)


def shard_file_name(shard: int) -> str:
    return f"shard-{shard:04d}.cdawg"


def save_sharded(index: ShardedIndex, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    entries = []
    for i, (cd, (d0, d1)) in enumerate(zip(index.shards, index.doc_ranges)):
        name = shard_file_name(i)
        full = os.path.join(directory, name)
        save_index(cd, full)
        entries.append(
            {
                "file": name,
                "doc_start": d0,
                "doc_end": d1,
                "n_tokens": cd.corpus_len,
                "n_states": cd.n_states,
                "n_edges": cd.n_edges,
                "checksum": read_header(full)["checksum"],
            }
        )
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "separator": index.separator,
        "vocab_size": index.vocab_size,
        "shard_count": index.shard_count,
        "total_tokens": index.corpus_len,
        "shards": entries,
    }
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_sharded(
    directory: str, backend: str = "ram", verify_checksum: bool = True
) -> ShardedIndex:
    """Load a sharded index directory, failing closed on anything missing."""
    path = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise IndexFormatError(f"no {MANIFEST_NAME} in {directory}") from None
    except json.JSONDecodeError as exc:
        raise IndexFormatError(f"unreadable manifest {path}: {exc}") from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise IndexFormatError(f"{path}: not a sharded index manifest")
    if manifest.get("version") != MANIFEST_VERSION:
        raise IndexFormatError(
            f"{path}: unsupported manifest version {manifest.get('version')!r}"
        )
    entries = manifest.get("shards")
    if not entries:
        raise IndexFormatError(f"{path}: manifest lists no shards")
    shards = []
    doc_ranges = []
    for entry in entries:
        shard_path = os.path.join(directory, entry["file"])
        if not os.path.exists(shard_path):
            raise IndexFormatError(f"missing shard file {shard_path}")
        want = entry.get("checksum")
        if want is not None and read_header(shard_path)["checksum"] != want:
            raise IndexFormatError(f"{shard_path}: checksum differs from manifest")
        cd = load_index(shard_path, backend=backend, verify_checksum=verify_checksum)
        if cd.separator != manifest["separator"] or cd.vocab_size != manifest["vocab_size"]:
            raise IndexFormatError(
                f"{shard_path}: header disagrees with manifest"
            )
        shards.append(cd)
        doc_ranges.append((entry["doc_start"], entry["doc_end"]))
    return ShardedIndex(shards, doc_ranges)
