"""Per-document match annotation: longest-matched-suffix lengths and their
occurrence counts, streamed token by token through the index.

For a query Q, position i's annotation is the length of the longest suffix
of Q[..i] that occurs in the corpus (its "non-novel suffix length", nnsl)
together with the occurrence count of exactly that suffix.  A zero length
always pairs with a zero count.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .cdawg import SOURCE, Cdawg, QueryCursor, cursor_count, suffix_count_profile
from .validation import as_token_list


@dataclass
class MatchAnnotations:
    """Parallel per-position arrays for one query document.

    suffix_profiles is optional: per position, the (lo, hi, count) step
    intervals of suffix_count_profile (empty list where nnsl == 0).
    """

    doc_id: str | None
    nnsl: np.ndarray
    counts: np.ndarray
    suffix_profiles: list[list[tuple[int, int, int]]] | None = None

    def __len__(self) -> int:
        return int(self.nnsl.size)


@dataclass(frozen=True)
class QueryFailure:
    """A document that could not be annotated; batch queries carry these
    through instead of aborting the whole batch."""

    doc_id: str | None
    error: str


def nnsl_query(
    cdawg: Cdawg,
    query: Sequence[int],
    doc_id: str | None = None,
    with_suffix_profiles: bool = False,
    warn_on_separator: bool = True,
) -> MatchAnnotations:
    """Annotate one document with per-position match lengths and counts.

    Unknown token ids (>= vocab_size) are permitted and reset the match
    length to 0; they are not errors.  Queries containing the separator are
    permitted but can match across document boundaries, so a warning is
    emitted unless suppressed.
    """
    if not cdawg.counts_populated:
        raise ValueError("counts not populated; call populate_counts first")
    tokens = as_token_list(query, what="query")
    if warn_on_separator and cdawg.separator in tokens:
        warnings.warn(
            "query contains the document separator; matches may span document boundaries",
            stacklevel=2,
        )
    n = len(tokens)
    lengths = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    profiles: list[list[tuple[int, int, int]]] | None = [] if with_suffix_profiles else None
    node, edge, consumed, ell = SOURCE, -1, 0, 0
    node_count = cdawg.node_count
    edge_target = cdawg.edge_target
    step = cdawg._step
    for i, tok in enumerate(tokens):
        node, edge, consumed, ell, _ = step(node, edge, consumed, ell, tok)
        lengths[i] = ell
        if ell:
            t = int(edge_target[edge]) if edge >= 0 else node
            counts[i] = int(node_count[t])
            if profiles is not None:
                profiles.append(
                    suffix_count_profile(cdawg, QueryCursor(node, edge, consumed, ell))
                )
        elif profiles is not None:
            profiles.append([])
    # match length can grow by at most one per token, and only matched
    # positions carry counts
    if n:
        assert int(np.max(lengths[1:] - lengths[:-1], initial=0)) <= 1
        assert bool(np.all((lengths == 0) == (counts == 0)))
    return MatchAnnotations(doc_id=doc_id, nnsl=lengths, counts=counts, suffix_profiles=profiles)


def batch_query(
    cdawg: Cdawg,
    docs: Iterable[Sequence[int]],
    doc_ids: Sequence[str] | None = None,
    parallelism: int = 1,
    with_suffix_profiles: bool = False,
    warn_on_separator: bool = True,
) -> list[MatchAnnotations | QueryFailure]:
    """Annotate many documents; output order matches input order.

    Per-document errors become QueryFailure entries instead of aborting the
    batch.  Any parallelism degree returns results identical to serial
    execution; the index is read-only and shared.
    """
    docs = list(docs)
    if doc_ids is not None and len(doc_ids) != len(docs):
        raise ValueError(f"{len(doc_ids)} ids for {len(docs)} documents")

    def one(i: int) -> MatchAnnotations | QueryFailure:
        did = doc_ids[i] if doc_ids is not None else None
        try:
            return nnsl_query(
                cdawg,
                docs[i],
                doc_id=did,
                with_suffix_profiles=with_suffix_profiles,
                warn_on_separator=warn_on_separator,
            )
        except (TypeError, ValueError) as exc:
            return QueryFailure(doc_id=did, error=str(exc))

    if parallelism <= 1 or len(docs) <= 1:
        return [one(i) for i in range(len(docs))]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, range(len(docs))))


def read_query_docs(fh: IO[str], path: str = "<stream>") -> tuple[list[str], list[list[int]]]:
    """Read the query JSONL wire format: {"id": str, "tokens": [ints]}."""
    ids: list[str] = []
    docs: list[list[int]] = []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict) or "id" not in rec or "tokens" not in rec:
            raise ValueError(f'{path}:{lineno}: expected {{"id": ..., "tokens": [...]}}')
        ids.append(str(rec["id"]))
        docs.append(as_token_list(rec["tokens"], what=f"{path}:{lineno} tokens"))
    return ids, docs


def write_annotations(fh: IO[str], annotations: Iterable[MatchAnnotations]) -> None:
    """Write the annotation JSONL wire format: {"id", "nnsl", "counts"}.

    Annotations computed with suffix profiles also get a "profiles" key,
    one [lo, hi, count] interval list per position.
    """
    for ann in annotations:
        rec = {
            "id": ann.doc_id,
            "nnsl": ann.nnsl.tolist(),
            "counts": ann.counts.tolist(),
        }
        if ann.suffix_profiles is not None:
            rec["profiles"] = [
                [list(step) for step in intervals] for intervals in ann.suffix_profiles
            ]
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_annotations(fh: IO[str], path: str = "<stream>") -> list[MatchAnnotations]:
    """Read the annotation JSONL wire format back into MatchAnnotations."""
    out: list[MatchAnnotations] = []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict) or "nnsl" not in rec or "counts" not in rec:
            raise ValueError(f'{path}:{lineno}: expected {{"id", "nnsl", "counts"}}')
        nnsl = np.asarray(rec["nnsl"], dtype=np.int64)
        counts = np.asarray(rec["counts"], dtype=np.int64)
        if nnsl.shape != counts.shape:
            raise ValueError(f"{path}:{lineno}: nnsl and counts lengths differ")
        profiles = None
        if "profiles" in rec:
            profiles = [
                [tuple(int(v) for v in step) for step in intervals]
                for intervals in rec["profiles"]
            ]
            if len(profiles) != nnsl.size:
                raise ValueError(f"{path}:{lineno}: profiles length mismatch")
        out.append(
            MatchAnnotations(
                doc_id=rec.get("id"),
                nnsl=nnsl,
                counts=counts,
                suffix_profiles=profiles,
            )
        )
    return out
