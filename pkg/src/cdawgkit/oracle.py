"""Brute-force reference implementations used to cross-check the index.

Everything here answers questions by direct scanning of the corpus token
sequence, never by consulting the automaton, so agreement between the two
paths is meaningful evidence of correctness.  Token sequences are encoded
into marker-aligned byte strings so the scanning itself can ride on
bytes.find, which keeps exhaustive randomized comparisons affordable; the
semantics remain plain naive substring search.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import Corpus
from .query import MatchAnnotations
from .validation import as_token_list

_MARK = 0xFF  # token-start marker; digit bytes stay below it


def _digits_for(max_id: int) -> int:
    d = 1
    cap = 255
    while cap <= max_id:
        d += 1
        cap *= 255
    return d


def _encode(tokens: Sequence[int], digits: int) -> bytes:
    out = bytearray()
    for t in tokens:
        out.append(_MARK)
        rest = t
        for k in range(digits - 1, -1, -1):
            out.append((rest // (255**k)) % 255)
    return bytes(out)


class _Scanner:
    """Byte-encoded corpus supporting aligned find/count of token patterns."""

    def __init__(self, corpus_tokens: Sequence[int], max_query_id: int = 0):
        toks = list(corpus_tokens)
        hi = max(toks) if toks else 0
        self.digits = _digits_for(max(hi, max_query_id))
        self.step = self.digits + 1
        self.blob = _encode(toks, self.digits)

    def pat(self, tokens: Sequence[int]) -> bytes:
        return _encode(tokens, self.digits)

    def contains(self, tokens: Sequence[int]) -> bool:
        return self.blob.find(self.pat(tokens)) >= 0

    def count(self, tokens: Sequence[int]) -> int:
        # overlapping occurrences: advance one token per hit
        pat = self.pat(tokens)
        n = 0
        at = self.blob.find(pat)
        while at >= 0:
            n += 1
            at = self.blob.find(pat, at + self.step)
        return n


def naive_contains(corpus: Corpus, pattern: Sequence[int]) -> bool:
    """True iff pattern occurs in the corpus tokens (empty pattern: True)."""
    pattern = as_token_list(pattern, what="pattern")
    if not pattern:
        return True
    return _Scanner(corpus.tokens.tolist(), max(pattern)).contains(pattern)


def naive_count(corpus: Corpus, pattern: Sequence[int]) -> int:
    """Number of (possibly overlapping) occurrences of pattern."""
    pattern = as_token_list(pattern, what="pattern")
    if not pattern:
        raise ValueError("occurrence count of the empty pattern is undefined")
    return _Scanner(corpus.tokens.tolist(), max(pattern)).count(pattern)


def oracle_nnsl(corpus: Corpus, query: Sequence[int], doc_id: str | None = None) -> MatchAnnotations:
    """Reference per-position match lengths and counts by direct scanning.

    At each position i the suffix length is scanned downward from the
    longest possible value; it can exceed the previous position's length by
    at most one, which bounds the scan without consulting the index.
    """
    tokens = as_token_list(query, what="query")
    n = len(tokens)
    scan = _Scanner(corpus.tokens.tolist(), max(tokens) if tokens else 0)
    lengths = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    prev = 0
    for i in range(n):
        m = min(i + 1, prev + 1)
        while m > 0 and not scan.contains(tokens[i + 1 - m : i + 1]):
            m -= 1
        lengths[i] = m
        counts[i] = scan.count(tokens[i + 1 - m : i + 1]) if m else 0
        prev = m
    return MatchAnnotations(doc_id=doc_id, nnsl=lengths, counts=counts)


def oracle_novelty(corpus: Corpus, query: Sequence[int], n: int) -> tuple[int, int]:
    """(novel, total) n-gram tally for one document by direct n-gram search.

    Counts every n-gram position in the query; an n-gram is novel iff it
    does not occur in the corpus.  Computed independently of the
    length-histogram route.
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    tokens = as_token_list(query, what="query")
    total = max(0, len(tokens) - (n - 1))
    if total == 0:
        return 0, 0
    scan = _Scanner(corpus.tokens.tolist(), max(tokens))
    novel = 0
    for i in range(total):
        if not scan.contains(tokens[i : i + n]):
            novel += 1
    return novel, total
