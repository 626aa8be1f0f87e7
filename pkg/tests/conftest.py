"""Shared fixtures and seeded data generators.

Randomized tests draw corpora and queries from the helpers here with
explicit seeds so failures replay exactly.  Separator is always token 0
and real tokens are 1..vocab-1, which keeps generated documents
separator-free by construction.
"""

from __future__ import annotations

import random

import pytest

from cdawgkit import Corpus, build_cdawg, populate_counts


def tok(text: str) -> list[int]:
    return [ord(ch) for ch in text]


def make_corpus(docs: list[str], separator: str = "$") -> Corpus:
    return Corpus.from_documents(
        [tok(d) for d in docs], separator=ord(separator), vocab_size=256
    )


def random_corpus(rng: random.Random, max_tokens: int = 5000) -> Corpus:
    """One random corpus: vocab 2..16, 10..max_tokens tokens, 1..20 docs."""
    vocab = rng.randint(2, 16)
    n_docs = rng.randint(1, 20)
    target = rng.randint(10, max_tokens)
    # spread the token budget over documents, minus one separator each
    budget = max(n_docs, target - n_docs)
    docs = []
    remaining = budget
    for d in range(n_docs):
        left = n_docs - d - 1
        hi = max(0, remaining - left)
        size = hi if left == 0 else rng.randint(0, hi)
        docs.append([rng.randint(1, vocab - 1) for _ in range(size)])
        remaining -= size
    return Corpus.from_documents(docs, separator=0, vocab_size=vocab)


def random_query(rng: random.Random, corpus: Corpus, kind: str) -> list[int]:
    """A query document: random ids, an in-document span, or a mutated span."""
    vocab = corpus.vocab_size
    if kind == "random":
        m = rng.randint(1, 30)
        return [rng.randint(1, vocab - 1) for _ in range(m)]
    for _ in range(20):
        doc = corpus.document(rng.randrange(corpus.n_docs))
        if doc.size:
            break
    else:
        return [rng.randint(1, vocab - 1)]
    i = rng.randrange(doc.size)
    j = min(doc.size, i + rng.randint(1, 30))
    span = [int(t) for t in doc[i:j]]
    if kind == "mutated" and span:
        pos = rng.randrange(len(span))
        span[pos] = rng.randint(1, vocab - 1)
    return span


QUERY_KINDS = ("random", "substring", "mutated")


@pytest.fixture(scope="session")
def worked_corpus() -> Corpus:
    return make_corpus(["hello", "world"])


@pytest.fixture(scope="session")
def worked_cdawg(worked_corpus):
    return populate_counts(build_cdawg(worked_corpus))
