"""The linear-scan reference implementations must themselves be right.

They are deliberately naive (byte-encoded find loops), so they get
checked here against direct tuple scanning before anything else trusts
them as ground truth.
"""

import random

import numpy as np

from cdawgkit import Corpus, naive_contains, naive_count, oracle_nnsl, oracle_novelty

from conftest import make_corpus, random_corpus, random_query, tok


def slow_count(corpus: Corpus, pattern: list[int]) -> int:
    """Occurrence count by direct tuple comparison, O(n*m)."""
    toks = corpus.tokens.tolist()
    m = len(pattern)
    if m == 0:
        return 0
    return sum(1 for i in range(len(toks) - m + 1) if toks[i : i + m] == pattern)


def test_count_matches_tuple_scan_small():
    c = Corpus.from_documents([[1, 1, 1, 1]], separator=0, vocab_size=2)
    assert naive_count(c, [1, 1]) == 3  # overlapping occurrences count
    assert naive_count(c, [1]) == 4
    assert naive_count(c, [1, 1, 1, 1]) == 1
    assert naive_count(c, [2]) == 0
    assert naive_contains(c, [1, 1, 0])
    assert not naive_contains(c, [0, 0])


def test_count_matches_tuple_scan_random():
    rng = random.Random(31)
    for _ in range(40):
        c = random_corpus(rng, max_tokens=200)
        for _ in range(25):
            q = random_query(rng, c, rng.choice(("random", "substring", "mutated")))
            assert naive_count(c, q) == slow_count(c, q)
            assert naive_contains(c, q) == (slow_count(c, q) > 0)


def test_token_ids_above_255_are_not_confused():
    """Byte encoding must stay token-aligned for multi-byte ids."""
    c = Corpus.from_documents([[300, 1, 300, 300]], separator=0, vocab_size=301)
    assert naive_count(c, [300]) == 3
    assert naive_count(c, [300, 300]) == 1
    assert naive_count(c, [1, 300]) == 1
    # id 45 (the marker-adjacent byte values) must not match inside id 300
    assert naive_count(c, [44]) == 0
    rng = random.Random(5)
    docs = [[rng.randint(1, 999) for _ in range(80)] for _ in range(3)]
    c = Corpus.from_documents(docs, separator=0, vocab_size=1000)
    for _ in range(200):
        i = rng.randrange(c.n_tokens - 3)
        pat = [int(t) for t in c.tokens[i : i + 3]]
        assert naive_count(c, pat) == slow_count(c, pat)


def test_oracle_nnsl_worked_example():
    c = make_corpus(["hello", "world"])
    ann = oracle_nnsl(c, tok("lloyd"))
    assert ann.nnsl.tolist() == [1, 2, 3, 0, 1]
    assert ann.counts.tolist() == [3, 1, 1, 0, 1]


def test_oracle_nnsl_unknown_ids_reset():
    c = make_corpus(["hello", "world"])
    ann = oracle_nnsl(c, [ord("l"), 9999, ord("l")])
    assert ann.nnsl.tolist() == [1, 0, 1]
    assert ann.counts.tolist() == [3, 0, 3]


def test_oracle_nnsl_growth_and_zero_pairing():
    rng = random.Random(77)
    for _ in range(30):
        c = random_corpus(rng, max_tokens=300)
        q = random_query(rng, c, "mutated")
        ann = oracle_nnsl(c, q)
        prev = 0
        for l, n in zip(ann.nnsl.tolist(), ann.counts.tolist()):
            assert l <= prev + 1
            assert (l == 0) == (n == 0)
            prev = l


def test_oracle_novelty_hand_case():
    c = make_corpus(["hello", "world"])
    q = tok("lloyd")
    assert oracle_novelty(c, q, 1) == (1, 5)
    assert oracle_novelty(c, q, 2) == (2, 4)
    assert oracle_novelty(c, q, 3) == (2, 3)
    assert oracle_novelty(c, q, 4) == (2, 2)
    assert oracle_novelty(c, q, 5) == (1, 1)
    assert oracle_novelty(c, q, 6) == (0, 0)


def test_oracle_novelty_full_document_is_all_known():
    c = make_corpus(["hello", "world"])
    for n in range(1, 6):
        novel, total = oracle_novelty(c, tok("hello"), n)
        assert novel == 0
        assert total == 6 - n
