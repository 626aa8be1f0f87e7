"""Scikit-learn style wrapper: fit builds the index, transform annotates."""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .corpus import Corpus
from .shardexec import ShardedIndex, build_sharded
from .validation import as_documents, check_separator


class CdawgIndex(TransformerMixin, BaseEstimator):
    """Suffix-automaton n-gram index with a fit/transform interface.

    fit(X) treats X as an iterable of token-id documents and builds a
    (possibly sharded) index over them.  transform(X) annotates each
    document with per-position longest-match lengths and occurrence
    counts against the fitted corpus.

    Parameters
    ----------
    separator : token id appended after every document; must not occur
        inside any document.
    vocab_size : id space size, or None to infer max(id)+1 from the
        fitted documents (and the separator).
    n_shards : number of document-boundary shards to build.
    parallelism : worker processes for building / threads for querying.
    strip_separators : drop separator ids from queries before matching,
        which keeps sharded results exact.
    with_suffix_profiles : also compute occurrence counts for every
        shorter suffix of each match (needed for frequency-bucketed
        loss analyses).
    """

    def __init__(
        self,
        separator: int = 0,
        vocab_size: int | None = None,
        n_shards: int = 1,
        parallelism: int = 1,
        strip_separators: bool = False,
        with_suffix_profiles: bool = False,
    ):
        self.separator = separator
        self.vocab_size = vocab_size
        self.n_shards = n_shards
        self.parallelism = parallelism
        self.strip_separators = strip_separators
        self.with_suffix_profiles = with_suffix_profiles

    def fit(self, X, y=None):
        docs = as_documents(X, "X")
        vocab = self.vocab_size
        if vocab is None:
            top = max((max(d) for d in docs if d), default=0)
            vocab = max(top, self.separator) + 1
        check_separator(self.separator, vocab)
        corpus = Corpus.from_documents(docs, separator=self.separator, vocab_size=vocab)
        self.vocab_size_ = vocab
        self.n_docs_ = corpus.n_docs
        self.n_tokens_ = corpus.n_tokens
        self.index_: ShardedIndex = build_sharded(
            corpus, shard_count=self.n_shards, parallelism=self.parallelism
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "index_"):
            raise NotFittedError(
                "This CdawgIndex instance is not fitted yet; call fit first."
            )

    def transform(self, X):
        self._check_fitted()
        docs = as_documents(X, "X")
        if self.strip_separators:
            docs = [[t for t in d if t != self.separator] for d in docs]
        return self.index_.query_many(
            docs,
            parallelism=self.parallelism,
            with_suffix_profiles=self.with_suffix_profiles,
            warn_on_separator=not self.strip_separators,
        )
