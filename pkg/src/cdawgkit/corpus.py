"""Tokenized corpus loading, validation, and document-boundary sharding.

A corpus is one flat token-id sequence in which every document ends with a
single shared separator token; the final token of the sequence is always the
separator, and the separator never appears inside a document.  Splitting for
parallel builds happens only at document boundaries, which is what makes the
per-shard query results recombinable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .validation import as_documents, check_separator

CORPUS_FORMATS = ("binary-u16", "binary-u32", "jsonl-token-arrays", "char-text")

_BINARY_DTYPES = {"binary-u16": np.uint16, "binary-u32": np.uint32}


class CorpusError(ValueError):
    """Raised when corpus input violates the format contract."""


def token_dtype(vocab_size: int) -> np.dtype:
    # The builder appends one sentinel with id == vocab_size, so the dtype
    # must hold vocab_size itself, not just vocab_size - 1.
    return np.dtype(np.uint16) if vocab_size <= 0xFFFF else np.dtype(np.uint32)


@dataclass(frozen=True)
class Corpus:
    """Validated flat token sequence plus its document structure.

    Attributes:
        tokens: 1-D array of token ids (uint16 or uint32), read-only.
        separator: document separator token id.
        vocab_size: number of valid token ids; all tokens are < vocab_size.
        doc_ends: sorted positions of the separator occurrences, one per
            document (the last one is always len(tokens) - 1).
    """

    tokens: np.ndarray
    separator: int
    vocab_size: int
    doc_ends: np.ndarray

    @classmethod
    def from_tokens(
        cls,
        tokens: Sequence[int] | np.ndarray,
        separator: int,
        vocab_size: int | None = None,
    ) -> "Corpus":
        arr = np.asarray(tokens)
        if arr.ndim != 1:
            raise CorpusError(f"token sequence must be one-dimensional, got shape {arr.shape}")
        if arr.size == 0:
            raise CorpusError("empty input: corpus must contain at least one document")
        if not np.issubdtype(arr.dtype, np.integer):
            raise CorpusError(f"token sequence must be integral, got dtype {arr.dtype}")
        lo, hi = int(arr.min()), int(arr.max())
        if lo < 0:
            raise CorpusError(f"negative token id {lo} in corpus")
        if vocab_size is None:
            vocab_size = max(hi, int(separator)) + 1
        check_separator(separator, vocab_size)
        separator = int(separator)
        if hi >= vocab_size:
            raise CorpusError(f"token id {hi} outside vocabulary [0, {vocab_size})")
        if int(arr[-1]) != separator:
            raise CorpusError("corpus must end with the separator token")
        arr = arr.astype(token_dtype(vocab_size), copy=True)
        arr.flags.writeable = False
        doc_ends = np.flatnonzero(arr == separator).astype(np.int64)
        doc_ends.flags.writeable = False
        return cls(tokens=arr, separator=separator, vocab_size=vocab_size, doc_ends=doc_ends)

    @classmethod
    def from_documents(
        cls,
        docs: Iterable[Sequence[int]],
        separator: int,
        vocab_size: int | None = None,
    ) -> "Corpus":
        """Join documents into one sequence, appending the separator to each."""
        doc_lists = as_documents(docs)
        if not doc_lists:
            raise CorpusError("empty input: no documents")
        flat: list[int] = []
        for i, doc in enumerate(doc_lists):
            if separator in doc:
                raise CorpusError(f"document {i} contains the separator token {separator}")
            flat.extend(doc)
            flat.append(int(separator))
        return cls.from_tokens(flat, separator=separator, vocab_size=vocab_size)

    @property
    def n_tokens(self) -> int:
        return int(self.tokens.size)

    @property
    def n_docs(self) -> int:
        return int(self.doc_ends.size)

    def document(self, i: int) -> np.ndarray:
        """Tokens of document i, without its trailing separator."""
        start = 0 if i == 0 else int(self.doc_ends[i - 1]) + 1
        return self.tokens[start : int(self.doc_ends[i])]

    def documents(self) -> Iterable[np.ndarray]:
        for i in range(self.n_docs):
            yield self.document(i)


@dataclass(frozen=True)
class ShardSpec:
    """Document ranges assigned to each shard of a corpus."""

    shard_count: int
    doc_ranges: tuple[tuple[int, int], ...]  # half-open [start_doc, end_doc)


def load_corpus(
    path: str | Path,
    fmt: str,
    separator: int,
    vocab_size: int | None = None,
) -> Corpus:
    """Load a corpus file in one of CORPUS_FORMATS.

    binary-u16 / binary-u32: headerless little-endian fixed-width token
    stream; the last token must be the separator.  jsonl-token-arrays: one
    JSON array of non-negative ints per line, one document per line, joined
    with the separator appended after every document.  char-text:
    newline-delimited documents with raw bytes as token ids (vocab 256).
    """
    path = Path(path)
    if fmt == "jsonl":  # accepted alias
        fmt = "jsonl-token-arrays"
    if fmt not in CORPUS_FORMATS:
        raise CorpusError(f"unknown corpus format {fmt!r}; expected one of {CORPUS_FORMATS}")

    if fmt in _BINARY_DTYPES:
        dtype = np.dtype(_BINARY_DTYPES[fmt]).newbyteorder("<")
        raw = path.read_bytes()
        if not raw:
            raise CorpusError(f"empty input: {path}")
        if len(raw) % dtype.itemsize:
            raise CorpusError(f"{path}: size {len(raw)} is not a multiple of {dtype.itemsize}")
        tokens = np.frombuffer(raw, dtype=dtype)
        return Corpus.from_tokens(tokens, separator=separator, vocab_size=vocab_size)

    if fmt == "jsonl-token-arrays":
        docs = []
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
                if not isinstance(doc, list):
                    raise CorpusError(f"{path}:{lineno}: expected a JSON array of token ids")
                docs.append(doc)
        if not docs:
            raise CorpusError(f"empty input: {path}")
        try:
            return Corpus.from_documents(docs, separator=separator, vocab_size=vocab_size)
        except (TypeError, ValueError) as exc:
            raise CorpusError(f"{path}: {exc}") from exc

    # char-text
    raw = path.read_bytes()
    if not raw:
        raise CorpusError(f"empty input: {path}")
    docs = [np.frombuffer(line, dtype=np.uint8) for line in raw.splitlines()]
    if vocab_size is None:
        vocab_size = 256
    try:
        return Corpus.from_documents(docs, separator=separator, vocab_size=vocab_size)
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def save_corpus(corpus: Corpus, path: str | Path, fmt: str = "binary-u32") -> None:
    """Write the flat token sequence as a headerless binary stream."""
    if fmt not in _BINARY_DTYPES:
        raise CorpusError(f"save_corpus supports binary formats only, got {fmt!r}")
    dtype = np.dtype(_BINARY_DTYPES[fmt]).newbyteorder("<")
    hi = int(corpus.tokens.max())
    if hi > np.iinfo(dtype).max:
        raise CorpusError(f"token id {hi} does not fit {fmt}")
    corpus.tokens.astype(dtype).tofile(Path(path))


def shard_corpus(corpus: Corpus, shard_count: int) -> list[tuple[Corpus, tuple[int, int]]]:
    """Split a corpus into shard_count contiguous document ranges.

    Token counts are balanced greedily: shard j takes whole documents until
    its cumulative token total reaches j/shard_count of the corpus, while
    always leaving at least one document per remaining shard.  Concatenating
    the shards in order reproduces the original token sequence.

    Returns a list of (shard corpus, (start_doc, end_doc)) pairs.
    """
    if shard_count <= 0:
        raise CorpusError(f"shard_count must be positive, got {shard_count}")
    n_docs = corpus.n_docs
    if shard_count > n_docs:
        raise CorpusError(f"cannot split {n_docs} documents into {shard_count} shards")
    total = corpus.n_tokens
    doc_ends = corpus.doc_ends
    out: list[tuple[Corpus, tuple[int, int]]] = []
    doc = 0
    for j in range(1, shard_count + 1):
        start_doc = doc
        target = total * j / shard_count
        while True:
            doc += 1
            if doc >= n_docs - (shard_count - j):  # leave one doc per remaining shard
                break
            if int(doc_ends[doc - 1]) + 1 >= target:
                break
        tok_start = 0 if start_doc == 0 else int(doc_ends[start_doc - 1]) + 1
        tok_end = int(doc_ends[doc - 1]) + 1
        shard = Corpus.from_tokens(
            corpus.tokens[tok_start:tok_end],
            separator=corpus.separator,
            vocab_size=corpus.vocab_size,
        )
        out.append((shard, (start_doc, doc)))
    return out
