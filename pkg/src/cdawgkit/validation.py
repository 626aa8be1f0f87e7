"""Input validation helpers shared by the library surface and the estimator."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def as_token_list(seq: Iterable[int], what: str = "token sequence") -> list[int]:
    """Coerce a token iterable to a plain list of non-negative ints.

    Accepts Python ints and numpy integer scalars; rejects bools, floats,
    strings, and negative values.
    """
    if isinstance(seq, np.ndarray):
        if seq.ndim != 1:
            raise ValueError(f"{what} must be one-dimensional, got shape {seq.shape}")
        if not np.issubdtype(seq.dtype, np.integer):
            raise TypeError(f"{what} must contain integers, got dtype {seq.dtype}")
        if seq.size and int(seq.min()) < 0:
            raise ValueError(f"{what} contains negative token ids")
        return seq.tolist()
    out = []
    for i, v in enumerate(seq):
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise TypeError(f"{what} position {i}: expected an integer token id, got {v!r}")
        v = int(v)
        if v < 0:
            raise ValueError(f"{what} position {i}: negative token id {v}")
        out.append(v)
    return out


def as_documents(docs: Iterable[Sequence[int]], what: str = "documents") -> list[list[int]]:
    """Coerce an iterable of token sequences, validating each one."""
    if isinstance(docs, (str, bytes)):
        raise TypeError(f"{what} must be an iterable of token sequences, not {type(docs).__name__}")
    return [as_token_list(d, what=f"{what}[{i}]") for i, d in enumerate(docs)]


def check_separator(separator: int, vocab_size: int) -> None:
    if isinstance(separator, bool) or not isinstance(separator, (int, np.integer)):
        raise TypeError(f"separator must be an integer token id, got {separator!r}")
    if not 0 <= int(separator) < vocab_size:
        raise ValueError(f"separator {separator} outside vocabulary [0, {vocab_size})")
