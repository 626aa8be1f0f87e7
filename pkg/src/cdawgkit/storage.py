"""Binary index files: one self-contained file per built automaton.

Layout (all little-endian):

    0   magic            4 bytes  b"CDWG"
    4   version          u32     (currently 1)
    8   token_width      u8      2 or 4
    9   handle_width     u8      4 or 8
    10  padding          6 bytes zeros
    16  corpus_len       u64     indexed tokens, excluding the sentinel
    24  n_states         u64
    32  n_edges          u64
    40  separator        u64
    48  vocab_size       u64
    56  checksum         u64     crc32 of everything after the header
    64  node table       n_states x (max_length H, failure H, count u64,
                                     edge_start H, edge_count H)
    ..  edge table       n_edges x (token T, alpha H, omega H, target H)
    ..  token array      (corpus_len + 1) x T   (sentinel included)

H is the handle width (u32 or u64, chosen so every index fits; the all-ones
value encodes "no failure link", which only the source carries), T the token
width (u16 while the sentinel id fits, else u32).  Counts are always u64.
The RAM backend materializes the tables; the disk backend memory-maps them
and answers queries without loading the file.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import IO, Literal

import numpy as np

from .cdawg import Cdawg, serialized_layout

MAGIC = b"CDWG"
VERSION = 1
_HEADER = struct.Struct("<4sIBB6xQQQQQQ")
assert _HEADER.size == 64


class IndexFormatError(ValueError):
    """Raised for malformed, truncated, or mismatched index files."""


def _node_dtype(hw: int) -> np.dtype:
    h = f"<u{hw}"
    return np.dtype(
        [("max_length", h), ("failure", h), ("count", "<u8"), ("edge_start", h), ("edge_count", h)]
    )


def _edge_dtype(hw: int, tw: int) -> np.dtype:
    h = f"<u{hw}"
    return np.dtype([("token", f"<u{tw}"), ("alpha", h), ("omega", h), ("target", h)])


def save_index(cdawg: Cdawg, path: str | Path | IO[bytes]) -> None:
    """Serialize a counts-populated index to `path` (or a binary stream)."""
    if not cdawg.counts_populated:
        raise ValueError("counts not populated; populate_counts before saving")
    tw, hw, _ = serialized_layout(
        cdawg.n_states, cdawg.n_edges, int(cdawg.tokens.size), cdawg.vocab_size
    )

    nodes = np.empty(cdawg.n_states, dtype=_node_dtype(hw))
    nodes["max_length"] = cdawg.node_maxlen
    # normalize "no failure link" to -1, then let the unsigned cast wrap it
    # to the all-ones sentinel of the chosen handle width
    fail = cdawg.node_fail.astype(np.int64)
    none_as_i64 = int(np.uint64(cdawg._fail_none).astype(np.int64)) if cdawg._fail_none >= 0 else -1
    fail = np.where(fail == none_as_i64, np.int64(-1), fail)
    nodes["failure"] = fail.astype(f"<u{hw}")
    nodes["count"] = cdawg.node_count
    nodes["edge_start"] = cdawg.node_edge_start
    nodes["edge_count"] = cdawg.node_edge_count

    edges = np.empty(cdawg.n_edges, dtype=_edge_dtype(hw, tw))
    edges["token"] = cdawg.edge_token
    edges["alpha"] = cdawg.edge_alpha
    edges["omega"] = cdawg.edge_omega
    edges["target"] = cdawg.edge_target

    tokens = np.ascontiguousarray(cdawg.tokens, dtype=f"<u{tw}")

    crc = 0
    for part in (nodes, edges, tokens):
        crc = zlib.crc32(part.tobytes(), crc)
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        tw,
        hw,
        cdawg.corpus_len,
        cdawg.n_states,
        cdawg.n_edges,
        cdawg.separator,
        cdawg.vocab_size,
        crc,
    )
    if hasattr(path, "write"):
        fh = path
        fh.write(header)
        for part in (nodes, edges, tokens):
            fh.write(part.tobytes())
    else:
        with open(path, "wb") as fh:
            fh.write(header)
            for part in (nodes, edges, tokens):
                fh.write(part.tobytes())


def _parse_header(raw: bytes, origin: str) -> tuple:
    if len(raw) < _HEADER.size:
        raise IndexFormatError(f"{origin}: truncated header ({len(raw)} bytes)")
    magic, version, tw, hw, corpus_len, n_states, n_edges, separator, vocab_size, crc = (
        _HEADER.unpack(raw[: _HEADER.size])
    )
    if magic != MAGIC:
        raise IndexFormatError(f"{origin}: bad magic {magic!r}")
    if version != VERSION:
        raise IndexFormatError(f"{origin}: unsupported format version {version}")
    if tw not in (2, 4) or hw not in (4, 8):
        raise IndexFormatError(f"{origin}: invalid widths token={tw} handle={hw}")
    return tw, hw, corpus_len, n_states, n_edges, separator, vocab_size, crc


def read_header(path: str | Path) -> dict:
    """Parse just the fixed header of an index file into a dict."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    tw, hw, corpus_len, n_states, n_edges, separator, vocab_size, crc = _parse_header(
        raw, str(path)
    )
    return {
        "token_width": tw,
        "handle_width": hw,
        "corpus_len": corpus_len,
        "n_states": n_states,
        "n_edges": n_edges,
        "separator": separator,
        "vocab_size": vocab_size,
        "checksum": crc,
    }


def _expected_size(tw: int, hw: int, corpus_len: int, n_states: int, n_edges: int) -> int:
    return (
        _HEADER.size
        + n_states * _node_dtype(hw).itemsize
        + n_edges * _edge_dtype(hw, tw).itemsize
        + (corpus_len + 1) * tw
    )


def _file_crc(path: Path, offset: int) -> int:
    crc = 0
    with open(path, "rb") as fh:
        fh.seek(offset)
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                break
            crc = zlib.crc32(chunk, crc)
    return crc


def load_index(
    path: str | Path, backend: Literal["ram", "disk"] = "ram", verify_checksum: bool = True
) -> Cdawg:
    """Load an index file.

    backend="ram" copies the tables into memory; backend="disk" memory-maps
    them so queries touch only the pages they need.  Both return objects
    with identical query behavior.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    tw, hw, corpus_len, n_states, n_edges, separator, vocab_size, crc = _parse_header(
        head, str(path)
    )
    expected = _expected_size(tw, hw, corpus_len, n_states, n_edges)
    actual = path.stat().st_size
    if actual != expected:
        raise IndexFormatError(f"{path}: truncated or oversized file ({actual} != {expected} bytes)")
    if verify_checksum and _file_crc(path, _HEADER.size) != crc:
        raise IndexFormatError(f"{path}: checksum mismatch")

    ndt, edt = _node_dtype(hw), _edge_dtype(hw, tw)
    off_nodes = _HEADER.size
    off_edges = off_nodes + n_states * ndt.itemsize
    off_tokens = off_edges + n_edges * edt.itemsize

    if backend == "ram":
        raw = path.read_bytes()
        nodes = np.frombuffer(raw, dtype=ndt, count=n_states, offset=off_nodes)
        edges = np.frombuffer(raw, dtype=edt, count=n_edges, offset=off_edges)
        tokens = np.frombuffer(raw, dtype=f"<u{tw}", count=corpus_len + 1, offset=off_tokens)
    elif backend == "disk":
        nodes = np.memmap(path, dtype=ndt, mode="r", offset=off_nodes, shape=(n_states,))
        edges = np.memmap(path, dtype=edt, mode="r", offset=off_edges, shape=(n_edges,))
        tokens = np.memmap(path, dtype=f"<u{tw}", mode="r", offset=off_tokens, shape=(corpus_len + 1,))
    else:
        raise ValueError(f"unknown backend {backend!r}; expected 'ram' or 'disk'")

    return Cdawg(
        tokens=tokens,
        corpus_len=corpus_len,
        separator=separator,
        vocab_size=vocab_size,
        node_maxlen=nodes["max_length"],
        node_fail=nodes["failure"],
        node_count=nodes["count"],
        node_edge_start=nodes["edge_start"],
        node_edge_count=nodes["edge_count"],
        edge_token=edges["token"],
        edge_alpha=edges["alpha"],
        edge_omega=edges["omega"],
        edge_target=edges["target"],
        counts_populated=True,
        fail_none=(1 << (8 * hw)) - 1,
    )


def load_index_bytes(raw: bytes, origin: str = "<bytes>") -> Cdawg:
    """RAM-backed load from an in-memory serialized index."""
    tw, hw, corpus_len, n_states, n_edges, separator, vocab_size, crc = _parse_header(raw, origin)
    expected = _expected_size(tw, hw, corpus_len, n_states, n_edges)
    if len(raw) != expected:
        raise IndexFormatError(f"{origin}: truncated or oversized ({len(raw)} != {expected} bytes)")
    if zlib.crc32(raw[_HEADER.size :]) != crc:
        raise IndexFormatError(f"{origin}: checksum mismatch")
    ndt, edt = _node_dtype(hw), _edge_dtype(hw, tw)
    off_nodes = _HEADER.size
    off_edges = off_nodes + n_states * ndt.itemsize
    off_tokens = off_edges + n_edges * edt.itemsize
    nodes = np.frombuffer(raw, dtype=ndt, count=n_states, offset=off_nodes)
    edges = np.frombuffer(raw, dtype=edt, count=n_edges, offset=off_edges)
    tokens = np.frombuffer(raw, dtype=f"<u{tw}", count=corpus_len + 1, offset=off_tokens)
    return Cdawg(
        tokens=tokens,
        corpus_len=corpus_len,
        separator=separator,
        vocab_size=vocab_size,
        node_maxlen=nodes["max_length"],
        node_fail=nodes["failure"],
        node_count=nodes["count"],
        node_edge_start=nodes["edge_start"],
        node_edge_count=nodes["edge_count"],
        edge_token=edges["token"],
        edge_alpha=edges["alpha"],
        edge_omega=edges["omega"],
        edge_target=edges["target"],
        counts_populated=True,
        fail_none=(1 << (8 * hw)) - 1,
    )
