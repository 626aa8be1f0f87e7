"""Compacted DAWG (CDAWG) over a token corpus: construction, occurrence
counts, and single-token transitions with failure links.

The index is a deterministic acyclic automaton whose nodes are the corpus's
right-branching substring classes plus a source and a single sink, and whose
edges carry half-open spans ⟨alpha, omega⟩ into the backing token array
instead of explicit label strings.  A token string can be walked from the
source iff it occurs in the corpus, every node stores the occurrence count
of the strings ending there, and failure (suffix) links let a query stream
drop to its longest matchable suffix in amortized constant time per token.

Construction runs in two phases:

1. An online suffix automaton is built left to right over the corpus tokens
   plus one reserved end sentinel (token id == vocab_size, never visible to
   queries).  The sentinel forces every corpus suffix into one automaton
   class, which becomes the sink.
2. Non-branching automaton states are compacted away.  Kept states are the
   source, the sink, and every state with two or more outgoing edges; runs
   of single-edge states collapse into one span-labeled edge.  A suffix of a
   right-branching string is itself right-branching, so failure links of
   kept states already point at kept states and survive compaction
   unchanged.

The phase-1 automaton has up to two states per corpus token, so peak build
memory is dominated by construction, not by the final index.

Cursor representation: a cursor is (node, edge, consumed, ell).  When
consumed == 0 the cursor rests at `node` and `edge` is -1; otherwise it sits
`consumed` tokens into `edge`, whose parent is `node`.  `ell` is the length
of the matched string, which may be any length in the node class's range,
not only the longest one.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, token_dtype
from .validation import as_token_list

#: Node handle of the source (empty-string) node in every Cdawg.
SOURCE = 0


@dataclass(frozen=True)
class Span:
    """Half-open token range [alpha, omega) into the backing token array."""

    alpha: int
    omega: int

    def __len__(self) -> int:
        return self.omega - self.alpha


@dataclass(frozen=True)
class QueryCursor:
    """Position of an incremental match: node, active edge, progress, length.

    edge == -1 means the cursor rests exactly at `node` with no pending
    progress; otherwise `consumed` tokens of `edge` have been matched.
    ell is the matched-suffix length (0 at the source with no progress).
    """

    node: int
    edge: int
    consumed: int
    ell: int

    def progress(self, cdawg: "Cdawg") -> Span:
        if self.edge < 0:
            return Span(0, 0)
        a = int(cdawg.edge_alpha[self.edge])
        return Span(a, a + self.consumed)


class Cdawg:
    """Built index: node table, span-labeled edge table, backing tokens.

    Nodes are ordered by max_length ascending, so node 0 is the source and
    the last node is the sink; edge blocks are contiguous per node and
    sorted by first token.  Instances are created by build_cdawg or
    storage.load_index, not directly.
    """

    def __init__(
        self,
        *,
        tokens: np.ndarray,
        corpus_len: int,
        separator: int,
        vocab_size: int,
        node_maxlen: np.ndarray,
        node_fail: np.ndarray,
        node_count: np.ndarray,
        node_edge_start: np.ndarray,
        node_edge_count: np.ndarray,
        edge_token: np.ndarray,
        edge_alpha: np.ndarray,
        edge_omega: np.ndarray,
        edge_target: np.ndarray,
        counts_populated: bool = False,
        fail_none: int = -1,
    ) -> None:
        self.tokens = tokens  # corpus tokens plus the trailing sentinel
        self.corpus_len = corpus_len
        self.separator = separator
        self.vocab_size = vocab_size
        self.node_maxlen = node_maxlen
        self.node_fail = node_fail
        self.node_count = node_count
        self.node_edge_start = node_edge_start
        self.node_edge_count = node_edge_count
        self.edge_token = edge_token
        self.edge_alpha = edge_alpha
        self.edge_omega = edge_omega
        self.edge_target = edge_target
        self.counts_populated = counts_populated
        self._fail_none = fail_none  # encoding of "no failure link" (source only)

    @property
    def n_states(self) -> int:
        return int(self.node_maxlen.size)

    @property
    def n_edges(self) -> int:
        return int(self.edge_token.size)

    @property
    def sink(self) -> int:
        return self.n_states - 1

    @property
    def corpus_tokens(self) -> np.ndarray:
        """The indexed corpus tokens without the internal sentinel."""
        return self.tokens[: self.corpus_len]

    def __repr__(self) -> str:
        return (
            f"Cdawg(corpus_len={self.corpus_len}, n_states={self.n_states}, "
            f"n_edges={self.n_edges}, vocab_size={self.vocab_size})"
        )

    def start_cursor(self) -> QueryCursor:
        return QueryCursor(SOURCE, -1, 0, 0)

    # -- low-level walking ------------------------------------------------

    def _find_edge(self, node: int, tok: int) -> int:
        """Edge index of `node`'s edge keyed by first token, or -1."""
        lo = int(self.node_edge_start[node])
        hi = lo + int(self.node_edge_count[node])
        et = self.edge_token
        end = hi
        while lo < hi:
            mid = (lo + hi) // 2
            if int(et[mid]) < tok:
                lo = mid + 1
            else:
                hi = mid
        if lo < end and int(et[lo]) == tok:
            return lo
        return -1

    def _canonize(self, node: int, a: int, b: int) -> tuple[int, int, int]:
        """Re-descend the known-matchable span tokens[a:b] from `node`.

        The span is known to be walkable, so edges are located by first
        token only; label bodies are skipped without comparison.
        """
        toks = self.tokens
        ea, eo, etg = self.edge_alpha, self.edge_omega, self.edge_target
        while a < b:
            e = self._find_edge(node, int(toks[a]))
            length = int(eo[e]) - int(ea[e])
            if b - a < length:
                return node, e, b - a
            a += length
            node = int(etg[e])
        return node, -1, 0

    def _step(
        self, node: int, edge: int, consumed: int, ell: int, tok: int
    ) -> tuple[int, int, int, int, int]:
        """One query token: extend the match or fall back along failures.

        Returns (node, edge, consumed, ell, transitions_taken).  After total
        failure the token is retried once at the source, so a token that
        occurs anywhere in the corpus always yields ell >= 1.
        """
        steps = 0
        if tok < 0 or tok >= self.vocab_size:
            # Unknown ids (and the internal sentinel) never match anything.
            return SOURCE, -1, 0, 0, 1
        ea, eo, etg = self.edge_alpha, self.edge_omega, self.edge_target
        toks = self.tokens
        maxlen, fail = self.node_maxlen, self.node_fail
        while True:
            steps += 1
            if edge < 0:
                e = self._find_edge(node, tok)
                if e >= 0:
                    if int(eo[e]) - int(ea[e]) == 1:
                        return int(etg[e]), -1, 0, ell + 1, steps
                    return node, e, 1, ell + 1, steps
                if node == SOURCE:
                    return SOURCE, -1, 0, 0, steps
                node = int(fail[node])
                ell = int(maxlen[node])
                continue
            a = int(ea[edge])
            if int(toks[a + consumed]) == tok:
                consumed += 1
                if consumed == int(eo[edge]) - a:
                    return int(etg[edge]), -1, 0, ell + 1, steps
                return node, edge, consumed, ell + 1, steps
            # Mismatch mid-edge: drop to the longest proper suffix of the
            # match and re-descend the pending progress tokens[a:a+consumed].
            if node == SOURCE:
                ell = consumed - 1
                node, edge, consumed = self._canonize(SOURCE, a + 1, a + consumed)
            else:
                f = int(fail[node])
                ell = int(maxlen[f]) + consumed
                node, edge, consumed = self._canonize(f, a, a + consumed)


def build_cdawg(corpus: Corpus) -> Cdawg:
    """Build the compacted automaton for a corpus; counts stay unpopulated."""
    tokens = corpus.tokens.tolist()
    sentinel = corpus.vocab_size
    tokens.append(sentinel)
    sam = _build_suffix_automaton(tokens)
    return _compact(sam, tokens, corpus)


def populate_counts(cdawg: Cdawg) -> Cdawg:
    """Fill per-node occurrence counts: paths from the node to the sink.

    The sink counts 1; every other node sums its edge targets' counts
    (parallel edges to one target contribute once each).  Nodes are
    processed in reverse topological order, which max_length descending
    provides because every edge strictly increases max_length.
    """
    counts = np.zeros(cdawg.n_states, dtype=np.uint64)
    starts = cdawg.node_edge_start
    ncnt = cdawg.node_edge_count
    tgt = cdawg.edge_target
    order = np.argsort(cdawg.node_maxlen, kind="stable")
    for i in order[::-1].tolist():
        s = int(starts[i])
        n = int(ncnt[i])
        if n == 0:
            counts[i] = 1  # sink: one empty path
        else:
            counts[i] = counts[tgt[s : s + n].astype(np.int64)].sum()
    cdawg.node_count = counts
    cdawg.counts_populated = True
    return cdawg


def transition(cdawg: Cdawg, cursor: QueryCursor, token: int) -> QueryCursor:
    """Advance one query token, following failure links on mismatch.

    ell grows by exactly one on a successful extension and otherwise drops
    to the longest suffix of (matched string + token) that occurs in the
    corpus, reaching 0 when no suffix ending in `token` occurs at all.
    """
    node, edge, consumed, ell, _ = cdawg._step(
        cursor.node, cursor.edge, cursor.consumed, cursor.ell, int(token)
    )
    return QueryCursor(node, edge, consumed, ell)


def count_transition_steps(cdawg: Cdawg, query: Sequence[int]) -> int:
    """Total transitions (including failure hops) over a full query pass."""
    node, edge, consumed, ell = SOURCE, -1, 0, 0
    total = 0
    for tok in as_token_list(query, what="query"):
        node, edge, consumed, ell, steps = cdawg._step(node, edge, consumed, ell, tok)
        total += steps
    return total


def cursor_count(cdawg: Cdawg, cursor: QueryCursor) -> int:
    """Occurrence count of the currently matched string (0 when ell == 0)."""
    if not cdawg.counts_populated:
        raise ValueError("counts not populated; call populate_counts first")
    if cursor.ell == 0:
        return 0
    if cursor.edge >= 0:
        return int(cdawg.node_count[int(cdawg.edge_target[cursor.edge])])
    return int(cdawg.node_count[cursor.node])


def suffix_count_profile(cdawg: Cdawg, cursor: QueryCursor) -> list[tuple[int, int, int]]:
    """Occurrence count of every suffix of the matched string, as a step
    function over suffix lengths.

    Returns (lo, hi, count) intervals, hi descending, tiling 1..ell exactly:
    each suffix of length m in [lo, hi] of the matched string occurs `count`
    times in the corpus.  Walks the failure chain from the cursor; cost is
    proportional to the chain length.
    """
    if not cdawg.counts_populated:
        raise ValueError("counts not populated; call populate_counts first")
    if cursor.ell <= 0:
        return []  # the empty match has no suffixes
    node, edge, consumed = cursor.node, cursor.edge, cursor.consumed
    hi = cursor.ell
    out: list[tuple[int, int, int]] = []
    while hi > 0:
        if edge >= 0:
            cnt = int(cdawg.node_count[int(cdawg.edge_target[edge])])
            flen = -1 if node == SOURCE else int(cdawg.node_maxlen[int(cdawg.node_fail[node])])
            lo = flen + 1 + consumed
        else:
            cnt = int(cdawg.node_count[node])
            flen = int(cdawg.node_maxlen[int(cdawg.node_fail[node])])
            lo = flen + 1
        lo = max(lo, 1)
        out.append((lo, hi, cnt))
        if lo == 1:
            break
        if edge >= 0:
            a = int(cdawg.edge_alpha[edge])
            if node == SOURCE:
                node, edge, consumed = cdawg._canonize(SOURCE, a + 1, a + consumed)
            else:
                node, edge, consumed = cdawg._canonize(
                    int(cdawg.node_fail[node]), a, a + consumed
                )
        else:
            node, edge, consumed = int(cdawg.node_fail[node]), -1, 0
        hi = lo - 1
    return out


def lookup_cursor(cdawg: Cdawg, pattern: Sequence[int]) -> QueryCursor | None:
    """Walk `pattern` from the source; None if it does not occur."""
    pattern = as_token_list(pattern, what="pattern")
    node, edge, consumed = SOURCE, -1, 0
    toks = cdawg.tokens
    for i, tok in enumerate(pattern):
        if tok < 0 or tok >= cdawg.vocab_size:
            return None
        if edge < 0:
            e = cdawg._find_edge(node, tok)
            if e < 0:
                return None
            edge, consumed = e, 1
        else:
            if int(toks[int(cdawg.edge_alpha[edge]) + consumed]) != tok:
                return None
            consumed += 1
        if consumed == int(cdawg.edge_omega[edge]) - int(cdawg.edge_alpha[edge]):
            node, edge, consumed = int(cdawg.edge_target[edge]), -1, 0
    return QueryCursor(node, edge, consumed, len(pattern))


def contains(cdawg: Cdawg, pattern: Sequence[int]) -> bool:
    """True iff the token pattern occurs in the indexed corpus."""
    if len(pattern) == 0:
        return True
    return lookup_cursor(cdawg, pattern) is not None


def occurrence_count(cdawg: Cdawg, pattern: Sequence[int]) -> int:
    """Exact number of occurrences of the pattern in the corpus (0 if absent).

    The empty pattern counts 0, mirroring the zero-length match convention.
    """
    if len(pattern) == 0:
        return 0
    cur = lookup_cursor(cdawg, pattern)
    if cur is None:
        return 0
    return cursor_count(cdawg, cur)


def serialized_layout(
    n_states: int, n_edges: int, n_stored_tokens: int, vocab_size: int
) -> tuple[int, int, int]:
    """(token_width, handle_width, total_bytes) of the on-disk form.

    Token width is 2 bytes while the sentinel id (== vocab_size) fits u16,
    else 4.  Handles are 4 bytes while every node/edge index and token
    position fits below the u32 "none" sentinel, else 8.  Counts are always
    stored as u64.
    """
    tw = 2 if vocab_size <= 0xFFFF else 4
    hw = 4 if max(n_states, n_edges, n_stored_tokens) < 0xFFFFFFFF else 8
    node_rec = 3 * hw + 8 + hw  # max_length, failure, count(u64), edge_start, edge_count
    edge_rec = tw + 3 * hw  # token, alpha, omega, target
    total = 64 + n_states * node_rec + n_edges * edge_rec + n_stored_tokens * tw
    return tw, hw, total


def index_stats(cdawg: Cdawg) -> dict:
    """Size summary: states, edges, serialized bytes, bytes per corpus token."""
    _, _, total = serialized_layout(
        cdawg.n_states, cdawg.n_edges, int(cdawg.tokens.size), cdawg.vocab_size
    )
    return {
        "n_states": cdawg.n_states,
        "n_edges": cdawg.n_edges,
        "corpus_len": cdawg.corpus_len,
        "bytes_total": total,
        "bytes_per_corpus_token": total / cdawg.corpus_len,
    }


# -- construction internals -----------------------------------------------


class _Sam:
    """Phase-1 online suffix automaton in flat arrays.

    Transition storage is hybrid: most states have exactly one outgoing
    edge, held inline in (one_tok, one_tgt); states that branch promote
    their edges into the `multi` dict.  one_tok is -1 for no edges and -2
    for promoted states.
    """

    __slots__ = ("maxlen", "link", "firstpos", "one_tok", "one_tgt", "multi", "last", "size")

    def __init__(self) -> None:
        self.maxlen = array("q", [0])
        self.link = array("q", [-1])
        self.firstpos = array("q", [0])
        self.one_tok = array("q", [-1])
        self.one_tgt = array("q", [0])
        self.multi: dict[int, dict[int, int]] = {}
        self.last = 0
        self.size = 1


def _build_suffix_automaton(tokens: list[int]) -> _Sam:
    sam = _Sam()
    maxlen, link, firstpos = sam.maxlen, sam.link, sam.firstpos
    one_tok, one_tgt, multi = sam.one_tok, sam.one_tgt, sam.multi
    last = 0
    size = 1
    for pos, c in enumerate(tokens):
        cur = size
        size += 1
        maxlen.append(maxlen[last] + 1)
        link.append(-1)
        firstpos.append(pos + 1)
        one_tok.append(-1)
        one_tgt.append(0)
        p = last
        q = -1
        while p >= 0:
            ot = one_tok[p]
            if ot == -2:
                t = multi[p].get(c, -1)
                if t >= 0:
                    q = t
                    break
                multi[p][c] = cur
            elif ot == -1:
                one_tok[p] = c
                one_tgt[p] = cur
            elif ot == c:
                q = one_tgt[p]
                break
            else:
                multi[p] = {ot: one_tgt[p], c: cur}
                one_tok[p] = -2
            p = link[p]
        if p < 0:
            link[cur] = 0
        elif maxlen[p] + 1 == maxlen[q]:
            link[cur] = q
        else:
            clone = size
            size += 1
            maxlen.append(maxlen[p] + 1)
            link.append(link[q])
            firstpos.append(firstpos[q])  # any occurrence end of q's class works
            ot = one_tok[q]
            if ot == -2:
                multi[clone] = dict(multi[q])
                one_tok.append(-2)
                one_tgt.append(0)
            else:
                one_tok.append(ot)
                one_tgt.append(one_tgt[q])
            link[q] = clone
            link[cur] = clone
            while p >= 0:
                ot = one_tok[p]
                if ot == -2:
                    d = multi[p]
                    if d.get(c, -1) != q:
                        break
                    d[c] = clone
                elif ot == c:
                    if one_tgt[p] != q:
                        break
                    one_tgt[p] = clone
                else:
                    break
                p = link[p]
        last = cur
    sam.last = last
    sam.size = size
    return sam


def _compact(sam: _Sam, tokens_with_sentinel: list[int], corpus: Corpus) -> Cdawg:
    size = sam.size
    maxlen_np = np.frombuffer(sam.maxlen, dtype=np.int64)
    link_np = np.frombuffer(sam.link, dtype=np.int64)
    one_tok_np = np.frombuffer(sam.one_tok, dtype=np.int64)
    multi = sam.multi

    kept = one_tok_np == -2  # promoted == two or more edges
    kept[SOURCE] = True
    kept[sam.last] = True  # the sink (out-degree 0)
    kept_idx = np.flatnonzero(kept)
    order = kept_idx[np.argsort(maxlen_np[kept_idx], kind="stable")]
    n_states = int(order.size)
    cid = np.full(size, -1, dtype=np.int64)
    cid[order] = np.arange(n_states, dtype=np.int64)

    kept_b = kept.tolist()
    one_tok = sam.one_tok
    one_tgt = sam.one_tgt
    firstpos = sam.firstpos
    # walk targets/distances through runs of single-edge states, memoized
    walk_t = array("q", bytes(8 * size))
    walk_d = array("q", bytes(8 * size))
    have = bytearray(size)

    def _resolve(r: int) -> tuple[int, int]:
        chain = []
        node = r
        while not kept_b[node] and not have[node]:
            chain.append(node)
            node = one_tgt[node]
        if kept_b[node]:
            t, d = node, 0
        else:
            t, d = walk_t[node], walk_d[node]
        while chain:
            n2 = chain.pop()
            d += 1
            walk_t[n2] = t
            walk_d[n2] = d
            have[n2] = 1
        return t, d

    etok = array("q")
    ealpha = array("q")
    eomega = array("q")
    etgt = array("q")
    node_edge_start = np.zeros(n_states, dtype=np.int64)
    node_edge_count = np.zeros(n_states, dtype=np.int64)

    n_edges = 0
    for ci, p in enumerate(order.tolist()):
        node_edge_start[ci] = n_edges
        ot = one_tok[p]
        if ot == -2:
            items = sorted(multi[p].items())
        elif ot >= 0:
            items = [(ot, one_tgt[p])]
        else:
            items = []
        for c, r in items:
            if kept_b[r]:
                t, m = r, 1
            else:
                t, d = _resolve(r)
                m = d + 1
            e_end = firstpos[t]
            etok.append(c)
            ealpha.append(e_end - m)
            eomega.append(e_end)
            etgt.append(cid[t])
            n_edges += 1
        node_edge_count[ci] = len(items)

    node_maxlen = maxlen_np[order].copy()
    node_fail = np.where(order == SOURCE, np.int64(-1), cid[link_np[order]])

    stored = np.asarray(tokens_with_sentinel, dtype=token_dtype(corpus.vocab_size))
    return Cdawg(
        tokens=stored,
        corpus_len=corpus.n_tokens,
        separator=corpus.separator,
        vocab_size=corpus.vocab_size,
        node_maxlen=node_maxlen,
        node_fail=node_fail,
        node_count=np.zeros(n_states, dtype=np.uint64),
        node_edge_start=node_edge_start,
        node_edge_count=node_edge_count,
        edge_token=np.frombuffer(etok, dtype=np.int64) if n_edges else np.zeros(0, np.int64),
        edge_alpha=np.frombuffer(ealpha, dtype=np.int64) if n_edges else np.zeros(0, np.int64),
        edge_omega=np.frombuffer(eomega, dtype=np.int64) if n_edges else np.zeros(0, np.int64),
        edge_target=np.frombuffer(etgt, dtype=np.int64) if n_edges else np.zeros(0, np.int64),
        counts_populated=False,
    )
