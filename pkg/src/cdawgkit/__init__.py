"""cdawgkit: suffix-automaton indexes for unbounded n-gram overlap queries.

Build a compacted DAWG over a tokenized corpus, then stream documents
through it to get, per position, the length of the longest suffix that
appears somewhere in the corpus and how often that suffix occurs.  On top
of those annotations sit novelty curves, match-length summaries, a
theoretical novelty lower bound, and completion-loss binning.
"""

from .cdawg import (
    SOURCE,
    Cdawg,
    QueryCursor,
    Span,
    build_cdawg,
    contains,
    count_transition_steps,
    cursor_count,
    index_stats,
    lookup_cursor,
    occurrence_count,
    populate_counts,
    suffix_count_profile,
    transition,
)
from .corpus import (
    CORPUS_FORMATS,
    Corpus,
    CorpusError,
    ShardSpec,
    load_corpus,
    save_corpus,
    shard_corpus,
)
from .estimator import CdawgIndex
from .novelty import (
    DEFAULT_BIN_EDGES,
    IN_TRAIN,
    NOT_IN_TRAIN,
    LengthHistogram,
    LossBinRow,
    LowerBoundParams,
    NnslStats,
    NoveltyCurve,
    completion_loss_bins,
    length_histogram,
    lower_bound_curve,
    nnsl_stats,
    novelty_curve,
    smallest_n_above,
)
from .oracle import naive_contains, naive_count, oracle_nnsl, oracle_novelty
from .query import (
    MatchAnnotations,
    QueryFailure,
    batch_query,
    nnsl_query,
    read_annotations,
    read_query_docs,
    write_annotations,
)
from .shardexec import ShardedIndex, build_sharded, load_sharded, save_sharded
from .storage import IndexFormatError, load_index, load_index_bytes, read_header, save_index

__version__ = "0.1.0"

__all__ = [
    "SOURCE",
    "Cdawg",
    "QueryCursor",
    "Span",
    "build_cdawg",
    "populate_counts",
    "transition",
    "cursor_count",
    "suffix_count_profile",
    "count_transition_steps",
    "lookup_cursor",
    "contains",
    "occurrence_count",
    "index_stats",
    "Corpus",
    "CorpusError",
    "CORPUS_FORMATS",
    "ShardSpec",
    "load_corpus",
    "save_corpus",
    "shard_corpus",
    "CdawgIndex",
    "MatchAnnotations",
    "QueryFailure",
    "nnsl_query",
    "batch_query",
    "read_query_docs",
    "read_annotations",
    "write_annotations",
    "naive_contains",
    "naive_count",
    "oracle_nnsl",
    "oracle_novelty",
    "LengthHistogram",
    "NoveltyCurve",
    "NnslStats",
    "LowerBoundParams",
    "LossBinRow",
    "DEFAULT_BIN_EDGES",
    "IN_TRAIN",
    "NOT_IN_TRAIN",
    "length_histogram",
    "novelty_curve",
    "nnsl_stats",
    "lower_bound_curve",
    "smallest_n_above",
    "completion_loss_bins",
    "ShardedIndex",
    "build_sharded",
    "save_sharded",
    "load_sharded",
    "IndexFormatError",
    "save_index",
    "load_index",
    "load_index_bytes",
    "read_header",
    "__version__",
]
