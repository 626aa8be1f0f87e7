"""N-gram novelty analytics over match annotations.

Everything in this module is derived from per-position match lengths, never
by re-walking the index: a document position i with match length L(i) >= n
is exactly an occurrence of a corpus n-gram ending at i, so the novel
n-gram count for one document is

    novel(n) = (number of positions with L < n) - (n - 1),   clamped at 0,
    total(n) = len(document) - (n - 1),                      clamped at 0.

Multi-document curves sum numerators and denominators across documents
before dividing, so results do not depend on aggregation order.
"""

from __future__ import annotations

import csv
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .query import MatchAnnotations

#: Default frequency bucket edges: powers of ten (occurrence counts are >= 1).
DEFAULT_BIN_EDGES = (1, 10, 100, 1_000, 10_000, 100_000, 1_000_000)

IN_TRAIN = "in_train"
NOT_IN_TRAIN = "not_in_train"


@dataclass(frozen=True)
class LengthHistogram:
    """How many positions, over all documents, matched each suffix length."""

    counts: dict[int, int]
    total_positions: int

    def count(self, length: int) -> int:
        return self.counts.get(length, 0)


@dataclass(frozen=True)
class NoveltyCurve:
    """Pooled novel-fraction-by-n curve; rows exist while total(n) > 0."""

    n: np.ndarray
    novel: np.ndarray
    total: np.ndarray
    ratio: np.ndarray
    per_doc: list[tuple[str | None, np.ndarray, np.ndarray]] | None = None


@dataclass(frozen=True)
class NnslStats:
    """Match-length summary, pooled over all positions and per document."""

    mean: float
    max: int
    median: float
    per_doc: list[tuple[str | None, float, int, float]] = field(default_factory=list)


@dataclass(frozen=True)
class LowerBoundParams:
    """Parameters of the analytic non-novelty floor.

    corpus_size: tokens in the reference corpus.  p: assumed per-token
    probability floor.  entropy_bits: assumed per-token entropy in bits.
    """

    corpus_size: float
    p: float
    entropy_bits: float

    def __post_init__(self) -> None:
        if self.corpus_size <= 0:
            raise ValueError(f"corpus_size must be positive, got {self.corpus_size}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {self.p}")
        if self.entropy_bits <= 0:
            raise ValueError(f"entropy_bits must be positive, got {self.entropy_bits}")


@dataclass(frozen=True)
class LossBinRow:
    """One (n, condition, frequency bucket) cell of the loss table."""

    n: int
    condition: str
    freq_lo: int | None
    freq_hi: int | None  # None in the last, open-ended bucket
    mean_loss: float
    count: int


def length_histogram(annotations: Iterable[MatchAnnotations]) -> LengthHistogram:
    counts: dict[int, int] = {}
    total = 0
    for ann in annotations:
        values, tallies = np.unique(ann.nnsl, return_counts=True)
        for v, c in zip(values.tolist(), tallies.tolist()):
            counts[v] = counts.get(v, 0) + c
        total += len(ann)
    return LengthHistogram(counts=counts, total_positions=total)


def novelty_curve(
    annotations: Sequence[MatchAnnotations],
    max_n: int | None = None,
    per_document: bool = False,
) -> NoveltyCurve:
    """Fraction of novel n-grams for n = 1..max_n, pooled across documents.

    max_n=None reports up to the longest document.  Rows beyond the longest
    document (total would be 0) are omitted.  The per-document numerator and
    denominator are both clamped at zero before pooling, which only matters
    for documents shorter than n - 1.
    """
    if max_n is None:
        max_n = max((len(ann) for ann in annotations), default=0)
        if max_n == 0:
            empty = np.zeros(0, dtype=np.int64)
            return NoveltyCurve(
                n=empty,
                novel=empty,
                total=empty,
                ratio=np.zeros(0, dtype=np.float64),
                per_doc=[] if per_document else None,
            )
    if max_n <= 0:
        raise ValueError(f"max_n must be positive, got {max_n}")
    ns = np.arange(1, max_n + 1, dtype=np.int64)
    novel = np.zeros(max_n, dtype=np.int64)
    total = np.zeros(max_n, dtype=np.int64)
    per_doc_rows: list[tuple[str | None, np.ndarray, np.ndarray]] | None = (
        [] if per_document else None
    )
    for ann in annotations:
        size = len(ann)
        sorted_l = np.sort(ann.nnsl)
        below = np.searchsorted(sorted_l, ns, side="left")  # positions with L < n
        d_total = np.maximum(size - (ns - 1), 0)
        d_novel = np.maximum(below - (ns - 1), 0)
        d_novel = np.where(d_total == 0, 0, d_novel)
        novel += d_novel
        total += d_total
        if per_doc_rows is not None:
            per_doc_rows.append((ann.doc_id, d_novel, d_total))
    keep = total > 0
    with np.errstate(invalid="ignore"):
        ratio = np.where(keep, novel / np.maximum(total, 1), 0.0)
    return NoveltyCurve(
        n=ns[keep],
        novel=novel[keep],
        total=total[keep],
        ratio=ratio[keep],
        per_doc=per_doc_rows,
    )


def nnsl_stats(annotations: Sequence[MatchAnnotations]) -> NnslStats:
    """Mean, max, and median match length, pooled and per document."""
    all_lengths = [ann.nnsl for ann in annotations if len(ann)]
    if not all_lengths:
        raise ValueError("no positions to summarize")
    pooled = np.concatenate(all_lengths)
    per_doc = [
        (ann.doc_id, float(ann.nnsl.mean()), int(ann.nnsl.max()), float(np.median(ann.nnsl)))
        for ann in annotations
        if len(ann)
    ]
    return NnslStats(
        mean=float(pooled.mean()),
        max=int(pooled.max()),
        median=float(np.median(pooled)),
        per_doc=per_doc,
    )


def lower_bound_curve(params: LowerBoundParams, n_values: Sequence[int]) -> np.ndarray:
    """Analytic floor on the non-novel fraction of length-n spans.

    bound(n) = max(0, 1 - corpus_size * exp(n * (ln p - entropy_nats)))
    with entropy_nats = entropy_bits * ln 2.  Monotone in n; approaches 1.
    """
    ns = np.asarray(list(n_values), dtype=np.float64)
    if ns.size and float(ns.min()) < 0:
        raise ValueError("n values must be non-negative")
    rate = math.log(params.p) - params.entropy_bits * math.log(2.0)
    return np.maximum(0.0, 1.0 - params.corpus_size * np.exp(ns * rate))


def smallest_n_above(params: LowerBoundParams, threshold: float, n_max: int = 100_000) -> int | None:
    """Smallest n with bound(n) >= threshold, or None below n_max."""
    rate = math.log(params.p) - params.entropy_bits * math.log(2.0)
    if rate >= 0:
        return None  # degenerate: bound never rises
    for n in range(n_max + 1):
        if 1.0 - params.corpus_size * math.exp(n * rate) >= threshold:
            return n
    return None


def completion_loss_bins(
    annotations: Sequence[MatchAnnotations],
    losses: Sequence[Sequence[float]],
    max_n: int,
    frequency_bin_edges: Sequence[int] | None = DEFAULT_BIN_EDGES,
    multi_n: bool = True,
) -> list[LossBinRow]:
    """Mean per-token loss grouped by match condition at each n <= max_n.

    For positions i >= 1: the token is in-train at n iff L(i) >= n (the
    n-gram ending at i occurs in the corpus) and not-in-train at n iff
    L(i) < n and L(i-1) >= n-1 (its n-1 prefix occurs but the n-gram does
    not).  By default a token contributes to every n it qualifies for;
    multi_n=False assigns it only to the extreme n of each condition.

    In-train cells are additionally split by the occurrence count of the
    qualifying n-gram: N(i) when n == L(i), otherwise the count of the
    length-n suffix, which requires annotations built with suffix
    profiles.  Bucket edges default to powers of ten; pass
    frequency_bin_edges=None to disable the split.
    """
    if max_n <= 0:
        raise ValueError(f"max_n must be positive, got {max_n}")
    if len(losses) != len(annotations):
        raise ValueError(f"{len(losses)} loss rows for {len(annotations)} annotation rows")
    edges: list[int] | None = None
    if frequency_bin_edges is not None:
        edges = sorted(int(e) for e in frequency_bin_edges)
        if not edges:
            raise ValueError("frequency_bin_edges must not be empty")

    acc: dict[tuple[int, str, int | None], list[float]] = {}

    def bucket_of(freq: int) -> int:
        return bisect_right(edges, freq) - 1  # -1 = below the first edge

    def put(n: int, cond: str, bucket: int | None, loss: float) -> None:
        acc.setdefault((n, cond, bucket), []).append(loss)

    for ann, doc_losses in zip(annotations, losses):
        if len(doc_losses) != len(ann):
            raise ValueError(
                f"document {ann.doc_id!r}: {len(doc_losses)} losses for {len(ann)} positions"
            )
        lengths = ann.nnsl.tolist()
        counts = ann.counts.tolist()
        for i in range(1, len(lengths)):
            li, lp = lengths[i], lengths[i - 1]
            loss = float(doc_losses[i])
            in_train_ns: Iterable[int]
            not_in_ns: Iterable[int]
            if multi_n:
                in_train_ns = range(1, min(li, max_n) + 1)
                not_in_ns = range(li + 1, min(lp + 1, max_n) + 1)
            else:
                in_train_ns = [li] if 1 <= li <= max_n else []
                not_in_ns = [lp + 1] if li <= lp and lp + 1 <= max_n else []
            for n in in_train_ns:
                if edges is None:
                    put(n, IN_TRAIN, None, loss)
                    continue
                if n == li:
                    freq = counts[i]
                else:
                    freq = _profile_count(ann, i, n)
                put(n, IN_TRAIN, bucket_of(freq), loss)
            for n in not_in_ns:
                put(n, NOT_IN_TRAIN, None, loss)

    rows = []
    for (n, cond, bucket) in sorted(acc, key=lambda k: (k[0], k[1], -1 if k[2] is None else k[2])):
        vals = acc[(n, cond, bucket)]
        if bucket is None:
            lo, hi = None, None
        elif bucket < 0:
            lo, hi = None, edges[0]
        elif bucket + 1 < len(edges):
            lo, hi = edges[bucket], edges[bucket + 1]
        else:
            lo, hi = edges[bucket], None
        rows.append(
            LossBinRow(
                n=n,
                condition=cond,
                freq_lo=lo,
                freq_hi=hi,
                mean_loss=math.fsum(vals) / len(vals),
                count=len(vals),
            )
        )
    return rows


def _profile_count(ann: MatchAnnotations, i: int, n: int) -> int:
    if ann.suffix_profiles is None:
        raise ValueError(
            "frequency binning below L(i) needs annotations built with suffix profiles"
        )
    for lo, hi, cnt in ann.suffix_profiles[i]:
        if lo <= n <= hi:
            return cnt
    raise ValueError(f"position {i}: no profile interval covers length {n}")


# -- wire formats -----------------------------------------------------------


def write_curve_csv(fh: IO[str], curve: NoveltyCurve) -> None:
    w = csv.writer(fh)
    w.writerow(["n", "novel", "total", "ratio"])
    for n, novel, total, ratio in zip(curve.n, curve.novel, curve.total, curve.ratio):
        # ratios carry 3 decimals in CSV (1/3 -> 0.333, 1 -> 1.0); JSON keeps full floats
        w.writerow([int(n), int(novel), int(total), repr(round(float(ratio), 3))])


def curve_to_json(curve: NoveltyCurve) -> str:
    rows = [
        {"n": int(n), "novel": int(v), "total": int(t), "ratio": float(r)}
        for n, v, t, r in zip(curve.n, curve.novel, curve.total, curve.ratio)
    ]
    out: dict = {"curve": rows}
    if curve.per_doc is not None:
        out["per_doc"] = [
            {"id": did, "novel": nv.tolist(), "total": tt.tolist()}
            for did, nv, tt in curve.per_doc
        ]
    return json.dumps(out, separators=(",", ":"))


def write_bins_csv(fh: IO[str], rows: Iterable[LossBinRow]) -> None:
    w = csv.writer(fh)
    w.writerow(["n", "condition", "freq_lo", "freq_hi", "mean_loss", "count"])
    for r in rows:
        w.writerow(
            [
                r.n,
                r.condition,
                "" if r.freq_lo is None else r.freq_lo,
                "" if r.freq_hi is None else r.freq_hi,
                format(r.mean_loss, ".6g"),
                r.count,
            ]
        )


def bins_to_json(rows: Iterable[LossBinRow], metric: str = "loss") -> str:
    return json.dumps(
        {
            "metric": metric,
            "bins": [
                {
                    "n": r.n,
                    "condition": r.condition,
                    "freq_lo": r.freq_lo,
                    "freq_hi": r.freq_hi,
                    "mean_loss": r.mean_loss,
                    "count": r.count,
                }
                for r in rows
            ],
        },
        separators=(",", ":"),
    )


def stats_to_json(stats: NnslStats) -> str:
    return json.dumps(
        {
            "mean": stats.mean,
            "max": stats.max,
            "median": stats.median,
            "per_doc": [
                {"id": did, "mean": m, "max": mx, "median": md}
                for did, m, mx, md in stats.per_doc
            ],
        },
        separators=(",", ":"),
    )


def write_bound_csv(fh: IO[str], n_values: Sequence[int], bounds: np.ndarray) -> None:
    w = csv.writer(fh)
    w.writerow(["n", "bound"])
    for n, b in zip(n_values, bounds):
        w.writerow([int(n), format(float(b), ".6g")])


def read_losses(fh: IO[str]) -> tuple[dict[str, list[float]], str]:
    """Read a JSONL loss file: {"id": ..., "losses": [floats]} per line.

    A leading record without "id" may carry {"metric": name} describing what
    the per-token floats are; the name is echoed into JSON outputs.  Returns
    (losses keyed by id, metric name).
    """
    losses: dict[str, list[float]] = {}
    metric = "loss"
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"loss file line {lineno}: {exc}") from None
        if "id" not in rec:
            if lineno == 1 and "metric" in rec:
                metric = str(rec["metric"])
                continue
            raise ValueError(f"loss file line {lineno}: record has no id")
        vals = rec.get("losses")
        if not isinstance(vals, list):
            raise ValueError(f"loss file line {lineno}: losses must be a list")
        losses[str(rec["id"])] = [float(v) for v in vals]
    return losses, metric
