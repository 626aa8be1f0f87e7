"""Novelty curves, match-length stats, the theoretical bound, and loss bins."""

import io
import json
import math
import random

import numpy as np
import pytest

from cdawgkit import (
    DEFAULT_BIN_EDGES,
    IN_TRAIN,
    NOT_IN_TRAIN,
    Corpus,
    LowerBoundParams,
    build_cdawg,
    completion_loss_bins,
    length_histogram,
    lower_bound_curve,
    nnsl_query,
    nnsl_stats,
    novelty_curve,
    oracle_novelty,
    populate_counts,
    smallest_n_above,
)
from cdawgkit.novelty import (
    bins_to_json,
    curve_to_json,
    read_losses,
    stats_to_json,
    write_bins_csv,
    write_bound_csv,
    write_curve_csv,
)

from conftest import make_corpus, random_corpus, random_query, tok


@pytest.fixture()
def worked_annotation(worked_cdawg):
    return nnsl_query(worked_cdawg, tok("lloyd"), doc_id="q0")


class TestNoveltyCurve:
    def test_worked_example_fractions(self, worked_annotation):
        curve = novelty_curve([worked_annotation])
        assert curve.n.tolist() == [1, 2, 3, 4, 5]
        assert curve.novel.tolist() == [1, 2, 2, 2, 1]
        assert curve.total.tolist() == [5, 4, 3, 2, 1]
        assert curve.ratio.tolist() == [1 / 5, 2 / 4, 2 / 3, 2 / 2, 1 / 1]

    def test_matches_direct_ngram_scan(self):
        rng = random.Random(17)
        for _ in range(50):
            c = random_corpus(rng, max_tokens=300)
            cd = populate_counts(build_cdawg(c))
            q = random_query(rng, c, rng.choice(("random", "substring", "mutated")))
            ann = nnsl_query(cd, q, warn_on_separator=False)
            curve = novelty_curve([ann])
            for n, novel, total in zip(
                curve.n.tolist(), curve.novel.tolist(), curve.total.tolist()
            ):
                assert (novel, total) == oracle_novelty(c, q, n), (q, n)

    def test_single_document_ratio_is_monotone(self):
        rng = random.Random(18)
        for _ in range(60):
            c = random_corpus(rng, max_tokens=300)
            cd = populate_counts(build_cdawg(c))
            q = random_query(rng, c, "mutated")
            curve = novelty_curve([nnsl_query(cd, q, warn_on_separator=False)])
            r = curve.ratio
            assert np.all(np.diff(r) >= -1e-15)

    def test_full_corpus_document_is_never_novel(self, worked_cdawg):
        ann = nnsl_query(worked_cdawg, tok("hello"))
        curve = novelty_curve([ann])
        assert curve.novel.tolist() == [0, 0, 0, 0, 0]

    def test_pooling_sums_numerators_and_denominators(self, worked_cdawg):
        a = nnsl_query(worked_cdawg, tok("lloyd"))
        b = nnsl_query(worked_cdawg, tok("он"), warn_on_separator=False)  # 2 unknown ids
        curve = novelty_curve([a, b])
        # at n=1: lloyd gives 1/5, the unknown pair gives 2/2
        assert curve.novel[0] == 3
        assert curve.total[0] == 7

    def test_short_documents_clamp_to_zero(self, worked_cdawg):
        ann = nnsl_query(worked_cdawg, tok("he"))
        curve = novelty_curve([ann], max_n=10)
        assert curve.n.tolist() == [1, 2]  # rows with total 0 are dropped

    def test_empty_annotation_list(self):
        curve = novelty_curve([])
        assert curve.n.size == 0

    def test_per_document_rows(self, worked_cdawg):
        a = nnsl_query(worked_cdawg, tok("lloyd"), doc_id="a")
        curve = novelty_curve([a], per_document=True)
        assert len(curve.per_doc) == 1
        did, novel, total = curve.per_doc[0]
        assert did == "a"
        assert novel.tolist()[:2] == [1, 2]
        assert total.tolist()[:2] == [5, 4]


class TestLengthHistogramAndStats:
    def test_histogram_counts(self, worked_annotation):
        h = length_histogram([worked_annotation])
        assert h.counts == {1: 2, 2: 1, 3: 1, 0: 1}
        assert h.total_positions == 5
        assert h.count(9) == 0

    def test_worked_example_stats(self, worked_annotation):
        st = nnsl_stats([worked_annotation])
        assert st.mean == pytest.approx(1.4)
        assert st.max == 3
        assert st.median == 1.0

    def test_pooled_over_documents(self, worked_cdawg):
        a = nnsl_query(worked_cdawg, tok("lloyd"))
        b = nnsl_query(worked_cdawg, tok("hello"))
        st = nnsl_stats([a, b])
        assert st.max == 5
        assert st.mean == pytest.approx((1 + 2 + 3 + 0 + 1 + 1 + 2 + 3 + 4 + 5) / 10)
        assert len(st.per_doc) == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            nnsl_stats([])


class TestLowerBound:
    PARAMS = LowerBoundParams(corpus_size=3.34e11, p=0.9, entropy_bits=1.8)

    def test_reference_threshold(self):
        assert smallest_n_above(self.PARAMS, 0.99) == 24

    def test_curve_monotone_and_clamped(self):
        ns = range(1, 200)
        vals = lower_bound_curve(self.PARAMS, ns)
        assert np.all(vals >= 0.0)
        assert np.all(vals <= 1.0)
        assert np.all(np.diff(vals) >= 0)

    def test_closed_form_at_one_point(self):
        # bound(n) = 1 - |C| * exp(n * (ln p - H*ln 2)), clamped at 0
        n = 30
        rate = math.log(0.9) - 1.8 * math.log(2)
        expect = max(0.0, 1.0 - 3.34e11 * math.exp(n * rate))
        got = lower_bound_curve(self.PARAMS, [n])[0]
        assert got == pytest.approx(expect, rel=1e-12)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            LowerBoundParams(corpus_size=0, p=0.9, entropy_bits=1.8)
        with pytest.raises(ValueError):
            LowerBoundParams(corpus_size=1e6, p=1.5, entropy_bits=1.8)
        with pytest.raises(ValueError):
            LowerBoundParams(corpus_size=1e6, p=0.9, entropy_bits=-1)

    def test_unreachable_threshold(self):
        weak = LowerBoundParams(corpus_size=1e30, p=0.999999, entropy_bits=1e-9)
        assert smallest_n_above(weak, 0.99, n_max=50) is None


class TestCompletionLossBins:
    """Per-token loss aggregation keyed by match length and frequency."""

    def bins(self, worked_cdawg, **kw):
        ann = nnsl_query(worked_cdawg, tok("lloyd"), doc_id="q0", with_suffix_profiles=True)
        losses = [[0.1, 0.2, 0.3, 0.4, 0.5]]
        return completion_loss_bins([ann], losses, **kw)

    def test_hand_example_multi_n(self, worked_cdawg):
        rows = self.bins(worked_cdawg, max_n=3)
        table = {(r.n, r.condition): r for r in rows}
        # L = 1 2 3 0 1 at positions 0..4; only positions >= 1 participate
        r = table[(1, IN_TRAIN)]
        assert r.count == 3 and r.mean_loss == pytest.approx((0.2 + 0.3 + 0.5) / 3)
        assert (r.freq_lo, r.freq_hi) == (1, 10)
        r = table[(3, IN_TRAIN)]
        assert r.count == 1 and r.mean_loss == pytest.approx(0.3)
        r = table[(3, NOT_IN_TRAIN)]
        assert r.count == 1 and r.mean_loss == pytest.approx(0.4)
        assert (r.freq_lo, r.freq_hi) == (None, None)
        r = table[(2, IN_TRAIN)]
        assert r.count == 2 and r.mean_loss == pytest.approx(0.25)

    def test_exactly_one_assignment(self, worked_cdawg):
        rows = self.bins(worked_cdawg, max_n=3, multi_n=False)
        table = {(r.n, r.condition): r for r in rows}
        assert table[(1, IN_TRAIN)].count == 1  # only position 4 (L=1)
        assert table[(2, IN_TRAIN)].count == 1  # position 1
        assert table[(3, IN_TRAIN)].count == 1  # position 2
        # position 3 would go to n = L(2)+1 = 4, beyond max_n
        assert (1, NOT_IN_TRAIN) not in table
        assert (3, NOT_IN_TRAIN) not in table

    def test_frequency_buckets_split_rows(self):
        # one document: "ab" 30 times then "ac": position of b has count 30,
        # far from the count-1 positions, so n=1 rows split by bucket
        docs = [[1, 2] for _ in range(30)] + [[1, 3]]
        c = Corpus.from_documents(docs, separator=0, vocab_size=4)
        cd = populate_counts(build_cdawg(c))
        q = [1, 2, 1, 3]
        ann = nnsl_query(cd, q, doc_id="d", with_suffix_profiles=True)
        losses = [[1.0, 2.0, 4.0, 8.0]]
        rows = completion_loss_bins([ann], losses, max_n=1)
        in_rows = [r for r in rows if r.condition == IN_TRAIN]
        assert len(in_rows) == 2
        by_bucket = {(r.freq_lo, r.freq_hi): r for r in in_rows}
        assert by_bucket[(10, 100)].count >= 1  # the count-30 token
        assert by_bucket[(1, 10)].count >= 1

    def test_length_mismatch_rejected(self, worked_cdawg):
        ann = nnsl_query(worked_cdawg, tok("lloyd"), with_suffix_profiles=True)
        with pytest.raises(ValueError):
            completion_loss_bins([ann], [[0.1, 0.2]], max_n=2)

    def test_profiles_required_for_sub_length_buckets(self, worked_cdawg):
        ann = nnsl_query(worked_cdawg, tok("lloyd"))
        with pytest.raises(ValueError):
            completion_loss_bins([ann], [[0.1, 0.2, 0.3, 0.4, 0.5]], max_n=3)

    def test_mean_is_order_insensitive(self, worked_cdawg):
        ann1 = nnsl_query(worked_cdawg, tok("lloyd"), doc_id="a", with_suffix_profiles=True)
        ann2 = nnsl_query(worked_cdawg, tok("dlloy"), doc_id="b", with_suffix_profiles=True)
        la, lb = [0.1, 0.2, 0.3, 0.4, 0.5], [0.9, 0.8, 0.7, 0.6, 0.5]
        fwd = completion_loss_bins([ann1, ann2], [la, lb], max_n=2)
        rev = completion_loss_bins([ann2, ann1], [lb, la], max_n=2)
        key = lambda r: (r.n, r.condition, r.freq_lo or 0)
        for a, b in zip(sorted(fwd, key=key), sorted(rev, key=key)):
            assert a == b


class TestWireFormats:
    def test_curve_csv_rounding(self, worked_annotation):
        buf = io.StringIO()
        write_curve_csv(buf, novelty_curve([worked_annotation]))
        assert buf.getvalue().splitlines() == [
            "n,novel,total,ratio",
            "1,1,5,0.2",
            "2,2,4,0.5",
            "3,2,3,0.667",
            "4,2,2,1.0",
            "5,1,1,1.0",
        ]

    def test_curve_json(self, worked_annotation):
        data = json.loads(curve_to_json(novelty_curve([worked_annotation])))
        assert data["curve"][2] == {"n": 3, "novel": 2, "total": 3, "ratio": 2 / 3}

    def test_stats_json(self, worked_annotation):
        data = json.loads(stats_to_json(nnsl_stats([worked_annotation])))
        assert data["mean"] == 1.4
        assert data["max"] == 3

    def test_bins_csv_blank_bucket_for_not_in_train(self, worked_cdawg):
        ann = nnsl_query(worked_cdawg, tok("lloyd"), doc_id="q0", with_suffix_profiles=True)
        rows = completion_loss_bins([ann], [[0.1, 0.2, 0.3, 0.4, 0.5]], max_n=1)
        buf = io.StringIO()
        write_bins_csv(buf, rows)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "n,condition,freq_lo,freq_hi,mean_loss,count"
        assert any(line.startswith("1,not_in_train,,,") for line in lines)

    def test_bins_json_carries_metric(self, worked_cdawg):
        ann = nnsl_query(worked_cdawg, tok("lloyd"), doc_id="q0", with_suffix_profiles=True)
        rows = completion_loss_bins([ann], [[0.1, 0.2, 0.3, 0.4, 0.5]], max_n=1)
        data = json.loads(bins_to_json(rows, metric="nll"))
        assert data["metric"] == "nll"
        assert all(set(b) >= {"n", "condition", "mean_loss", "count"} for b in data["bins"])

    def test_bound_csv(self):
        buf = io.StringIO()
        write_bound_csv(buf, [1, 2], np.array([0.0, 0.5]))
        assert buf.getvalue().splitlines() == ["n,bound", "1,0", "2,0.5"]

    def test_read_losses_with_metric_line(self):
        raw = '{"metric": "nll"}\n{"id": "a", "losses": [1.0, 2.0]}\n'
        losses, metric = read_losses(io.StringIO(raw))
        assert metric == "nll"
        assert losses == {"a": [1.0, 2.0]}

    def test_read_losses_validation(self):
        with pytest.raises(ValueError):
            read_losses(io.StringIO('{"losses": [1.0]}\n'))
        with pytest.raises(ValueError):
            read_losses(io.StringIO('{"id": "a", "losses": "oops"}\n'))
        with pytest.raises(ValueError):
            read_losses(io.StringIO("{bad\n"))
