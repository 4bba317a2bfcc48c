from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from simsearch.codec import CodecConfig, EmbeddingVector, binarize, hamming
from simsearch.errors import NotFoundError
from simsearch.index import SearchParams
from simsearch.query import Query, batch_query, run_query
from simsearch.store import IngestRecord, RollingStore, StoreConfig
from simsearch.textfilter import TextPredicate

NOW = datetime(2026, 8, 24, tzinfo=timezone.utc)
DIM = 24


@pytest.fixture(scope="module")
def store():
    cfg = StoreConfig(
        codec=CodecConfig(dim=DIM, code_bits=64, subcode_count=8, projection_seed=3),
    )
    s = RollingStore(cfg)
    rng = np.random.default_rng(7)
    for i in range(1000):
        word = "lamp" if i % 7 == 0 else "shirt"
        s.ingest(
            IngestRecord(
                item_id=f"i{i:04d}",
                product_id=f"p{i % 50}",
                title=f"nice {word} number {i}",
                embedding=EmbeddingVector(rng.normal(size=DIM)),
                timestamp=NOW - timedelta(days=int(rng.integers(0, 30))),
            ),
            NOW,
        )
    return s


def oracle_page(store, code, r, k, allow=None, tau=None):
    scored = []
    for item_id in store.ids():
        if allow is not None and item_id not in allow:
            continue
        d = hamming(store.code_of(item_id), code)
        if d <= r and (tau is None or d <= tau):
            scored.append((d, item_id))
    scored.sort()
    return scored[:k]


class TestRunQuery:
    def test_self_retrieval_tau_zero(self, store):
        q = Query(params=SearchParams(k=10, radius=2), item_ref="i0005", threshold=0)
        page = run_query(store, q)
        code = store.code_of("i0005")
        expected = sorted(i for i in store.ids() if store.code_of(i) == code)[:10]
        assert page.ids() == expected
        assert "i0005" in page.ids()

    def test_predicate_matching_nothing(self, store):
        q = Query(
            params=SearchParams(k=10, radius=3),
            item_ref="i0005",
            predicate=TextPredicate.of(["zebra"]),
        )
        page = run_query(store, q)
        assert page.hits == []
        assert page.timings.prefilter_ms >= 0.0

    def test_matches_exhaustive_oracle(self, store):
        rng = np.random.default_rng(8)
        for _ in range(20):
            emb = EmbeddingVector(rng.normal(size=DIM))
            q = Query(params=SearchParams(k=10, radius=6), embedding=emb)
            page = run_query(store, q)
            code = binarize(store.plan, emb)
            got = [(h.hamming_distance, h.item_id) for h in page.hits if h.hamming_distance <= 6]
            assert got == oracle_page(store, code, 6, 10)

    def test_unknown_item_ref(self, store):
        with pytest.raises(NotFoundError):
            run_query(store, Query(params=SearchParams(k=5), item_ref="nope"))

    def test_filter_then_search_equivalence(self, store):
        from simsearch.textfilter import prefilter

        pred = TextPredicate.of(["lamp"])
        rng = np.random.default_rng(9)
        big_k = len(store)
        for _ in range(5):
            emb = EmbeddingVector(rng.normal(size=DIM))
            with_pred = run_query(
                store, Query(params=SearchParams(k=big_k, radius=5), embedding=emb, predicate=pred)
            )
            without = run_query(store, Query(params=SearchParams(k=big_k, radius=5), embedding=emb))
            allowed = prefilter(pred, store.titles())
            expect = [(h.hamming_distance, h.item_id) for h in without.hits if h.item_id in allowed]
            got = [(h.hamming_distance, h.item_id) for h in with_pred.hits]
            assert got == expect

    def test_threshold_monotone(self, store):
        rng = np.random.default_rng(10)
        emb = EmbeddingVector(rng.normal(size=DIM))
        big_k = len(store)
        prev = set()
        for tau in (0, 4, 8, 16, 32):
            page = run_query(
                store,
                Query(params=SearchParams(k=big_k, radius=7), embedding=emb, threshold=tau),
            )
            cur = set(page.ids())
            assert prev <= cur
            prev = cur

    def test_metadata_attached(self, store):
        page = run_query(store, Query(params=SearchParams(k=3, radius=1), item_ref="i0007"))
        top = page.hits[0]
        assert top.title.startswith("nice")
        assert top.product_id != ""


class TestBatchQuery:
    def test_batch_of_one_equals_run(self, store):
        q = Query(params=SearchParams(k=5, radius=3), item_ref="i0001")
        single = run_query(store, q)
        batch = batch_query(store, [q])
        assert batch.pages[0].ids() == single.ids()

    def test_failing_slot_isolated(self, store):
        good = Query(params=SearchParams(k=5, radius=3), item_ref="i0001")
        bad = Query(params=SearchParams(k=5, radius=3), item_ref="missing")
        out = batch_query(store, [good, bad, good])
        assert out.errors[0] is None and out.errors[2] is None
        assert out.pages[1] is None and "NotFoundError" in out.errors[1]
        assert out.pages[0].ids() == out.pages[2].ids()

    def test_latency_envelope(self, store):
        rng = np.random.default_rng(11)
        queries = [
            Query(params=SearchParams(k=5, radius=3), embedding=EmbeddingVector(rng.normal(size=DIM)))
            for _ in range(100)
        ]
        out = batch_query(store, queries)
        assert out.min_ms <= out.mean_ms <= out.max_ms
        assert abs(out.total_ms - sum(out.wall_ms)) < 1e-9
