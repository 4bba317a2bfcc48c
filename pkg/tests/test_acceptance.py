"""Acceptance suite: one test per top-level product guarantee.

Each test prints a single [PASS]/[FAIL] line (run with `pytest -s` to see them
live).  Oracles are computed independently of the library code under test:
Hamming distances via bin().count, rankings via brute force, metrics via
direct counting.
"""

import json
import random
import time
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from simsearch.codec import BinaryCode, CodecConfig, EmbeddingVector, binarize, plan_for
from simsearch.errors import OutOfWindowError
from simsearch.evaluation import average_precision_at_k, r_precision, recall_at, run_benchmark
from simsearch.index import SearchParams, SubcodeIndex
from simsearch.query import Query, batch_query, run_query
from simsearch.rules import Combine, evaluate_rule, make_rule, simulate, sweep
from simsearch.store import IngestRecord, RollingStore, StoreConfig
from simsearch.synthetic import CorpusSpec, SyntheticCorpus, build_store, make_synthetic_corpus
from simsearch.textfilter import TextPredicate
from simsearch.variants import SoSParams, generate, recall_of


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def popcount(x: int) -> int:
    return bin(x).count("1")


# -- shared large synthetic corpus (5,000 clusters x 20 items, D = 64) --------

BIG_DIM = 64
BIG_N = 100_000


@pytest.fixture(scope="module")
def big_corpus():
    spec = CorpusSpec(
        cluster_count=5000, cluster_size=20, dim=BIG_DIM, noise=0.1,
        vocab_size=200, title_len=4, seed=1001,
    )
    return make_synthetic_corpus(spec)


@pytest.fixture(scope="module")
def store_256(big_corpus):
    codec = CodecConfig(dim=BIG_DIM, code_bits=256, subcode_count=16, projection_seed=3)
    return build_store(big_corpus, codec)


@pytest.fixture(scope="module")
def store_512(big_corpus):
    codec = CodecConfig(dim=BIG_DIM, code_bits=512, subcode_count=32, projection_seed=3)
    return build_store(big_corpus, codec)


# -- 1. pigeonhole candidate completeness -------------------------------------

def test_pigeonhole_candidate_completeness():
    t0 = time.perf_counter()
    config = CodecConfig(dim=8, code_bits=64, subcode_count=8, projection_seed=0)
    misses = 0
    trials = 50
    radii = (1, 2, 3, 5)
    for trial in range(trials):
        rng = random.Random(9000 + trial)
        query = rng.getrandbits(64)
        codes = {}
        for i in range(2000):
            if i < 40:
                # plant near neighbors at controlled distances
                flips = rng.sample(range(64), rng.randint(0, 5))
                bits = query
                for f in flips:
                    bits ^= 1 << f
            else:
                bits = rng.getrandbits(64)
            codes[f"i{i:05d}"] = bits
        index = SubcodeIndex(config)
        for item_id, bits in codes.items():
            index.insert(item_id, BinaryCode(bits=bits, length=64))
        qcode = BinaryCode(bits=query, length=64)
        for r in radii:
            oracle = {i for i, b in codes.items() if popcount(b ^ query) <= r}
            got = set(index.candidates(qcode, r))
            misses += len(oracle - got)
    elapsed = time.perf_counter() - t0
    ok = misses == 0 and elapsed < 10.0
    report("pigeonhole completeness", ok,
           f"{misses} misses over {trials} trials, r in {radii} ({elapsed:.1f} s)")
    assert misses == 0
    assert elapsed < 10.0


# -- 2. search exactness vs exhaustive oracle ---------------------------------

def test_search_matches_exhaustive_oracle():
    t0 = time.perf_counter()
    codec = CodecConfig(dim=64, code_bits=128, subcode_count=8, projection_seed=11)
    mismatches = 0
    pages = 0
    for s in range(5):
        spec = CorpusSpec(cluster_count=100, cluster_size=10, dim=64, noise=0.02,
                          seed=500 + s)
        corpus = make_synthetic_corpus(spec)
        store = build_store(corpus, codec)
        all_codes = {i: store.code_of(i).bits for i in store.ids()}
        rng = random.Random(s)
        for q in rng.sample(sorted(all_codes), 20):
            page = run_query(store, Query(params=SearchParams(k=10, radius=6), item_ref=q))
            got = json.dumps([(h.item_id, h.hamming_distance) for h in page.hits]).encode()
            qbits = all_codes[q]
            ranked = sorted(
                ((popcount(bits ^ qbits), i) for i, bits in all_codes.items())
            )[:10]
            want = json.dumps([(i, d) for d, i in ranked]).encode()
            pages += 1
            if got != want:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30.0
    report("search exactness", ok,
           f"{mismatches}/{pages} pages differ from oracle ({elapsed:.1f} s)")
    assert mismatches == 0
    assert elapsed < 30.0


# -- 3. retrieval quality vs code length --------------------------------------

def test_quality_vs_code_length():
    t0 = time.perf_counter()
    spec = CorpusSpec(cluster_count=100, cluster_size=20, dim=512, noise=1.1,
                      seed=77)
    corpus = make_synthetic_corpus(spec)
    params = SearchParams(k=100, radius=32)  # radius >= m: exhaustive ranking
    maps = {}
    for bits in (512, 256):
        codec = CodecConfig(dim=512, code_bits=bits, subcode_count=bits // 16,
                            projection_seed=3)
        metrics, _ = run_benchmark(build_store(corpus, codec), corpus.judged, params)
        maps[bits] = metrics.map10
    ratio = maps[256] / maps[512] if maps[512] else float("inf")
    elapsed = time.perf_counter() - t0
    ok = maps[256] >= 0.90 * maps[512] and elapsed < 300
    report("quality vs code length", ok,
           f"MAP@10 B=256 {maps[256]:.4f} vs B=512 {maps[512]:.4f}, "
           f"ratio {ratio:.3f} (>= 0.90 required) ({elapsed:.0f} s)")
    assert maps[256] >= 0.90 * maps[512]
    assert elapsed < 300


# -- 4. query latency vs code length ------------------------------------------

def test_latency_vs_code_length(big_corpus, store_256, store_512):
    t0 = time.perf_counter()
    rng = random.Random(4)
    ids = [big_corpus.records[i].item_id for i in rng.sample(range(BIG_N), 200)]
    queries = [Query(params=SearchParams(k=10, radius=3), item_ref=i) for i in ids]
    for store in (store_256, store_512):
        batch_query(store, queries)  # warm-up
    # interleaved repetitions; best mean per config damps cache noise
    reps: dict[int, list[float]] = {256: [], 512: []}
    for _ in range(3):
        for bits, store in ((256, store_256), (512, store_512)):
            reps[bits].append(batch_query(store, queries).mean_ms)
    means = {bits: min(vals) for bits, vals in reps.items()}
    ratio = means[256] / means[512]
    elapsed = time.perf_counter() - t0
    ok = means[256] < means[512] and elapsed < 600
    report("latency vs code length", ok,
           f"mean over 200 queries at 100k items: B=256 {means[256]:.3f} ms, "
           f"B=512 {means[512]:.3f} ms, ratio {ratio:.2f} ({elapsed:.0f} s)")
    assert means[256] < means[512]
    assert elapsed < 600


# -- 5. text prefilter speedup ------------------------------------------------

def test_text_prefilter_speedup(big_corpus, store_256):
    t0 = time.perf_counter()
    codec = store_256.config.codec
    sizes = [25_000, 50_000, 100_000]
    stores = {}
    for n in sizes[:-1]:
        sub = SyntheticCorpus(spec=big_corpus.spec, records=big_corpus.records[:n],
                              judged=[], groups=[])
        stores[n] = build_store(sub, codec)
    stores[BIG_N] = store_256

    # "white" tags members 4 and 12 of every 20-item cluster: 10% selectivity
    pred = TextPredicate.from_json({"any_of": [{"all_of": ["white"]}]})
    m = codec.subcode_count
    rng = random.Random(5)
    ids = [big_corpus.records[i].item_id for i in rng.sample(range(20_000), 20)]

    gaps = []
    with_ms = without_ms = 0.0
    for n in sizes:
        store = stores[n]
        plain = [Query(params=SearchParams(k=50, radius=m), item_ref=i) for i in ids]
        filtered = [Query(params=SearchParams(k=50, radius=m), item_ref=i, predicate=pred)
                    for i in ids]
        without_ms = batch_query(store, plain).mean_ms
        with_ms = batch_query(store, filtered).mean_ms
        gaps.append(without_ms - with_ms)
    elapsed = time.perf_counter() - t0
    strict_at_largest = with_ms < without_ms
    non_decreasing = all(b >= a for a, b in zip(gaps, gaps[1:]))
    ok = strict_at_largest and non_decreasing and elapsed < 600
    report("text prefilter speedup", ok,
           f"at 100k: {with_ms:.1f} ms filtered vs {without_ms:.1f} ms unfiltered; "
           f"gaps over 25k/50k/100k: {[f'{g:.1f}' for g in gaps]} ms ({elapsed:.0f} s)")
    assert strict_at_largest
    assert non_decreasing
    assert elapsed < 600


# -- 6. rolling window --------------------------------------------------------

def test_rolling_window():
    t0 = time.perf_counter()
    codec = CodecConfig(dim=8, code_bits=64, subcode_count=8, projection_seed=0)
    config = StoreConfig(codec=codec, window_days=90, bucket_days=7)
    store = RollingStore(config)
    now = datetime(2026, 6, 1, tzinfo=timezone.utc)
    rng = np.random.default_rng(6)

    def rec(i, age_days):
        return IngestRecord(
            item_id=f"r{i:04d}", product_id=f"p{i:04d}", title=f"item {i}",
            embedding=EmbeddingVector(rng.normal(size=8)),
            timestamp=now - timedelta(days=age_days),
        )

    rejected = 0
    for i in range(300):
        age = rng.uniform(0, 89)
        store.ingest(rec(i, age), now)
    for i in range(300, 320):
        with pytest.raises(OutOfWindowError):
            store.ingest(rec(i, 91 + rng.uniform(0, 100)), now)
        rejected += 1

    violations = 0
    for step in range(0, 120, 10):
        later = now + timedelta(days=step)
        store.expire(later)
        cutoff = later - config.window - config.granularity
        page = run_query(
            store,
            Query(params=SearchParams(k=1000, radius=codec.subcode_count),
                  embedding=EmbeddingVector(rng.normal(size=8))),
        )
        for h in page.hits:
            if store.meta_of(h.item_id).timestamp < cutoff:
                violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and rejected == 20 and elapsed < 5.0
    report("rolling window", ok,
           f"{violations} stale results, {rejected}/20 stale ingests rejected "
           f"({elapsed:.1f} s)")
    assert violations == 0
    assert rejected == 20
    assert elapsed < 5.0


# -- 7. metric correctness ----------------------------------------------------

def test_metric_oracles():
    t0 = time.perf_counter()

    def oracle_rp(ranked, rel):
        r = len(rel)
        return sum(1 for i in ranked[:r] if i in rel) / r

    def oracle_ap(ranked, rel, k):
        hits = 0
        total = 0.0
        for rank, i in enumerate(ranked[:k], 1):
            if i in rel:
                hits += 1
                total += hits / rank
        return total / min(len(rel), k)

    def oracle_recall(ranked, rel, cutoff):
        return sum(1 for i in ranked[:cutoff] if i in rel) / len(rel)

    rng = random.Random(7)
    worst = 0.0
    for _ in range(1000):
        universe = [f"d{i}" for i in range(rng.randint(5, 60))]
        ranked = rng.sample(universe, rng.randint(1, len(universe)))
        rel = set(rng.sample(universe, rng.randint(1, len(universe))))
        k = rng.randint(1, 20)
        cutoff = rng.randint(1, 50)
        worst = max(
            worst,
            abs(r_precision(ranked, rel) - oracle_rp(ranked, rel)),
            abs(average_precision_at_k(ranked, rel, k) - oracle_ap(ranked, rel, k)),
            abs(recall_at(ranked, rel, cutoff) - oracle_recall(ranked, rel, cutoff)),
        )

    # worked examples: 3 of top 4 relevant; relevant at ranks 1 and 3 of 3
    ex_rp = r_precision(["a", "b", "c", "d"], {"a", "b", "d", "z"})
    ex_ap = average_precision_at_k(["a", "x", "b"], {"a", "b"}, 3)
    examples_ok = ex_rp == 0.75 and abs(ex_ap - 5 / 6) < 1e-12
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and examples_ok and elapsed < 5.0
    report("metric correctness", ok,
           f"max |delta| {worst:.2e} over 1000 instances; worked examples "
           f"{ex_rp} and {ex_ap:.6f} ({elapsed:.1f} s)")
    assert worst <= 1e-12
    assert examples_ok
    assert elapsed < 5.0


# -- 8. variant candidate expansion -------------------------------------------

def test_variant_expansion_recall():
    t0 = time.perf_counter()
    spec = CorpusSpec(
        cluster_count=300, cluster_size=10, dim=32, noise=0.3,
        variant_group_count=500, variant_group_size=4, variant_noise=0.02,
        paraphrase_rate=0.5, seed=88,
    )
    corpus = make_synthetic_corpus(spec)
    codec = CodecConfig(dim=32, code_bits=64, subcode_count=8, projection_seed=2)
    store = build_store(corpus, codec)
    assert len(store) == 5000

    from simsearch.textfilter import TextIndex

    tindex = TextIndex(store.titles())
    pointwise_violations = 0
    text_recalls, union_recalls, union_counts = [], [], []
    for g in corpus.groups:
        q = g.member_ids[0]
        text200 = generate(store, q, SoSParams(n_text=200, k_image=0, radius=3),
                           text_index=tindex)
        union = generate(store, q, SoSParams(n_text=100, k_image=2, radius=3),
                         text_index=tindex)
        text100 = {i for i, s in union.entries.items() if "text" in s}
        r_text200 = recall_of(text200.ids(), g.member_ids, q)
        r_union = recall_of(union.ids(), g.member_ids, q)
        if r_union < recall_of(text100, g.member_ids, q):
            pointwise_violations += 1
        text_recalls.append(r_text200)
        union_recalls.append(r_union)
        union_counts.append(len(union.entries))

    mean_text = float(np.mean(text_recalls))
    mean_union = float(np.mean(union_recalls))
    mean_count = float(np.mean(union_counts))
    lift = (mean_union - mean_text) / mean_text if mean_text else float("inf")
    elapsed = time.perf_counter() - t0
    ok = (pointwise_violations == 0 and mean_union > mean_text
          and mean_count < 300 and elapsed < 300)
    report("variant expansion recall", ok,
           f"(N=100,k=2) {mean_union:.3f} vs (N=200,k=0) {mean_text:.3f} "
           f"(lift {lift:+.1%}), mean candidates {mean_count:.0f} < 300, "
           f"{pointwise_violations} pointwise violations ({elapsed:.0f} s)")
    assert pointwise_violations == 0
    assert mean_union > mean_text
    assert mean_count < 3 * 100
    assert elapsed < 300


# -- 9. rule engine consistency -----------------------------------------------

def test_rule_engine_consistency():
    t0 = time.perf_counter()
    spec = CorpusSpec(cluster_count=1000, cluster_size=10, dim=32, noise=0.3,
                      vocab_size=200, seed=99)
    corpus = make_synthetic_corpus(spec)
    codec = CodecConfig(dim=32, code_bits=64, subcode_count=8, projection_seed=4)
    store = build_store(corpus, codec)
    records = list(store.iter_records())
    plan = store.plan

    rng = random.Random(12)
    disagreements = 0
    for t in range(20):
        seed_items = rng.sample(records, rng.randint(1, 3))
        seeds = [r.embedding.values + 0.05 * np.random.default_rng(t).normal(size=32)
                 for r in seed_items]
        predicate = None
        if rng.random() < 0.5:
            token = f"w{rng.randrange(200):04d}"
            predicate = TextPredicate.from_json({"any_of": [{"all_of": [token]}]})
        combine = rng.choice([Combine.AND, Combine.IMAGE_ONLY, Combine.TEXT_ONLY])
        if combine is Combine.TEXT_ONLY and predicate is None:
            combine = Combine.IMAGE_ONLY
        if rng.random() < 0.7:
            rule = make_rule(plan, f"t{t}", seeds, tau=rng.randint(2, 6),
                             predicate=predicate, combine=combine)
        else:
            rule = make_rule(plan, f"t{t}", seeds, sigma=rng.uniform(0.80, 0.95),
                             predicate=predicate, combine=combine)
        expected = {r.item_id for r in records if evaluate_rule(rule, r, plan).matched}
        got = simulate(rule, store, limit=5).hit_ids
        if expected != got:
            disagreements += 1

    # planted sweep: near-seed records with the required token must be the
    # exact flagged set
    prng = np.random.default_rng(13)
    seed_vec = prng.normal(size=32)
    pred = TextPredicate.from_json({"any_of": [{"all_of": ["special"]}]})
    rule = make_rule(plan, "planted", [seed_vec], tau=8, predicate=pred,
                     combine=Combine.AND).finalize()
    now = datetime(2026, 1, 1, tzinfo=timezone.utc)

    def planted_rec(i, vec, title):
        return IngestRecord(item_id=f"x{i:03d}", product_id="px", title=title,
                            embedding=EmbeddingVector(vec),
                            timestamp=now - timedelta(days=1))

    stream, expected_flags = [], set()
    for i in range(60):
        if i < 5:
            vec, title = seed_vec + 0.01 * prng.normal(size=32), "the special one"
            expected_flags.add(f"x{i:03d}")
        elif i < 10:
            vec, title = seed_vec + 0.01 * prng.normal(size=32), "plain title"
        elif i < 15:
            vec, title = prng.normal(size=32), "another special thing"
        else:
            vec, title = prng.normal(size=32), "plain title"
        stream.append(planted_rec(i, vec, title))
    flagged = {f.item_id for f in sweep([rule], stream, plan).flagged}
    planted_ok = flagged == expected_flags

    elapsed = time.perf_counter() - t0
    ok = disagreements == 0 and planted_ok and elapsed < 120
    report("rule engine consistency", ok,
           f"{disagreements}/20 rules disagree on 10k records; planted sweep "
           f"{'exact' if planted_ok else 'WRONG'} ({elapsed:.0f} s)")
    assert disagreements == 0
    assert planted_ok
    assert elapsed < 120


# -- 10. persistence round trip -----------------------------------------------

def test_persistence_round_trip(tmp_path):
    codec = CodecConfig(dim=16, code_bits=64, subcode_count=8, projection_seed=6)
    store = RollingStore(StoreConfig(codec=codec, window_days=90, bucket_days=7))
    now = datetime(2026, 3, 1, tzinfo=timezone.utc)
    rng = np.random.default_rng(14)
    for i in range(300):
        store.ingest(
            IngestRecord(
                item_id=f"p{i:04d}", product_id=f"g{i % 40:02d}",
                title=f"product number {i} {'alpha' if i % 3 else 'beta'}",
                embedding=EmbeddingVector(rng.normal(size=16)),
                timestamp=now - timedelta(days=int(rng.choice([1, 10, 20]))),
            ),
            now,
        )
    assert len(store.segments()) == 3
    store.persist(tmp_path / "st")
    loaded = RollingStore.load(tmp_path / "st")

    probe_ids = [f"p{i:04d}" for i in range(0, 300, 15)]
    mismatches = 0
    for pid in probe_ids:
        q = Query(params=SearchParams(k=20, radius=4, rerank_depth=5), item_ref=pid)
        a = run_query(store, q).to_json()["hits"]
        b = run_query(loaded, q).to_json()["hits"]
        # vector files hold float32, so reloaded cosine scores carry rounding;
        # ordering and every discrete field must survive exactly
        same = len(a) == len(b)
        for x, y in zip(a, b):
            ca, cb = x.pop("cosine_score"), y.pop("cosine_score")
            if x != y or (ca is None) != (cb is None):
                same = False
            elif ca is not None and abs(ca - cb) > 1e-6:
                same = False
        if not same:
            mismatches += 1
    ok = mismatches == 0
    report("persistence round trip", ok,
           f"{mismatches}/{len(probe_ids)} probe queries differ after reload")
    assert mismatches == 0
