"""Walkthrough: binarize embeddings, index them, and run nearest-neighbor queries.

Builds a small clustered corpus, indexes it under two code lengths, and shows
how subcode candidate generation finds planted neighbors, how the Hamming
ranking compares to full-precision cosine, and what the text prefilter does to
a query.

Run:  python3 demos/demo_search.py
"""

import numpy as np

from simsearch.codec import CodecConfig, binarize, cosine, hamming
from simsearch.index import SearchParams
from simsearch.query import Query, run_query
from simsearch.synthetic import CorpusSpec, build_store, make_synthetic_corpus
from simsearch.textfilter import TextPredicate


def main():
    spec = CorpusSpec(cluster_count=50, cluster_size=8, dim=64, noise=0.15, seed=42)
    corpus = make_synthetic_corpus(spec)
    codec = CodecConfig(dim=64, code_bits=256, subcode_count=16, projection_seed=7)
    store = build_store(corpus, codec)
    print(f"indexed {len(store)} items, B={codec.code_bits} bits, "
          f"m={codec.subcode_count} subcodes of {codec.subcode_bits} bits")

    query_id = corpus.records[0].item_id
    page = run_query(store, Query(params=SearchParams(k=8, radius=3), item_ref=query_id))
    print(f"\ntop hits for {query_id} (radius 3):")
    for h in page.hits:
        print(f"  {h.item_id}  d={h.hamming_distance:3d}  "
              f"matched {h.matched_subcodes}/16  {h.title}")

    # Hamming distance tracks cosine: compare the two for the first cluster
    plan = store.plan
    a = corpus.records[0].embedding
    print("\nHamming vs cosine inside the first cluster:")
    for r in corpus.records[1:5]:
        d = hamming(binarize(plan, a), binarize(plan, r.embedding))
        c = cosine(a, r.embedding)
        print(f"  {r.item_id}  hamming {d:3d}  cosine {c:+.3f}")

    # a text predicate restricts the search before candidates are generated
    pred = TextPredicate.from_json({"any_of": [{"all_of": ["red"]}]})
    page = run_query(store, Query(params=SearchParams(k=8, radius=3),
                                  item_ref=query_id, predicate=pred))
    print("\nsame query restricted to titles containing 'red':")
    for h in page.hits:
        print(f"  {h.item_id}  d={h.hamming_distance:3d}  {h.title}")


if __name__ == "__main__":
    main()
