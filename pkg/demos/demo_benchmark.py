"""Walkthrough: retrieval-quality and latency benchmarking across code lengths.

Runs the evaluation harness on a clustered synthetic corpus for two code
lengths and prints the quality table (MAP@K, R-Precision, recall) plus the
latency summary, mirroring the CSV reports the CLI `bench` command writes.

Run:  python3 demos/demo_benchmark.py
"""

from simsearch.codec import CodecConfig
from simsearch.evaluation import latency_csv, quality_csv, run_benchmark
from simsearch.index import SearchParams
from simsearch.synthetic import CorpusSpec, build_store, make_synthetic_corpus


def main():
    spec = CorpusSpec(cluster_count=100, cluster_size=20, dim=128, noise=0.6, seed=33)
    corpus = make_synthetic_corpus(spec)
    params = SearchParams(k=100, radius=3)
    print(f"{spec.cluster_count * spec.cluster_size} items, "
          f"{len(corpus.judged)} judged queries, k={params.k}, radius={params.radius}")

    rows_q, rows_l = [], []
    for bits in (256, 128):
        codec = CodecConfig(dim=128, code_bits=bits, subcode_count=bits // 16,
                            projection_seed=9)
        store = build_store(corpus, codec)
        metrics, latency = run_benchmark(store, corpus.judged, params)
        rows_q.append((f"B={bits}", metrics))
        rows_l.append((f"B={bits}", latency))
        print(f"\nB={bits}: MAP@10 {metrics.map10:.4f}, "
              f"R-Precision {metrics.mean_r_precision:.4f}, "
              f"mean latency {latency.mean_ms:.3f} ms")

    print("\nquality table:")
    print(quality_csv(rows_q))
    print("latency table:")
    print(latency_csv(rows_l))


if __name__ == "__main__":
    main()
