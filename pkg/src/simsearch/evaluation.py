"""IR metrics and the benchmark harness.

Metric conventions:
  * R-Precision = |top-R ranked ∩ relevant| / R, R = |relevant|
  * AP@K = (sum of Precision@i over relevant ranks i <= K) / min(R, K)
  * recall@cutoff = |top-cutoff ∩ relevant| / R (top-1000 approximation)
"""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .codec import EmbeddingVector
from .errors import InvalidJudgmentError
from .index import SearchParams
from .query import Query, batch_query
from .store import RollingStore


@dataclass(frozen=True)
class JudgedQuery:
    relevant: frozenset[str]
    query_id: str | None = None
    embedding: EmbeddingVector | None = None

    def __post_init__(self):
        if not self.relevant:
            raise InvalidJudgmentError("relevant set must be non-empty")
        if (self.query_id is None) == (self.embedding is None):
            raise InvalidJudgmentError("exactly one of query_id/embedding must be set")
        if self.query_id is not None and self.query_id in self.relevant:
            raise InvalidJudgmentError("relevant set must exclude the query itself")


def r_precision(ranked: Sequence[str], relevant: Iterable[str]) -> float:
    rel = set(relevant)
    if not rel:
        raise InvalidJudgmentError("relevant set must be non-empty")
    r = len(rel)
    return sum(1 for i in ranked[:r] if i in rel) / r


def average_precision_at_k(ranked: Sequence[str], relevant: Iterable[str], k: int) -> float:
    rel = set(relevant)
    if not rel:
        raise InvalidJudgmentError("relevant set must be non-empty")
    if k < 1:
        raise InvalidJudgmentError("K must be >= 1")
    hits = 0
    total = 0.0
    for i, item in enumerate(ranked[:k], 1):
        if item in rel:
            hits += 1
            total += hits / i
    return total / min(len(rel), k)


def recall_at(ranked: Sequence[str], relevant: Iterable[str], cutoff: int = 1000) -> float:
    rel = set(relevant)
    if not rel:
        raise InvalidJudgmentError("relevant set must be non-empty")
    if cutoff < 1:
        raise InvalidJudgmentError("cutoff must be >= 1")
    return sum(1 for i in ranked[:cutoff] if i in rel) / len(rel)


@dataclass
class QueryMetrics:
    query: str
    ap1: float
    ap5: float
    ap10: float
    r_precision: float
    recall1000: float


@dataclass
class MetricsReport:
    map1: float
    map5: float
    map10: float
    mean_r_precision: float
    recall1000: float
    per_query: list[QueryMetrics] = field(default_factory=list, repr=False)
    failed_queries: int = 0

    def to_json(self) -> dict:
        return {
            "map@1": self.map1,
            "map@5": self.map5,
            "map@10": self.map10,
            "mean_r_precision": self.mean_r_precision,
            "recall@1000": self.recall1000,
            "failed_queries": self.failed_queries,
        }


@dataclass
class LatencyReport:
    min_ms: float
    max_ms: float
    mean_ms: float
    total_hours: float
    query_count: int

    def to_json(self) -> dict:
        return {
            "min_ms": self.min_ms,
            "max_ms": self.max_ms,
            "mean_ms": self.mean_ms,
            "total_hours": self.total_hours,
            "query_count": self.query_count,
        }


def run_benchmark(
    store: RollingStore,
    judged: Sequence[JudgedQuery],
    params: SearchParams,
) -> tuple[MetricsReport, LatencyReport]:
    """batch_query over judged queries; per-query metric rows averaged into means."""
    queries = []
    usable: list[JudgedQuery] = []
    failed = 0
    for jq in judged:
        try:
            if jq.query_id is not None:
                if jq.query_id not in store:
                    raise KeyError(jq.query_id)
                queries.append(Query(params=params, item_ref=jq.query_id))
            else:
                queries.append(Query(params=params, embedding=jq.embedding))
            usable.append(jq)
        except KeyError:
            failed += 1
    outcome = batch_query(store, queries)
    rows: list[QueryMetrics] = []
    for jq, page, err in zip(usable, outcome.pages, outcome.errors):
        if err is not None or page is None:
            failed += 1
            continue
        ranked = [i for i in page.ids() if i != jq.query_id]
        rows.append(
            QueryMetrics(
                query=jq.query_id or "<embedding>",
                ap1=average_precision_at_k(ranked, jq.relevant, 1),
                ap5=average_precision_at_k(ranked, jq.relevant, 5),
                ap10=average_precision_at_k(ranked, jq.relevant, 10),
                r_precision=r_precision(ranked, jq.relevant),
                recall1000=recall_at(ranked, jq.relevant, 1000),
            )
        )
    def mean(vals):
        return float(np.mean(vals)) if vals else 0.0

    metrics = MetricsReport(
        map1=mean([r.ap1 for r in rows]),
        map5=mean([r.ap5 for r in rows]),
        map10=mean([r.ap10 for r in rows]),
        mean_r_precision=mean([r.r_precision for r in rows]),
        recall1000=mean([r.recall1000 for r in rows]),
        per_query=rows,
        failed_queries=failed,
    )
    latency = LatencyReport(
        min_ms=outcome.min_ms,
        max_ms=outcome.max_ms,
        mean_ms=outcome.mean_ms,
        total_hours=outcome.total_ms / 3_600_000.0,
        query_count=len(outcome.wall_ms),
    )
    return metrics, latency


def load_judgments(path) -> list[JudgedQuery]:
    """JSONL rows: {"query_id", "relevant_ids": [...]}."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                JudgedQuery(
                    query_id=str(obj["query_id"]),
                    relevant=frozenset(str(i) for i in obj["relevant_ids"]),
                )
            )
    return out


def write_judgments(path, judged: Iterable[JudgedQuery]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for jq in judged:
            f.write(
                json.dumps({"query_id": jq.query_id, "relevant_ids": sorted(jq.relevant)}) + "\n"
            )


def quality_csv(rows: list[tuple[str, MetricsReport]]) -> str:
    """Table rows (label, metrics) in the MAP@1/5/10, R-Precision, recall layout."""
    buf = _io.StringIO()
    w = csv.writer(buf)
    w.writerow(["embedding_type", "map@1", "map@5", "map@10", "mean_r_precision", "approx_recall"])
    for label, m in rows:
        w.writerow([label, f"{m.map1:.4f}", f"{m.map5:.4f}", f"{m.map10:.4f}",
                    f"{m.mean_r_precision:.4f}", f"{m.recall1000:.4f}"])
    return buf.getvalue()


def latency_csv(rows: list[tuple[str, LatencyReport]]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf)
    w.writerow(["embedding_type", "min_ms", "max_ms", "mean_ms", "total_hours"])
    for label, r in rows:
        w.writerow([label, f"{r.min_ms:.3f}", f"{r.max_ms:.3f}", f"{r.mean_ms:.3f}",
                    f"{r.total_hours:.6f}"])
    return buf.getvalue()


def filter_trend_csv(rows: list[tuple[int, float, float]]) -> str:
    """(index_size, with_filter_ms, without_filter_ms) rows."""
    buf = _io.StringIO()
    w = csv.writer(buf)
    w.writerow(["index_size", "with_filter_ms", "without_filter_ms"])
    for size, with_ms, without_ms in rows:
        w.writerow([size, f"{with_ms:.3f}", f"{without_ms:.3f}"])
    return buf.getvalue()
