"""End-to-end query pipeline over the rolling store.

Pipeline: resolve the query code (binarize an embedding or reuse an indexed
item's), optionally prefilter ids by a text predicate, collect subcode
candidates per segment, merge globally by (hamming asc, id asc), apply the
optional Hamming threshold, truncate to k, and optionally re-rank the head by
full-precision cosine.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .codec import BinaryCode, EmbeddingVector, binarize
from .errors import InvalidConfigError, NotFoundError, ShapeError
from .index import RankedHit, SearchParams, rerank_by_cosine
from .store import RollingStore
from .textfilter import TextPredicate, prefilter


@dataclass(frozen=True)
class Query:
    params: SearchParams
    embedding: EmbeddingVector | None = None
    item_ref: str | None = None
    predicate: TextPredicate | None = None
    threshold: int | None = None  # max Hamming distance, in bits

    def __post_init__(self):
        if (self.embedding is None) == (self.item_ref is None):
            raise InvalidConfigError("exactly one of embedding/item_ref must be set")
        if self.threshold is not None and self.threshold < 0:
            raise InvalidConfigError("threshold must be non-negative")


@dataclass
class Timings:
    prefilter_ms: float = 0.0
    candidate_ms: float = 0.0
    rerank_ms: float = 0.0
    total_ms: float = 0.0


@dataclass
class PageHit:
    item_id: str
    hamming_distance: int
    matched_subcodes: int
    cosine_score: float | None
    product_id: str
    title: str

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "hamming_distance": self.hamming_distance,
            "matched_subcodes": self.matched_subcodes,
            "cosine_score": self.cosine_score,
            "product_id": self.product_id,
            "title": self.title,
        }


@dataclass
class ResultPage:
    hits: list[PageHit] = field(default_factory=list)
    timings: Timings = field(default_factory=Timings)

    def ids(self) -> list[str]:
        return [h.item_id for h in self.hits]

    def to_json(self) -> dict:
        return {
            "hits": [h.to_json() for h in self.hits],
            "timings": {
                "prefilter_ms": self.timings.prefilter_ms,
                "candidate_ms": self.timings.candidate_ms,
                "rerank_ms": self.timings.rerank_ms,
                "total_ms": self.timings.total_ms,
            },
        }


def resolve_query_code(store: RollingStore, q: Query) -> tuple[BinaryCode, EmbeddingVector | None]:
    if q.item_ref is not None:
        code = store.code_of(q.item_ref)
        if code is None:
            raise NotFoundError(f"item {q.item_ref!r} is not indexed")
        emb = store.embedding_of(q.item_ref)
        return code, (EmbeddingVector(emb) if emb is not None else None)
    if q.embedding.dim != store.config.codec.dim:
        raise ShapeError(
            f"query dim {q.embedding.dim} != store dim {store.config.codec.dim}"
        )
    return binarize(store.plan, q.embedding), q.embedding


def run_query(store: RollingStore, q: Query) -> ResultPage:
    t0 = time.perf_counter()
    if q.threshold is not None and q.threshold > store.config.codec.code_bits:
        raise InvalidConfigError("threshold exceeds code length")
    code, emb = resolve_query_code(store, q)

    allow = None
    t1 = time.perf_counter()
    if q.predicate is not None and not q.predicate.empty:
        allow = set()
        for seg in store.segments():
            allow |= prefilter(q.predicate, seg.titles())
    t2 = time.perf_counter()

    per_segment = SearchParams(k=q.params.k, radius=q.params.radius, rerank_depth=0)
    merged: list[RankedHit] = []
    for seg in store.segments():
        merged.extend(seg.index.search(code, per_segment, allow=allow))
    merged.sort(key=lambda h: (h.hamming_distance, h.item_id))
    if q.threshold is not None:
        merged = [h for h in merged if h.hamming_distance <= q.threshold]
    merged = merged[: q.params.k]
    t3 = time.perf_counter()

    if q.params.rerank_depth > 0 and emb is not None and store.config.store_embeddings:
        merged = rerank_by_cosine(merged, q.params.rerank_depth, emb, store.embedding_of)
    t4 = time.perf_counter()

    hits = []
    for h in merged:
        meta = store.meta_of(h.item_id)
        hits.append(
            PageHit(
                item_id=h.item_id,
                hamming_distance=h.hamming_distance,
                matched_subcodes=h.matched_subcodes,
                cosine_score=h.cosine_score,
                product_id=meta.product_id if meta else "",
                title=meta.title if meta else "",
            )
        )
    return ResultPage(
        hits=hits,
        timings=Timings(
            prefilter_ms=(t2 - t1) * 1000.0,
            candidate_ms=(t3 - t2) * 1000.0,
            rerank_ms=(t4 - t3) * 1000.0,
            total_ms=(time.perf_counter() - t0) * 1000.0,
        ),
    )


@dataclass
class BatchOutcome:
    pages: list[ResultPage | None]
    errors: list[str | None]
    wall_ms: list[float]

    @property
    def min_ms(self) -> float:
        return min(self.wall_ms) if self.wall_ms else 0.0

    @property
    def max_ms(self) -> float:
        return max(self.wall_ms) if self.wall_ms else 0.0

    @property
    def mean_ms(self) -> float:
        return sum(self.wall_ms) / len(self.wall_ms) if self.wall_ms else 0.0

    @property
    def total_ms(self) -> float:
        return sum(self.wall_ms)


def batch_query(store: RollingStore, queries: list[Query]) -> BatchOutcome:
    """Element-wise run_query; per-query failures fill the error slot."""
    pages: list[ResultPage | None] = []
    errors: list[str | None] = []
    wall: list[float] = []
    for q in queries:
        start = time.perf_counter()
        try:
            pages.append(run_query(store, q))
            errors.append(None)
        except Exception as exc:  # per-slot reporting, batch continues
            pages.append(None)
            errors.append(f"{type(exc).__name__}: {exc}")
        wall.append((time.perf_counter() - start) * 1000.0)
    return BatchOutcome(pages=pages, errors=errors, wall_ms=wall)
