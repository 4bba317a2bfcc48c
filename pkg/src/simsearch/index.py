"""Inverted index over subcode tokens with pigeonhole candidate generation.

Two codes within Hamming distance r, split into m > r subcodes, must agree on
at least m - r subcodes exactly.  Candidate generation therefore collects, per
position, the posting list of the query's subcode value and keeps items whose
accumulated match count can still reach m - r (early abandonment prunes the
rest).  Exact Hamming distances re-rank the surviving candidates.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .codec import BinaryCode, CodecConfig, EmbeddingVector, cosine, split_subcodes
from .errors import ShapeError

EmbeddingLookup = Callable[[str], Optional[np.ndarray]]


@dataclass(frozen=True)
class SearchParams:
    """k result budget, pigeonhole radius r, optional cosine re-rank depth."""

    k: int
    radius: int = 0
    rerank_depth: int = 0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        if self.rerank_depth < 0:
            raise ValueError("rerank_depth must be non-negative")

    def min_match(self, m: int) -> int:
        return m - self.radius


@dataclass
class RankedHit:
    item_id: str
    hamming_distance: int
    matched_subcodes: int
    cosine_score: float | None = None


class SubcodeIndex:
    """m posting maps (position, subcode value) -> sorted id list, plus a code store.

    Single writer, many readers: insert/remove mutate private structures and
    publish whole posting lists, so a concurrent reader never sees an id in a
    posting list without its code.
    """

    def __init__(self, config: CodecConfig):
        self.config = config
        self._postings: list[dict[int, list[str]]] = [dict() for _ in range(config.subcode_count)]
        self._codes: dict[str, BinaryCode] = {}

    def __len__(self) -> int:
        return len(self._codes)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._codes

    def ids(self) -> Iterable[str]:
        return self._codes.keys()

    def code_of(self, item_id: str) -> BinaryCode | None:
        return self._codes.get(item_id)

    def _check_code(self, code: BinaryCode) -> None:
        if code.length != self.config.code_bits:
            raise ShapeError(
                f"code length {code.length} != configured {self.config.code_bits}"
            )

    def insert(self, item_id: str, code: BinaryCode) -> None:
        """Upsert: a re-inserted id replaces its old code everywhere."""
        self._check_code(code)
        old = self._codes.get(item_id)
        if old is not None:
            if old == code:
                return
            self._unlink(item_id, old)
        for pos, value in split_subcodes(code, self.config.subcode_count):
            bucket = self._postings[pos].setdefault(value, [])
            insort(bucket, item_id)
        self._codes[item_id] = code

    def remove(self, item_id: str) -> None:
        code = self._codes.pop(item_id, None)
        if code is None:
            return
        self._unlink(item_id, code)

    def _unlink(self, item_id: str, code: BinaryCode) -> None:
        for pos, value in split_subcodes(code, self.config.subcode_count):
            bucket = self._postings[pos].get(value)
            if bucket is None:
                continue
            i = bisect_left(bucket, item_id)
            if i < len(bucket) and bucket[i] == item_id:
                bucket.pop(i)
            if not bucket:
                del self._postings[pos][value]

    def candidates(
        self,
        query: BinaryCode,
        r: int,
        allow: set[str] | None = None,
        prune: bool = True,
    ) -> dict[str, int]:
        """Item id -> matched-subcode count for all items matching >= m - r subcodes.

        r >= m degrades to a full scan returning every (allowed) item.  The
        returned counts are exact either way; early abandonment only skips
        items that provably cannot reach the threshold.
        """
        self._check_code(query)
        m = self.config.subcode_count
        query_parts = split_subcodes(query, m)
        if r >= m:
            result: dict[str, int] = {}
            for item_id, code in self._codes.items():
                if allow is not None and item_id not in allow:
                    continue
                result[item_id] = sum(
                    1
                    for (_, qv), (_, cv) in zip(query_parts, split_subcodes(code, m))
                    if qv == cv
                )
            return result

        need = m - r
        counts: dict[str, int] = {}
        for p, value in query_parts:
            bucket = self._postings[p].get(value)
            if bucket:
                if allow is None:
                    for item_id in bucket:
                        counts[item_id] = counts.get(item_id, 0) + 1
                else:
                    for item_id in bucket:
                        if item_id in allow:
                            counts[item_id] = counts.get(item_id, 0) + 1
            # positions remaining after p; abandon items that cannot reach `need`
            if prune and p >= r:
                remaining = m - 1 - p
                floor = need - remaining
                if floor > 0:
                    counts = {i: c for i, c in counts.items() if c >= floor}
        return {i: c for i, c in counts.items() if c >= need}

    def search(
        self,
        query: BinaryCode,
        params: SearchParams,
        allow: set[str] | None = None,
        query_embedding: EmbeddingVector | None = None,
        embedding_lookup: EmbeddingLookup | None = None,
    ) -> list[RankedHit]:
        """Candidates re-ranked by exact Hamming, (distance asc, id asc), top k.

        Candidates beyond distance `radius` are kept (superset semantics);
        callers needing a hard radius filter on hamming_distance.  With
        rerank_depth > 0 and embeddings available, the top rerank_depth hits
        are re-ordered by (cosine desc, id asc).
        """
        cand = self.candidates(query, params.radius, allow=allow)
        qbits = query.bits
        hits = [
            RankedHit(
                item_id=i,
                hamming_distance=(qbits ^ self._codes[i].bits).bit_count(),
                matched_subcodes=c,
            )
            for i, c in cand.items()
        ]
        hits.sort(key=lambda h: (h.hamming_distance, h.item_id))
        hits = hits[: params.k]
        if params.rerank_depth > 0 and query_embedding is not None and embedding_lookup is not None:
            hits = rerank_by_cosine(hits, params.rerank_depth, query_embedding, embedding_lookup)
        return hits


def rerank_by_cosine(
    hits: list[RankedHit],
    depth: int,
    query_embedding: EmbeddingVector,
    embedding_lookup: EmbeddingLookup,
) -> list[RankedHit]:
    """Re-order the first `depth` hits by (cosine desc, id asc); rest unchanged."""
    head, tail = hits[:depth], hits[depth:]
    for h in head:
        emb = embedding_lookup(h.item_id)
        if emb is not None:
            h.cosine_score = cosine(query_embedding, EmbeddingVector(emb))
    head.sort(key=lambda h: (-(h.cosine_score if h.cosine_score is not None else -2.0), h.item_id))
    return head + tail
