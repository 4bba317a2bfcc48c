"""Variant candidate generation: text retrieval expanded by image neighbors.

For a query item, the top-N similar titles are fetched, then each text
candidate seeds an image nearest-neighbor lookup whose top-k hits join the
candidate set.  The expansion breaks through text-retrieval recall saturation
for variants whose titles are paraphrased but whose images are near-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InvalidConfigError, NotFoundError
from .index import SearchParams
from .query import Query, run_query
from .store import RollingStore
from .synthetic import VariantGroup
from .textfilter import TextIndex


@dataclass(frozen=True)
class SoSParams:
    n_text: int
    k_image: int
    radius: int = 8

    def __post_init__(self):
        if self.n_text < 0 or self.k_image < 0 or self.radius < 0:
            raise InvalidConfigError("n_text, k_image, radius must be >= 0")


@dataclass
class CandidateSet:
    query_id: str
    entries: dict[str, set[str]] = field(default_factory=dict)  # id -> {"text","image"}

    def ids(self) -> set[str]:
        return set(self.entries)

    def flag(self, item_id: str, source: str) -> None:
        self.entries.setdefault(item_id, set()).add(source)

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "candidates": [
                {"item_id": i, "sources": sorted(s)} for i, s in sorted(self.entries.items())
            ],
        }


def _image_neighbors(store: RollingStore, item_id: str, k: int, radius: int) -> list[str]:
    # fetch extra slots so excluding self still leaves k hits
    page = run_query(
        store, Query(params=SearchParams(k=k + 2, radius=radius), item_ref=item_id)
    )
    return [h.item_id for h in page.hits if h.item_id != item_id]


def generate(
    store: RollingStore,
    query_item: str,
    params: SoSParams,
    text_index: TextIndex | None = None,
) -> CandidateSet:
    """Text candidates union their top-k image neighbors; query excluded."""
    meta = store.meta_of(query_item)
    if meta is None:
        raise NotFoundError(f"item {query_item!r} is not indexed")
    if text_index is None:
        text_index = TextIndex(store.titles())
    result = CandidateSet(query_id=query_item)
    text_hits = [
        i for i, _ in text_index.top_n(meta.title, params.n_text, exclude=query_item)
    ]
    for c in text_hits:
        result.flag(c, "text")
    if params.k_image > 0:
        for c in text_hits:
            neighbors = [
                nb
                for nb in _image_neighbors(store, c, params.k_image, params.radius)
                if nb != query_item
            ]
            for nb in neighbors[: params.k_image]:
                result.flag(nb, "image")
    return result


def recall_of(candidates: set[str], group: Sequence[str], query_id: str) -> float:
    others = [m for m in group if m != query_id]
    if not others:
        raise InvalidConfigError("singleton group has no recall")
    return sum(1 for m in others if m in candidates) / len(others)


@dataclass
class CurvePoint:
    n_text: int
    k_image: int
    mean_recall: float
    mean_candidates: float


@dataclass
class RecallCurve:
    points: list[CurvePoint]
    skipped_singletons: int = 0

    def at(self, n: int, k: int) -> CurvePoint:
        for p in self.points:
            if p.n_text == n and p.k_image == k:
                return p
        raise KeyError((n, k))

    def to_csv(self) -> str:
        lines = ["N,k,mean_recall,mean_candidates"]
        for p in self.points:
            lines.append(f"{p.n_text},{p.k_image},{p.mean_recall:.6f},{p.mean_candidates:.3f}")
        return "\n".join(lines) + "\n"


def recall_curve(
    store: RollingStore,
    groups: Iterable[VariantGroup],
    n_grid: Sequence[int],
    k_grid: Sequence[int],
    radius: int = 8,
    queries: Sequence[str] | None = None,
) -> RecallCurve:
    """Mean recall and mean candidate count over the (N, k) grid.

    Per query, the text ranking is computed once at max(N) and each text
    candidate's image neighbors once at max(k); grid points reuse prefixes.
    """
    groups = list(groups)
    member_group = {}
    skipped = 0
    for g in groups:
        if len(g.member_ids) < 2:
            skipped += 1
            continue
        for m in g.member_ids:
            member_group[m] = g
    if queries is None:
        queries = [m for g in groups if len(g.member_ids) >= 2 for m in g.member_ids]
    queries = [q for q in queries if q in member_group and q in store]

    n_max = max(n_grid)
    k_max = max(k_grid)
    text_index = TextIndex(store.titles())

    per_query: list[tuple[str, list[str], dict[str, list[str]]]] = []
    for q in queries:
        meta = store.meta_of(q)
        text_hits = [i for i, _ in text_index.top_n(meta.title, n_max, exclude=q)]
        neighbors = {}
        if k_max > 0:
            for c in text_hits:
                neighbors[c] = [
                    nb for nb in _image_neighbors(store, c, k_max, radius) if nb != q
                ][:k_max]
        per_query.append((q, text_hits, neighbors))

    points = []
    for n in n_grid:
        for k in k_grid:
            recalls, counts = [], []
            for q, text_hits, neighbors in per_query:
                cand = set(text_hits[:n])
                if k > 0:
                    for c in text_hits[:n]:
                        cand.update(neighbors.get(c, [])[:k])
                cand.discard(q)
                recalls.append(recall_of(cand, member_group[q].member_ids, q))
                counts.append(len(cand))
            points.append(
                CurvePoint(
                    n_text=n,
                    k_image=k,
                    mean_recall=sum(recalls) / len(recalls) if recalls else 0.0,
                    mean_candidates=sum(counts) / len(counts) if counts else 0.0,
                )
            )
    return RecallCurve(points=points, skipped_singletons=skipped)
