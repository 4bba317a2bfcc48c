"""Analyst rules: seed fingerprints + thresholds + text predicates.

A rule matches a record when its image side (best match over seeds, either
Hamming distance <= tau or cosine >= sigma) and its text side (predicate over
the tokenized title) agree per the combine mode.  Simulation answers
interactively against a sampled store through the index path; sweeps evaluate
every streamed record at full precision.  Both paths share evaluate_rule
semantics: the index is an accelerator, never a semantics change.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable

import numpy as np

from .codec import (
    BinaryCode,
    EmbeddingVector,
    ProjectionPlan,
    binarize,
    cosine,
    hamming,
)
from .errors import InvalidConfigError, ShapeError
from .index import SearchParams
from .query import Query, run_query
from .store import IngestRecord, RollingStore
from .textfilter import TextPredicate, matches, prefilter, tokenize


class Combine(str, Enum):
    AND = "AND"
    IMAGE_ONLY = "IMAGE_ONLY"
    TEXT_ONLY = "TEXT_ONLY"


class RuleStatus(str, Enum):
    DRAFT = "draft"
    FINALIZED = "finalized"


@dataclass(frozen=True)
class Seed:
    seed_id: str
    embedding: EmbeddingVector
    code: BinaryCode


@dataclass(frozen=True)
class Rule:
    rule_id: str
    name: str
    seeds: tuple[Seed, ...]
    tau: int | None = None  # max Hamming distance
    sigma: float | None = None  # min cosine
    predicate: TextPredicate | None = None
    combine: Combine = Combine.AND
    status: RuleStatus = RuleStatus.DRAFT
    created: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    updated: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self):
        if not self.seeds:
            raise InvalidConfigError("rule needs at least one seed")
        if (self.tau is None) == (self.sigma is None):
            raise InvalidConfigError("exactly one of tau/sigma must be set")
        if self.tau is not None and self.tau < 0:
            raise InvalidConfigError("tau must be non-negative")
        if self.sigma is not None and not -1.0 <= self.sigma <= 1.0:
            raise InvalidConfigError("sigma must lie in [-1, 1]")

    @property
    def finalized(self) -> bool:
        return self.status is RuleStatus.FINALIZED

    def finalize(self) -> "Rule":
        return replace(self, status=RuleStatus.FINALIZED, updated=datetime.now(timezone.utc))

    def with_changes(self, **kwargs) -> "Rule":
        if self.finalized:
            raise InvalidConfigError("finalized rules are immutable")
        return replace(self, updated=datetime.now(timezone.utc), **kwargs)

    def to_json(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "name": self.name,
            "seeds": [
                {"seed_id": s.seed_id, "embedding": s.embedding.values.tolist()}
                for s in self.seeds
            ],
            "tau": self.tau,
            "sigma": self.sigma,
            "predicate": self.predicate.to_json() if self.predicate else None,
            "combine": self.combine.value,
            "status": self.status.value,
            "created": self.created.isoformat(),
            "updated": self.updated.isoformat(),
        }


def make_rule(
    plan: ProjectionPlan,
    name: str,
    seed_embeddings: Iterable[np.ndarray | EmbeddingVector],
    tau: int | None = None,
    sigma: float | None = None,
    predicate: TextPredicate | None = None,
    combine: Combine = Combine.AND,
    rule_id: str | None = None,
) -> Rule:
    seeds = []
    for i, emb in enumerate(seed_embeddings):
        vec = emb if isinstance(emb, EmbeddingVector) else EmbeddingVector(np.asarray(emb))
        seeds.append(Seed(seed_id=f"s{i}", embedding=vec, code=binarize(plan, vec)))
    return Rule(
        rule_id=rule_id or uuid.uuid4().hex[:12],
        name=name,
        seeds=tuple(seeds),
        tau=tau,
        sigma=sigma,
        predicate=predicate,
        combine=combine,
    )


def rule_from_json(plan: ProjectionPlan, obj: dict) -> Rule:
    seeds = tuple(
        Seed(
            seed_id=s.get("seed_id", f"s{i}"),
            embedding=EmbeddingVector(np.asarray(s["embedding"], dtype=np.float64)),
            code=binarize(plan, EmbeddingVector(np.asarray(s["embedding"], dtype=np.float64))),
        )
        for i, s in enumerate(obj["seeds"])
    )
    pred = obj.get("predicate")
    return Rule(
        rule_id=obj["rule_id"],
        name=obj.get("name", obj["rule_id"]),
        seeds=seeds,
        tau=obj.get("tau"),
        sigma=obj.get("sigma"),
        predicate=TextPredicate.from_json(pred) if pred else None,
        combine=Combine(obj.get("combine", "AND")),
        status=RuleStatus(obj.get("status", "draft")),
    )


@dataclass
class RuleDecision:
    matched: bool
    image_score: float  # Hamming distance (tau rules) or cosine (sigma rules)
    best_seed_id: str
    predicate_matched: bool


def evaluate_rule(rule: Rule, record: IngestRecord, plan: ProjectionPlan) -> RuleDecision:
    """Full-precision per-record decision; shared semantics for simulate and sweep."""
    if record.embedding.dim != plan.dim_in:
        raise ShapeError(f"record dim {record.embedding.dim} != plan dim {plan.dim_in}")
    if rule.tau is not None:
        code = binarize(plan, record.embedding)
        best_seed, best = min(
            ((s, hamming(code, s.code)) for s in rule.seeds), key=lambda p: p[1]
        )
        image_ok = best <= rule.tau
        score = float(best)
    else:
        best_seed, best = max(
            ((s, cosine(record.embedding, s.embedding)) for s in rule.seeds),
            key=lambda p: p[1],
        )
        image_ok = best >= rule.sigma
        score = float(best)

    pred = rule.predicate
    text_ok = matches(pred, tokenize(record.title)) if pred is not None else True

    if rule.combine is Combine.IMAGE_ONLY:
        matched = image_ok
    elif rule.combine is Combine.TEXT_ONLY:
        matched = pred is not None and text_ok
    else:  # AND; absent predicate degrades to image-only
        matched = image_ok and text_ok
    return RuleDecision(
        matched=matched,
        image_score=score,
        best_seed_id=best_seed.seed_id,
        predicate_matched=text_ok if pred is not None else False,
    )


@dataclass
class SimulationReport:
    sample_size: int
    hit_count: int
    selectivity: float
    top_hits: list[dict]
    elapsed_ms: float
    hit_ids: set[str] = field(default_factory=set, repr=False)

    def to_json(self) -> dict:
        return {
            "sample_size": self.sample_size,
            "hit_count": self.hit_count,
            "selectivity": self.selectivity,
            "top_hits": self.top_hits,
            "elapsed_ms": self.elapsed_ms,
        }


def _image_hit_scores(rule: Rule, store: RollingStore) -> dict[str, float]:
    """Best per-item image score over seeds, via the index path for tau rules."""
    scores: dict[str, float] = {}
    if rule.tau is not None:
        params = SearchParams(k=max(len(store), 1), radius=rule.tau)
        for seed in rule.seeds:
            page = run_query(
                store,
                Query(params=params, embedding=seed.embedding, threshold=rule.tau),
            )
            for h in page.hits:
                d = float(h.hamming_distance)
                if h.item_id not in scores or d < scores[h.item_id]:
                    scores[h.item_id] = d
    else:
        for item_id in store.ids():
            emb = store.embedding_of(item_id)
            if emb is None:
                raise InvalidConfigError("cosine rules require stored embeddings")
            vec = EmbeddingVector(emb)
            best = max(cosine(vec, s.embedding) for s in rule.seeds)
            if best >= rule.sigma:
                scores[item_id] = best
    return scores


def simulate(rule: Rule, sample_store: RollingStore, limit: int = 20) -> SimulationReport:
    """Interactive rule evaluation against a sampled store."""
    if len(sample_store) == 0:
        raise InvalidConfigError("sample store is empty")
    t0 = time.perf_counter()
    pred = rule.predicate
    if rule.combine is Combine.TEXT_ONLY:
        hit_ids = prefilter(pred, sample_store.titles()) if pred is not None else set()
        scores = {i: 0.0 for i in hit_ids}
    else:
        scores = _image_hit_scores(rule, sample_store)
        if rule.combine is Combine.AND and pred is not None and not pred.empty:
            allowed = prefilter(pred, sample_store.titles())
            scores = {i: s for i, s in scores.items() if i in allowed}
        hit_ids = set(scores)

    reverse = rule.tau is None  # cosine: higher is better; hamming: lower is better
    ranked = sorted(scores.items(), key=lambda p: ((-p[1] if reverse else p[1]), p[0]))
    top = []
    for item_id, score in ranked[:limit]:
        meta = sample_store.meta_of(item_id)
        top.append(
            {"item_id": item_id, "score": score, "title": meta.title if meta else ""}
        )
    n = len(sample_store)
    return SimulationReport(
        sample_size=n,
        hit_count=len(hit_ids),
        selectivity=len(hit_ids) / n,
        top_hits=top,
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
        hit_ids=hit_ids,
    )


@dataclass
class FlaggedItem:
    item_id: str
    rule_id: str
    best_seed_id: str
    score: float
    predicate_matched: bool

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "rule_id": self.rule_id,
            "best_seed_id": self.best_seed_id,
            "score": self.score,
            "predicate_matched": self.predicate_matched,
        }


@dataclass
class SweepReport:
    scanned: int = 0
    flagged: list[FlaggedItem] = field(default_factory=list)
    malformed: int = 0
    elapsed_s: float = 0.0
    total: int | None = None

    @property
    def throughput(self) -> float:
        return self.scanned / self.elapsed_s if self.elapsed_s > 0 else 0.0

    @property
    def fraction(self) -> float:
        if self.total:
            return min(1.0, self.scanned / self.total)
        return 0.0

    def to_json(self) -> dict:
        return {
            "scanned": self.scanned,
            "flagged": [f.to_json() for f in self.flagged],
            "malformed": self.malformed,
            "throughput": self.throughput,
            "fraction": self.fraction,
        }


class SweepJob:
    """Incremental exhaustive scan of a record stream against finalized rules."""

    def __init__(self, rules: Iterable[Rule], plan: ProjectionPlan, total: int | None = None):
        self.rules = tuple(rules)
        for rule in self.rules:
            if not rule.finalized:
                raise InvalidConfigError(f"rule {rule.rule_id} is not finalized")
        self.plan = plan
        self.report = SweepReport(total=total)
        self._start = time.perf_counter()

    def process(self, raw: IngestRecord | dict | str) -> None:
        try:
            record = raw if isinstance(raw, IngestRecord) else _coerce_record(raw)
        except (ValueError, KeyError, InvalidConfigError):
            self.report.malformed += 1
            return
        for rule in self.rules:
            decision = evaluate_rule(rule, record, self.plan)
            if decision.matched:
                self.report.flagged.append(
                    FlaggedItem(
                        item_id=record.item_id,
                        rule_id=rule.rule_id,
                        best_seed_id=decision.best_seed_id,
                        score=decision.image_score,
                        predicate_matched=decision.predicate_matched,
                    )
                )
        self.report.scanned += 1
        self.report.elapsed_s = time.perf_counter() - self._start

    def run(self, records: Iterable[IngestRecord | dict | str]) -> SweepReport:
        for raw in records:
            self.process(raw)
        return self.report


def sweep(
    rules: Iterable[Rule],
    records: Iterable[IngestRecord | dict | str],
    plan: ProjectionPlan,
    total: int | None = None,
) -> SweepReport:
    return SweepJob(rules, plan, total=total).run(records)


def _coerce_record(raw: dict | str) -> IngestRecord:
    from .io import parse_meta_obj

    obj = json.loads(raw) if isinstance(raw, str) else raw
    row = parse_meta_obj({k: v for k, v in obj.items() if k != "embedding"})
    return IngestRecord(
        item_id=row.item_id,
        product_id=row.product_id,
        title=row.title,
        embedding=EmbeddingVector(np.asarray(obj["embedding"], dtype=np.float64)),
        timestamp=row.timestamp,
    )
