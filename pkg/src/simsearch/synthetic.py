"""Seeded synthetic corpora: clustered embeddings, templated titles, planted
variant groups.  Stands in for production catalogs so search-quality, latency,
and variant-recall analyses are runnable at desk scale."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable

import numpy as np

from .codec import CodecConfig, EmbeddingVector
from .errors import InvalidConfigError
from .evaluation import JudgedQuery
from .store import IngestRecord, RollingStore, StoreConfig


@dataclass(frozen=True)
class CorpusSpec:
    cluster_count: int = 20
    cluster_size: int = 10
    dim: int = 64
    noise: float = 0.1
    vocab_size: int = 200
    title_len: int = 4
    paraphrase_rate: float = 0.0
    variant_group_count: int = 0
    variant_group_size: int = 4
    variant_noise: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.cluster_count < 0 or self.cluster_size < 0 or self.dim <= 0:
            raise InvalidConfigError("cluster counts must be >= 0 and dim > 0")
        if self.noise < 0 or self.variant_noise < 0:
            raise InvalidConfigError("noise levels must be non-negative")
        if not 0.0 <= self.paraphrase_rate <= 1.0:
            raise InvalidConfigError("paraphrase_rate must lie in [0, 1]")
        if self.vocab_size < self.title_len:
            raise InvalidConfigError("vocabulary smaller than title length")

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusSpec":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})


@dataclass(frozen=True)
class VariantGroup:
    group_id: str
    member_ids: tuple[str, ...]


@dataclass
class SyntheticCorpus:
    spec: CorpusSpec
    records: list[IngestRecord]
    judged: list[JudgedQuery]
    groups: list[VariantGroup]

    def vectors(self) -> list[tuple[str, np.ndarray]]:
        return [(r.item_id, r.embedding.values) for r in self.records]


_COLOR_WORDS = ("red", "blue", "green", "black", "white", "large", "small", "mini")


def make_synthetic_corpus(spec: CorpusSpec, now: datetime | None = None) -> SyntheticCorpus:
    """Fully seeded; the same spec yields identical records (and vector files)."""
    rng = np.random.default_rng(spec.seed)
    now = now or datetime(2026, 1, 1, tzinfo=timezone.utc)
    vocab = [f"w{i:04d}" for i in range(spec.vocab_size)]
    # paraphrases draw from a disjoint vocabulary so text retrieval cannot see them
    para_vocab = [f"q{i:04d}" for i in range(spec.vocab_size)]

    records: list[IngestRecord] = []
    judged: list[JudgedQuery] = []
    groups: list[VariantGroup] = []

    def stamp(i: int) -> datetime:
        return now - timedelta(minutes=i + 1)

    def title_words(source, k) -> list[str]:
        return [source[int(j)] for j in rng.choice(len(source), size=k, replace=False)]

    serial = 0
    for c in range(spec.cluster_count):
        center = rng.normal(size=spec.dim)
        base = title_words(vocab, spec.title_len)
        member_ids = []
        for mbr in range(spec.cluster_size):
            vec = center + spec.noise * rng.normal(size=spec.dim)
            item_id = f"c{c:04d}-{mbr:03d}"
            member_ids.append(item_id)
            records.append(
                IngestRecord(
                    item_id=item_id,
                    product_id=f"cp{c:04d}",
                    title=" ".join(base + [_COLOR_WORDS[mbr % len(_COLOR_WORDS)]]),
                    embedding=EmbeddingVector(vec),
                    timestamp=stamp(serial),
                )
            )
            serial += 1
        if len(member_ids) > 1:
            judged.append(
                JudgedQuery(query_id=member_ids[0], relevant=frozenset(member_ids[1:]))
            )

    for g in range(spec.variant_group_count):
        center = rng.normal(size=spec.dim)
        base = title_words(vocab, spec.title_len)
        member_ids = []
        for mbr in range(spec.variant_group_size):
            vec = center + spec.variant_noise * rng.normal(size=spec.dim)
            item_id = f"v{g:04d}-{mbr:02d}"
            member_ids.append(item_id)
            # member 0 is the canonical listing and keeps the base title
            paraphrased = mbr > 0 and rng.random() < spec.paraphrase_rate
            if paraphrased:
                words = title_words(para_vocab, spec.title_len)
            else:
                words = base + [_COLOR_WORDS[mbr % len(_COLOR_WORDS)]]
            records.append(
                IngestRecord(
                    item_id=item_id,
                    product_id=f"vp{g:04d}",
                    title=" ".join(words),
                    embedding=EmbeddingVector(vec),
                    timestamp=stamp(serial),
                )
            )
            serial += 1
        groups.append(VariantGroup(group_id=f"g{g:04d}", member_ids=tuple(member_ids)))

    return SyntheticCorpus(spec=spec, records=records, judged=judged, groups=groups)


def build_store(
    corpus: SyntheticCorpus,
    codec: CodecConfig,
    now: datetime | None = None,
    window_days: int = 90,
    bucket_days: int = 7,
    store_embeddings: bool = True,
) -> RollingStore:
    if codec.dim != corpus.spec.dim:
        raise InvalidConfigError(f"codec dim {codec.dim} != corpus dim {corpus.spec.dim}")
    now = now or max(r.timestamp for r in corpus.records) + timedelta(minutes=1)
    store = RollingStore(
        StoreConfig(
            codec=codec,
            window_days=window_days,
            bucket_days=bucket_days,
            store_embeddings=store_embeddings,
        )
    )
    for record in corpus.records:
        store.ingest(record, now)
    return store


def write_groups(path, groups: Iterable[VariantGroup]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for g in groups:
            f.write(json.dumps({"group_id": g.group_id, "member_ids": list(g.member_ids)}) + "\n")


def load_groups(path) -> list[VariantGroup]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                VariantGroup(
                    group_id=str(obj["group_id"]),
                    member_ids=tuple(str(i) for i in obj["member_ids"]),
                )
            )
    return out
