"""Rolling, time-bucketed segment store: ingestion, expiry, persistence.

Items land in the segment owning their timestamp (bucket-aligned).  Expiry
drops whole segments once they fall out of the retention window, so retention
is accurate to one bucket of slack.  Each item id lives in at most one segment
at a time; re-ingesting an id moves it (upsert).
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .codec import BinaryCode, CodecConfig, EmbeddingVector, binarize, plan_for
from .errors import (
    IntegrityError,
    InvalidConfigError,
    OutOfWindowError,
    ShapeError,
    UnsupportedVersionError,
)
from .index import SubcodeIndex
from .io import (
    MetaRow,
    format_timestamp,
    iter_meta_jsonl,
    parse_meta_obj,
    parse_timestamp,
    read_codes,
    read_sirv,
    write_codes,
    write_meta_jsonl,
    write_sirv,
)
from .textfilter import TokenizedTitle, tokenize

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
STORE_VERSION = 1


@dataclass(frozen=True)
class IngestRecord:
    item_id: str
    product_id: str
    title: str
    embedding: EmbeddingVector
    timestamp: datetime

    def __post_init__(self):
        if not self.item_id:
            raise InvalidConfigError("item id must be non-empty")
        if self.timestamp.tzinfo is None:
            raise InvalidConfigError("timestamp must be timezone-aware UTC")


@dataclass(frozen=True)
class StoreConfig:
    codec: CodecConfig
    window_days: int = 90
    bucket_days: int = 7
    store_embeddings: bool = True

    def __post_init__(self):
        if self.bucket_days <= 0 or self.window_days < self.bucket_days:
            raise InvalidConfigError("need window_days >= bucket_days > 0")

    @property
    def window(self) -> timedelta:
        return timedelta(days=self.window_days)

    @property
    def granularity(self) -> timedelta:
        return timedelta(days=self.bucket_days)

    def to_json(self) -> dict:
        return {
            "codec": self.codec.to_json(),
            "window_days": self.window_days,
            "bucket_days": self.bucket_days,
            "store_embeddings": self.store_embeddings,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StoreConfig":
        return cls(
            codec=CodecConfig.from_json(obj["codec"]),
            window_days=int(obj["window_days"]),
            bucket_days=int(obj["bucket_days"]),
            store_embeddings=bool(obj["store_embeddings"]),
        )


@dataclass
class ItemMeta:
    product_id: str
    title: str
    tokens: TokenizedTitle
    timestamp: datetime


@dataclass
class Segment:
    bucket_start: datetime
    index: SubcodeIndex
    meta: dict[str, ItemMeta] = field(default_factory=dict)
    embeddings: Optional[dict[str, np.ndarray]] = None

    def titles(self) -> dict[str, TokenizedTitle]:
        return {item_id: m.tokens for item_id, m in self.meta.items()}

    def __len__(self) -> int:
        return len(self.meta)


class RollingStore:
    """Single ingestion writer, concurrent query readers."""

    def __init__(self, config: StoreConfig):
        self.config = config
        self.plan = plan_for(config.codec)
        self._segments: dict[datetime, Segment] = {}
        self._owner: dict[str, datetime] = {}

    # -- basic views ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self._owner)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._owner

    def segments(self) -> list[Segment]:
        return [self._segments[k] for k in sorted(self._segments)]

    def ids(self) -> Iterator[str]:
        return iter(self._owner)

    def segment_of(self, item_id: str) -> Segment | None:
        bucket = self._owner.get(item_id)
        return self._segments[bucket] if bucket is not None else None

    def code_of(self, item_id: str) -> BinaryCode | None:
        seg = self.segment_of(item_id)
        return seg.index.code_of(item_id) if seg else None

    def meta_of(self, item_id: str) -> ItemMeta | None:
        seg = self.segment_of(item_id)
        return seg.meta.get(item_id) if seg else None

    def embedding_of(self, item_id: str) -> np.ndarray | None:
        seg = self.segment_of(item_id)
        if seg is None or seg.embeddings is None:
            return None
        return seg.embeddings.get(item_id)

    def titles(self) -> dict[str, TokenizedTitle]:
        out: dict[str, TokenizedTitle] = {}
        for seg in self._segments.values():
            out.update(seg.titles())
        return out

    def iter_records(self) -> Iterator[IngestRecord]:
        """Re-materialize records; requires store_embeddings."""
        for seg in self.segments():
            if seg.embeddings is None:
                raise InvalidConfigError("store does not retain embeddings")
            for item_id, m in seg.meta.items():
                yield IngestRecord(
                    item_id=item_id,
                    product_id=m.product_id,
                    title=m.title,
                    embedding=EmbeddingVector(seg.embeddings[item_id]),
                    timestamp=m.timestamp,
                )

    # -- ingestion -----------------------------------------------------------

    def bucket_start(self, ts: datetime) -> datetime:
        delta = ts - _EPOCH
        buckets = delta // self.config.granularity
        return _EPOCH + buckets * self.config.granularity

    def ingest(self, record: IngestRecord, now: datetime) -> None:
        if record.embedding.dim != self.config.codec.dim:
            raise ShapeError(
                f"embedding dim {record.embedding.dim} != store dim {self.config.codec.dim}"
            )
        if record.timestamp > now:
            raise OutOfWindowError(f"{record.item_id}: timestamp in the future")
        if record.timestamp < now - self.config.window:
            raise OutOfWindowError(
                f"{record.item_id}: timestamp older than the {self.config.window_days}-day window"
            )
        code = binarize(self.plan, record.embedding)
        self._remove(record.item_id)
        bucket = self.bucket_start(record.timestamp)
        seg = self._segments.get(bucket)
        if seg is None:
            seg = Segment(
                bucket_start=bucket,
                index=SubcodeIndex(self.config.codec),
                embeddings={} if self.config.store_embeddings else None,
            )
            self._segments[bucket] = seg
        seg.index.insert(record.item_id, code)
        seg.meta[record.item_id] = ItemMeta(
            product_id=record.product_id,
            title=record.title,
            tokens=tokenize(record.title),
            timestamp=record.timestamp,
        )
        if seg.embeddings is not None:
            seg.embeddings[record.item_id] = record.embedding.values
        self._owner[record.item_id] = bucket

    def remove(self, item_id: str) -> None:
        self._remove(item_id)

    def _remove(self, item_id: str) -> None:
        bucket = self._owner.pop(item_id, None)
        if bucket is None:
            return
        seg = self._segments[bucket]
        seg.index.remove(item_id)
        seg.meta.pop(item_id, None)
        if seg.embeddings is not None:
            seg.embeddings.pop(item_id, None)
        if not seg.meta:
            del self._segments[bucket]

    def expire(self, now: datetime) -> int:
        """Drop segments entirely outside the window; returns count dropped."""
        cutoff = now - self.config.window
        dead = [
            b for b in self._segments if b + self.config.granularity <= cutoff
        ]
        for bucket in dead:
            for item_id in list(self._segments[bucket].meta):
                self._owner.pop(item_id, None)
            del self._segments[bucket]
        return len(dead)

    # -- persistence ---------------------------------------------------------

    def persist(self, directory) -> dict:
        """Write the store under `directory`; returns the manifest."""
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        seg_root = root / "segments"
        if seg_root.exists():
            shutil.rmtree(seg_root)
        seg_root.mkdir()
        seg_names = []
        for seg in self.segments():
            name = seg.bucket_start.strftime("%Y%m%dT%H%M%S")
            seg_dir = seg_root / name
            seg_dir.mkdir()
            items = sorted(seg.meta)
            write_codes(
                seg_dir / "codes.bin",
                self.config.codec.code_bits,
                [(i, seg.index.code_of(i)) for i in items],
            )
            write_meta_jsonl(
                seg_dir / "meta.jsonl",
                [
                    MetaRow(i, seg.meta[i].product_id, seg.meta[i].title, seg.meta[i].timestamp)
                    for i in items
                ],
            )
            if seg.embeddings is not None:
                write_sirv(
                    seg_dir / "embeds.sirv",
                    self.config.codec.dim,
                    [(i, seg.embeddings[i]) for i in items],
                )
            seg_manifest = {
                "version": STORE_VERSION,
                "codec": self.config.codec.to_json(),
                "bucket_start": format_timestamp(seg.bucket_start),
                "count": len(items),
            }
            (seg_dir / "manifest.json").write_text(json.dumps(seg_manifest, indent=2))
            seg_names.append(name)
        manifest = {
            "version": STORE_VERSION,
            "config": self.config.to_json(),
            "segments": seg_names,
        }
        (root / "manifest.json").write_text(json.dumps(manifest, indent=2))
        return manifest

    @classmethod
    def load(cls, directory, default_config: StoreConfig | None = None) -> "RollingStore":
        """Load a persisted store; an empty/absent directory yields an empty store.

        `default_config` is required when no manifest exists, and checked for
        codec compatibility when one does.
        """
        root = Path(directory)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            if default_config is None:
                raise InvalidConfigError(f"{directory}: no manifest and no default config")
            return cls(default_config)
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("version") != STORE_VERSION:
            raise UnsupportedVersionError(
                f"{directory}: store version {manifest.get('version')} unsupported"
            )
        config = StoreConfig.from_json(manifest["config"])
        if default_config is not None and default_config.codec != config.codec:
            raise InvalidConfigError(
                "configured codec conflicts with the persisted manifest "
                f"(persisted {config.codec}, configured {default_config.codec})"
            )
        store = cls(config)
        for name in manifest["segments"]:
            seg_dir = root / "segments" / name
            try:
                seg_manifest = json.loads((seg_dir / "manifest.json").read_text())
                code_bits, codes = read_codes(seg_dir / "codes.bin")
                meta_rows = list(iter_meta_jsonl(seg_dir / "meta.jsonl"))
            except (OSError, json.JSONDecodeError, ValueError) as exc:
                raise IntegrityError(f"segment {name}: {exc}") from exc
            if code_bits != config.codec.code_bits:
                raise IntegrityError(f"segment {name}: code bits {code_bits} mismatch")
            if seg_manifest.get("count") != len(codes) or len(codes) != len(meta_rows):
                raise IntegrityError(f"segment {name}: record counts disagree")
            embeds = None
            if config.store_embeddings:
                dim, pairs = read_sirv(seg_dir / "embeds.sirv")
                if dim != config.codec.dim:
                    raise IntegrityError(f"segment {name}: embedding dim {dim} mismatch")
                embeds = {i: v.astype(np.float64) for i, v in pairs}
            bucket = store.bucket_start(parse_timestamp(seg_manifest["bucket_start"]))
            seg = Segment(
                bucket_start=bucket,
                index=SubcodeIndex(config.codec),
                embeddings=embeds if config.store_embeddings else None,
            )
            for (item_id, code), row in zip(codes, meta_rows):
                if item_id != row.item_id:
                    raise IntegrityError(f"segment {name}: code/meta id order mismatch")
                seg.index.insert(item_id, code)
                seg.meta[item_id] = ItemMeta(
                    product_id=row.product_id,
                    title=row.title,
                    tokens=tokenize(row.title),
                    timestamp=row.timestamp,
                )
                store._owner[item_id] = bucket
            store._segments[bucket] = seg
        return store


@dataclass
class ConsumeReport:
    ingested: int = 0
    rejected: int = 0
    malformed: int = 0


def consume(
    store: RollingStore,
    records: Iterable[IngestRecord | dict | str],
    now: datetime | None = None,
    expire_every: int = 1000,
) -> ConsumeReport:
    """Apply a stream of records; malformed or out-of-window entries are
    counted and skipped so the stream never halts.  Idempotent under
    re-delivery (upsert by id)."""
    report = ConsumeReport()
    now = now or datetime.now(timezone.utc)
    for i, raw in enumerate(records, 1):
        try:
            record = raw if isinstance(raw, IngestRecord) else _record_from_obj(raw, store)
        except (ValueError, InvalidConfigError, ShapeError, KeyError):
            report.malformed += 1
            continue
        try:
            store.ingest(record, now)
            report.ingested += 1
        except OutOfWindowError:
            report.rejected += 1
        except ShapeError:
            report.malformed += 1
        if i % expire_every == 0:
            store.expire(now)
    store.expire(now)
    return report


def _record_from_obj(raw: dict | str, store: RollingStore) -> IngestRecord:
    obj = json.loads(raw) if isinstance(raw, str) else raw
    emb = obj["embedding"]
    row = parse_meta_obj({k: v for k, v in obj.items() if k != "embedding"})
    return IngestRecord(
        item_id=row.item_id,
        product_id=row.product_id,
        title=row.title,
        embedding=EmbeddingVector(np.asarray(emb, dtype=np.float64)),
        timestamp=row.timestamp,
    )


def records_from_files(vectors_path, meta_path) -> Iterator[IngestRecord]:
    """Pair a SIRV vector file with its JSONL metadata sidecar, by id."""
    dim, pairs = read_sirv(vectors_path)
    vecs = dict(pairs)
    for row in iter_meta_jsonl(meta_path):
        vec = vecs.get(row.item_id)
        if vec is None:
            raise IntegrityError(f"{meta_path}: id {row.item_id!r} missing from {vectors_path}")
        yield IngestRecord(
            item_id=row.item_id,
            product_id=row.product_id,
            title=row.title,
            embedding=EmbeddingVector(vec.astype(np.float64)),
            timestamp=row.timestamp,
        )
