"""Binary/JSONL file formats: SIRV vector files, metadata sidecars, code blobs.

SIRV vector file (little-endian throughout):
  magic "SIRV" | u32 version=1 | u32 dim D | u64 count
  then per record: u16 id byte-length | UTF-8 id | D x float32

Metadata sidecar: JSONL, one object per record:
  {"id", "product_id", "title", "timestamp" (ISO-8601 UTC)}

codes.bin (segment code blob):
  magic "SIRC" | u32 version=1 | u32 code_bits B | u64 count
  then per record: u16 id byte-length | UTF-8 id | ceil(B/8) code bytes (big-endian bit order)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator

import numpy as np

from .codec import BinaryCode
from .errors import IntegrityError, UnsupportedVersionError

SIRV_MAGIC = b"SIRV"
SIRC_MAGIC = b"SIRC"
FORMAT_VERSION = 1


def write_sirv(path, dim: int, records: Iterable[tuple[str, np.ndarray]]) -> int:
    """Write (id, vector) records; returns count written."""
    records = list(records)
    with open(path, "wb") as f:
        f.write(SIRV_MAGIC)
        f.write(struct.pack("<IIQ", FORMAT_VERSION, dim, len(records)))
        for item_id, vec in records:
            raw_id = item_id.encode("utf-8")
            arr = np.asarray(vec, dtype="<f4")
            if arr.shape != (dim,):
                raise IntegrityError(f"vector for {item_id!r} has shape {arr.shape}, want ({dim},)")
            f.write(struct.pack("<H", len(raw_id)))
            f.write(raw_id)
            f.write(arr.tobytes())
    return len(records)


def read_sirv(path) -> tuple[int, list[tuple[str, np.ndarray]]]:
    """Read a SIRV file; returns (dim, [(id, float32 vector), ...])."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 20 or data[:4] != SIRV_MAGIC:
        raise IntegrityError(f"{path}: bad magic, not a SIRV file")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: SIRV version {version} unsupported")
    offset = 20
    out = []
    rec_bytes = 4 * dim
    for i in range(count):
        if offset + 2 > len(data):
            raise IntegrityError(f"{path}: truncated at record {i} (offset {offset})")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + rec_bytes > len(data):
            raise IntegrityError(f"{path}: truncated at record {i} (offset {offset})")
        item_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += rec_bytes
        out.append((item_id, vec))
    return dim, out


def write_codes(path, code_bits: int, records: Iterable[tuple[str, BinaryCode]]) -> int:
    records = list(records)
    with open(path, "wb") as f:
        f.write(SIRC_MAGIC)
        f.write(struct.pack("<IIQ", FORMAT_VERSION, code_bits, len(records)))
        for item_id, code in records:
            raw_id = item_id.encode("utf-8")
            f.write(struct.pack("<H", len(raw_id)))
            f.write(raw_id)
            f.write(code.to_bytes())
    return len(records)


def read_codes(path) -> tuple[int, list[tuple[str, BinaryCode]]]:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 20 or data[:4] != SIRC_MAGIC:
        raise IntegrityError(f"{path}: bad magic, not a code blob")
    version, code_bits, count = struct.unpack_from("<IIQ", data, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: code blob version {version} unsupported")
    nbytes = (code_bits + 7) // 8
    offset = 20
    out = []
    for i in range(count):
        if offset + 2 > len(data):
            raise IntegrityError(f"{path}: truncated at record {i} (offset {offset})")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + nbytes > len(data):
            raise IntegrityError(f"{path}: truncated at record {i} (offset {offset})")
        item_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        code = BinaryCode.from_bytes(data[offset : offset + nbytes], code_bits)
        offset += nbytes
        out.append((item_id, code))
    return code_bits, out


def parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class MetaRow:
    item_id: str
    product_id: str
    title: str
    timestamp: datetime


def write_meta_jsonl(path, rows: Iterable[MetaRow]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(
                json.dumps(
                    {
                        "id": row.item_id,
                        "product_id": row.product_id,
                        "title": row.title,
                        "timestamp": format_timestamp(row.timestamp),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            n += 1
    return n


def iter_meta_jsonl(path) -> Iterator[MetaRow]:
    """Parse rows; malformed lines raise ValueError per line (callers may skip)."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            yield parse_meta_obj(line, where=f"{path}:{lineno}")


def parse_meta_obj(raw: str | dict, where: str = "<meta>") -> MetaRow:
    try:
        obj = json.loads(raw) if isinstance(raw, str) else raw
        return MetaRow(
            item_id=str(obj["id"]),
            product_id=str(obj.get("product_id", "")),
            title=str(obj.get("title", "")),
            timestamp=parse_timestamp(obj["timestamp"]),
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ValueError(f"{where}: malformed metadata row: {exc}") from exc
