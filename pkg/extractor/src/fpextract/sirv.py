"""SIRV vector file writer, reader, and integrity verifier.

Format (little-endian throughout):
  magic "SIRV" | u32 version=1 | u32 dim D | u64 count
  then per record: u16 id byte-length | UTF-8 id | D x float32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

MAGIC = b"SIRV"
VERSION = 1
HEADER = struct.Struct("<IIQ")


class SirvIntegrityError(Exception):
    """Framing or content violation; the message names the byte offset."""


def write_sirv(path, dim: int, records: Iterable[tuple[str, np.ndarray]]) -> int:
    records = list(records)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(HEADER.pack(VERSION, dim, len(records)))
        for item_id, vec in records:
            raw_id = item_id.encode("utf-8")
            arr = np.asarray(vec, dtype="<f4")
            if arr.shape != (dim,):
                raise SirvIntegrityError(
                    f"vector for {item_id!r} has shape {arr.shape}, want ({dim},)"
                )
            f.write(struct.pack("<H", len(raw_id)))
            f.write(raw_id)
            f.write(arr.tobytes())
    return len(records)


def read_sirv(path) -> tuple[int, list[tuple[str, np.ndarray]]]:
    with open(path, "rb") as f:
        data = f.read()
    dim, out, _ = _parse(path, data)
    return dim, out


@dataclass
class VerifyReport:
    path: str
    dim: int
    count: int
    norms: list[float] = field(default_factory=list)
    nonfinite_records: list[int] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.nonfinite_records

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "dim": self.dim,
            "count": self.count,
            "min_norm": min(self.norms) if self.norms else 0.0,
            "max_norm": max(self.norms) if self.norms else 0.0,
            "nonfinite_records": self.nonfinite_records,
            "clean": self.clean,
        }


def verify_sirv(path) -> VerifyReport:
    """Validate framing and report per-record norms and non-finite values."""
    with open(path, "rb") as f:
        data = f.read()
    dim, records, _ = _parse(path, data)
    report = VerifyReport(path=str(path), dim=dim, count=len(records))
    for i, (_, vec) in enumerate(records):
        v64 = vec.astype(np.float64)
        if not np.all(np.isfinite(v64)):
            report.nonfinite_records.append(i)
            report.norms.append(float("nan"))
        else:
            report.norms.append(float(np.linalg.norm(v64)))
    return report


def _parse(path, data: bytes) -> tuple[int, list[tuple[str, np.ndarray]], int]:
    if len(data) < 20 or data[:4] != MAGIC:
        raise SirvIntegrityError(f"{path}: bad magic at offset 0, not a SIRV file")
    version, dim, count = HEADER.unpack_from(data, 4)
    if version != VERSION:
        raise SirvIntegrityError(f"{path}: unsupported version {version} at offset 4")
    if dim == 0:
        raise SirvIntegrityError(f"{path}: zero dim at offset 8")
    offset = 20
    rec_bytes = 4 * dim
    out = []
    for i in range(count):
        if offset + 2 > len(data):
            raise SirvIntegrityError(f"{path}: truncated at record {i} (offset {offset})")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + rec_bytes > len(data):
            raise SirvIntegrityError(f"{path}: truncated at record {i} (offset {offset})")
        item_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += rec_bytes
        out.append((item_id, vec))
    if offset != len(data):
        raise SirvIntegrityError(f"{path}: {len(data) - offset} trailing bytes at offset {offset}")
    return dim, out, offset
