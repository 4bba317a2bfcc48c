"""Binarization codec: random-projection codes, subcode splitting, distances.

An embedding is mapped to a B-bit code by the signs of B random-hyperplane
projections (sign-random-projection LSH).  The hyperplane coefficients are
drawn from a standard normal distribution with a fully specified, portable
generator so the same (seed, D, B) triple yields bitwise-identical codes on
any platform:

  * uniform stream: SplitMix64.  The k-th 64-bit output (k = 1, 2, ...) is
    mix(seed + k * 0x9E3779B97F4A7C15 mod 2^64) where
    mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
            z *= 0x94D049BB133111EB; z ^= z >> 31   (all mod 2^64)
  * each 64-bit word x becomes a double u = (x >> 11) * 2^-53; a u1 of
    exactly 0.0 is replaced by 2^-53
  * normals come from Box-Muller on consecutive uniform pairs (u1, u2):
    n0 = sqrt(-2 ln u1) * cos(2 pi u2), n1 = sqrt(-2 ln u1) * sin(2 pi u2)
  * coefficient matrix is row-major: hyperplane j uses normals
    [j*D, (j+1)*D)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVectorError, InvalidConfigError, ShapeError

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_U53 = 2.0 ** -53


@dataclass(frozen=True)
class EmbeddingVector:
    """D-dimensional real fingerprint of one item."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidConfigError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise InvalidConfigError("embedding contains NaN or infinity")
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class BinaryCode:
    """B-bit code stored as a Python int; bit j=0 is the most significant."""

    bits: int
    length: int

    def __post_init__(self):
        if self.length <= 0:
            raise InvalidConfigError("code length must be positive")
        if self.bits < 0 or self.bits >> self.length:
            raise InvalidConfigError("bits do not fit in declared length")

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes((self.length + 7) // 8, "big")

    @classmethod
    def from_bytes(cls, raw: bytes, length: int) -> "BinaryCode":
        if len(raw) != (length + 7) // 8:
            raise ShapeError(f"expected {(length + 7) // 8} bytes for {length}-bit code")
        return cls(int.from_bytes(raw, "big"), length)

    def __str__(self) -> str:
        return format(self.bits, f"0{self.length}b")


@dataclass(frozen=True)
class CodecConfig:
    """Code geometry: D input dims, B code bits split into m subcodes of s bits."""

    dim: int
    code_bits: int
    subcode_count: int
    projection_seed: int = 0

    def __post_init__(self):
        if self.dim <= 0:
            raise InvalidConfigError("dim must be positive")
        if self.code_bits <= 0:
            raise InvalidConfigError("code_bits must be positive")
        if self.subcode_count < 1:
            raise InvalidConfigError("subcode_count must be >= 1")
        if self.code_bits % self.subcode_count != 0:
            raise InvalidConfigError(
                f"code_bits {self.code_bits} not divisible by subcode_count {self.subcode_count}"
            )
        if self.subcode_bits > 64:
            raise InvalidConfigError("subcode_bits must fit in one machine word (<= 64)")

    @property
    def subcode_bits(self) -> int:
        return self.code_bits // self.subcode_count

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "code_bits": self.code_bits,
            "subcode_count": self.subcode_count,
            "projection_seed": self.projection_seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CodecConfig":
        return cls(
            dim=int(obj["dim"]),
            code_bits=int(obj["code_bits"]),
            subcode_count=int(obj["subcode_count"]),
            projection_seed=int(obj["projection_seed"]),
        )


@dataclass(frozen=True)
class ProjectionPlan:
    """B random hyperplanes in D dimensions, fully determined by (seed, D, B)."""

    seed: int
    dim_in: int
    bits_out: int
    hyperplanes: np.ndarray = field(repr=False)


def _splitmix64(seed: int, count: int) -> np.ndarray:
    """First `count` outputs of SplitMix64 seeded with `seed`, vectorized."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * np.uint64(_GOLDEN)) & _MASK64
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)) & _MASK64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)) & _MASK64
    return z ^ (z >> np.uint64(31))


def standard_normals(seed: int, count: int) -> np.ndarray:
    """Portable standard-normal stream (SplitMix64 + Box-Muller, see module doc)."""
    if count < 0:
        raise InvalidConfigError("count must be non-negative")
    pairs = (count + 1) // 2
    words = _splitmix64(seed, 2 * pairs)
    u = (words >> np.uint64(11)).astype(np.float64) * _U53
    u1 = u[0::2]
    u2 = u[1::2]
    u1 = np.where(u1 == 0.0, _U53, u1)
    radius = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = radius * np.cos(2.0 * math.pi * u2)
    out[1::2] = radius * np.sin(2.0 * math.pi * u2)
    return out[:count]


def build_projection_plan(seed: int, dim_in: int, bits_out: int) -> ProjectionPlan:
    """Deterministic random-hyperplane plan keyed only by (seed, dim_in, bits_out)."""
    if dim_in <= 0 or bits_out <= 0:
        raise InvalidConfigError("dim_in and bits_out must be positive")
    coeffs = standard_normals(seed, bits_out * dim_in).reshape(bits_out, dim_in)
    coeffs.setflags(write=False)
    return ProjectionPlan(seed=seed, dim_in=dim_in, bits_out=bits_out, hyperplanes=coeffs)


def plan_for(config: CodecConfig) -> ProjectionPlan:
    return build_projection_plan(config.projection_seed, config.dim, config.code_bits)


def _pack_row(row: np.ndarray, bits_out: int) -> int:
    packed = np.packbits(row)
    value = int.from_bytes(packed.tobytes(), "big")
    return value >> ((8 - bits_out % 8) % 8)


def binarize(plan: ProjectionPlan, v: EmbeddingVector) -> BinaryCode:
    """Sign-of-projection code; a dot product of exactly zero maps to bit 1."""
    if v.dim != plan.dim_in:
        raise ShapeError(f"vector dim {v.dim} != plan dim {plan.dim_in}")
    signs = (plan.hyperplanes @ v.values) >= 0.0
    return BinaryCode(_pack_row(signs, plan.bits_out), plan.bits_out)


def binarize_batch(plan: ProjectionPlan, matrix: np.ndarray) -> list[BinaryCode]:
    """Binarize one embedding per row of `matrix`."""
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != plan.dim_in:
        raise ShapeError(f"expected (n, {plan.dim_in}) matrix, got {mat.shape}")
    signs = (mat @ plan.hyperplanes.T) >= 0.0
    b = plan.bits_out
    return [BinaryCode(_pack_row(row, b), b) for row in signs]


def split_subcodes(code: BinaryCode, m: int) -> list[tuple[int, int]]:
    """(position, value) slices of `code`, most-significant-first."""
    if m < 1 or code.length % m != 0:
        raise InvalidConfigError(f"code length {code.length} not divisible by m={m}")
    s = code.length // m
    mask = (1 << s) - 1
    return [(p, (code.bits >> (code.length - (p + 1) * s)) & mask) for p in range(m)]


def hamming(a: BinaryCode, b: BinaryCode) -> int:
    """Population count of XOR; word-level, no per-bit loop."""
    if a.length != b.length:
        raise ShapeError(f"code lengths differ: {a.length} != {b.length}")
    return (a.bits ^ b.bits).bit_count()


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise ShapeError(f"dims differ: {a.dim} != {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("cosine undefined for zero-norm vector")
    return float(np.dot(a.values, b.values) / (na * nb))
