"""Block hashing primitives and the avalanche collision harness.

Five algorithms are supported for dirty-block detection. The 32-bit ones
(Adler32, CRC32, both Fletcher32 variants) produce 4-byte digests; MD5
produces 16 bytes. Adler32 and CRC32 are the zlib-compatible variants
(Adler modulus 65521; CRC poly 0xEDB88320 reflected, init and xor-out
0xFFFFFFFF). Fletcher32 is implemented here because the two moduli have
to be selectable: the textbook 2^16-1 modulus cannot distinguish an
aligned 16-bit word of 0x0000 from one of 0xFFFF, which is exactly the
collision class `fletcher32_collision_pair` demonstrates.

The collision harness measures how often a hash fails to notice small
XOR mutations of a random block. Mutations accumulate: element i of the
work buffer is XORed with the pattern and the whole buffer is hashed and
compared against the digest of the pristine buffer, so the i-th
comparison sees i modified elements. Single-element deltas can never
collide for the sum-based hashes (a lone +-1 byte change always moves
the first sum), but accumulated deltas cancel surprisingly often.
"""

from __future__ import annotations

import enum
import hashlib
import struct
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "HashAlgorithm",
    "Digest",
    "CollisionCell",
    "CollisionReport",
    "DEFAULT_PATTERNS",
    "PATTERN_P5",
    "digest_width",
    "hash_block",
    "fletcher32",
    "fletcher32_collision_pair",
    "avalanche_collision_test",
]


class HashAlgorithm(enum.Enum):
    ADLER32 = "adler32"
    FLETCHER32_M65536 = "fletcher32-m65536"
    FLETCHER32_M65535 = "fletcher32-m65535"
    CRC32 = "crc32"
    MD5 = "md5"

    @classmethod
    def from_name(cls, name: str) -> "HashAlgorithm":
        for alg in cls:
            if alg.value == name:
                return alg
        raise ValueError(f"unknown hash algorithm {name!r}")


_WIDTHS = {
    HashAlgorithm.ADLER32: 4,
    HashAlgorithm.FLETCHER32_M65536: 4,
    HashAlgorithm.FLETCHER32_M65535: 4,
    HashAlgorithm.CRC32: 4,
    HashAlgorithm.MD5: 16,
}


def digest_width(algorithm: HashAlgorithm) -> int:
    """Digest size in bytes: 4 for the 32-bit checksums, 16 for MD5."""
    return _WIDTHS[algorithm]


@dataclass(frozen=True)
class Digest:
    """An algorithm-tagged digest. Digests of different algorithms never compare equal."""

    algorithm: HashAlgorithm
    value: bytes

    def __post_init__(self):
        if len(self.value) != digest_width(self.algorithm):
            raise ValueError(
                f"{self.algorithm.value} digest must be "
                f"{digest_width(self.algorithm)} bytes, got {len(self.value)}"
            )

    def hex(self) -> str:
        return self.value.hex()


# Fletcher sums are accumulated in uint64. With 2^20 words per slab the
# weighted sum stays below 65535 * 2^40 < 2^57, so no intermediate wraps.
_FLETCHER_SLAB_WORDS = 1 << 20
_fletcher_weights = np.arange(_FLETCHER_SLAB_WORDS, 0, -1, dtype=np.uint64)


def fletcher32(data, modulus: int = 65535) -> int:
    """Fletcher-32 over little-endian 16-bit words, odd tail zero-padded.

    modulus selects the reduction: 65535 is the classic one (and matches
    the public "abcde" -> 0xF04FC729 vectors once sums are fully reduced);
    65536 trades the modular reduction for a plain mask.
    """
    if modulus not in (65535, 65536):
        raise ValueError(f"fletcher32 modulus must be 65535 or 65536, got {modulus}")
    buf = memoryview(data).cast("B") if not isinstance(data, (bytes, bytearray)) else memoryview(data)
    if len(buf) % 2:
        buf = bytes(buf) + b"\x00"
    words = np.frombuffer(buf, dtype="<u2")
    s1 = 0
    s2 = 0
    n = len(words)
    for start in range(0, n, _FLETCHER_SLAB_WORDS):
        slab = words[start : start + _FLETCHER_SLAB_WORDS].astype(np.uint64)
        m = len(slab)
        sig1 = int(slab.sum(dtype=np.uint64))
        # within-slab weighted sum: word k (0-based) counts m - k times
        sig2 = int(np.dot(slab, _fletcher_weights[_FLETCHER_SLAB_WORDS - m :]))
        s2 = (s2 + m * s1 + sig2) % modulus
        s1 = (s1 + sig1) % modulus
    return (s2 << 16) | s1


def fletcher32_collision_pair(words: int = 4, position: int = 1) -> tuple[bytes, bytes]:
    """Two buffers that collide under fletcher32(modulus=65535).

    The buffers differ only in one aligned 16-bit word: 0x0000 in the
    first, 0xFFFF in the second. Both are congruent mod 65535, so both
    running sums agree. The 2^16 modulus separates them.
    """
    if not 0 <= position < words:
        raise ValueError("position out of range")
    a = bytearray(words * 2)
    b = bytearray(words * 2)
    b[2 * position] = 0xFF
    b[2 * position + 1] = 0xFF
    return bytes(a), bytes(b)


# Raw word-sized hash values, one callable per algorithm. hash_block wraps
# these in a tagged Digest; the collision harness compares them bare because
# it makes tens of millions of comparisons.
_RAW_HASHERS = {
    HashAlgorithm.ADLER32: zlib.adler32,
    HashAlgorithm.CRC32: zlib.crc32,
    HashAlgorithm.FLETCHER32_M65536: lambda data: fletcher32(data, 65536),
    HashAlgorithm.FLETCHER32_M65535: lambda data: fletcher32(data, 65535),
    HashAlgorithm.MD5: lambda data: hashlib.md5(data).digest(),
}


def hash_block(data, algorithm: HashAlgorithm) -> Digest:
    """Hash one block. Empty input is legal and well-defined for every algorithm."""
    try:
        raw = _RAW_HASHERS[algorithm](data)
    except KeyError:
        raise ValueError(f"unknown hash algorithm {algorithm!r}") from None
    if algorithm is HashAlgorithm.MD5:
        return Digest(algorithm, raw)
    return Digest(algorithm, struct.pack(">I", raw))


# Patterns p0..p4 escalate from a single flipped bit to a flipped 16-bit
# lane; p5 is an arbitrary fixed constant that touches all four 16-bit
# lanes of a 64-bit element.
PATTERN_P5 = 0x0123456789ABCDEF
DEFAULT_PATTERNS: tuple[int, ...] = (0x1, 0x3, 0xFF, 0xFFF, 0xFFFF, PATTERN_P5)


@dataclass(frozen=True)
class CollisionCell:
    algorithm: HashAlgorithm
    block_size: int
    pattern: int
    iterations: int
    collisions: int

    @property
    def rate(self) -> float:
        return self.collisions / self.iterations


@dataclass
class CollisionReport:
    """Collision counts per (algorithm, block size, pattern) cell."""

    rng_seed: int
    cells: list[CollisionCell]

    def rate(self, algorithm: HashAlgorithm, block_size: int, pattern: int) -> float:
        for cell in self.cells:
            if (
                cell.algorithm is algorithm
                and cell.block_size == block_size
                and cell.pattern == pattern
            ):
                return cell.rate
        raise KeyError(f"no cell for ({algorithm.value}, {block_size}, {pattern:#x})")

    def write_csv(self, fileobj) -> None:
        fileobj.write("algorithm,block_size,pattern,iterations,collisions,rate\n")
        for c in self.cells:
            fileobj.write(
                f"{c.algorithm.value},{c.block_size},{c.pattern:#x},"
                f"{c.iterations},{c.collisions},{c.rate:.6e}\n"
            )


def avalanche_collision_test(
    algorithms: Iterable[HashAlgorithm],
    block_sizes: Iterable[int],
    patterns: Sequence[int] = DEFAULT_PATTERNS,
    iterations: int = 1_000_000,
    rng_seed: int = 0,
) -> CollisionReport:
    """Count hash collisions under accumulating XOR mutations.

    Per outer round and block size b, a fresh random block of b bytes
    (b/8 u64 elements) is hashed with every algorithm. For each pattern a
    working copy accumulates per-element XORs; after each element the
    whole block is re-hashed and compared against the pristine digest.
    `iterations` is the per-(algorithm, b, pattern) comparison count;
    it is rounded up to a whole number of blocks.

    The buffer stream is shared by all algorithms and patterns of one
    block size, and is drawn from PCG64 seeded with (rng_seed, b), so a
    fixed seed reproduces the exact counts. A parallel driver would
    split outer rounds into per-(rng_seed, b, chunk) streams; this
    implementation stays sequential.
    """
    algorithms = list(algorithms)
    block_sizes = list(block_sizes)
    patterns = list(patterns)
    if iterations <= 0:
        raise ValueError("iterations must be positive")
    for b in block_sizes:
        if b <= 0 or b % 8:
            raise ValueError(f"block size must be a positive multiple of 8, got {b}")

    cells: list[CollisionCell] = []
    hashers = [_RAW_HASHERS[alg] for alg in algorithms]
    for b in block_sizes:
        nb = b // 8
        outer = -(-iterations // nb)  # ceil
        comparisons = outer * nb
        counts = {(alg, p): 0 for alg in algorithms for p in patterns}
        rng = np.random.default_rng(np.random.SeedSequence((rng_seed, b)))
        pats = [np.uint64(p & 0xFFFFFFFFFFFFFFFF) for p in patterns]
        for _ in range(outer):
            pristine = np.frombuffer(rng.bytes(b), dtype="<u8")
            refs = [h(pristine) for h in hashers]
            for p, pat in zip(patterns, pats):
                work = pristine.copy()
                for i in range(nb):
                    work[i] ^= pat
                    for alg, h, ref in zip(algorithms, hashers, refs):
                        if h(work) == ref:
                            counts[(alg, p)] += 1
        for alg in algorithms:
            for p in patterns:
                cells.append(CollisionCell(alg, b, p, comparisons, counts[(alg, p)]))
    return CollisionReport(rng_seed=rng_seed, cells=cells)
