"""Checkpoint file format: immutable virtual containers per dataset.

A checkpoint file holds one or more datasets. Each dataset owns a chain
of containers created in growth order. Container capacities and file
positions never change once written, which is what makes in-place
differential updates possible: a block keeps the same file offset for
as long as the file lives.

File layout (all integers little-endian, regions 8-byte aligned)::

    header:
        magic            8B   b"DCPKT\\x00\\x00\\x01"
        version          u32 + 4B pad
        block_size       u64
        algorithm        u8  + 7B pad
        checkpoint_id    u64
        dataset_count    u64
        dataset table    (dataset_id u64, committed_size u64) per dataset
        meta_checksum    16B  configured hash over everything above plus
                              every chunk meta; 32-bit digests zero-padded
    per container, in creation order:
        chunk meta       64B  (see pack_chunk_meta)
        payload          capacity bytes, zero-padded to 8-byte boundary

Growth appends a container sized at the excess; shrink leaves capacities
alone and only the live prefix (``chunk_size``) moves. Logical dataset
bytes map onto containers linearly in creation order.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Mapping

from .hashing import HashAlgorithm, hash_block

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "CHUNK_META_SIZE",
    "CHECKSUM_WIDTH",
    "ALGORITHM_CODES",
    "LayoutError",
    "CorruptionError",
    "ContainerSpec",
    "FileLayout",
    "ChunkState",
    "PhysicalExtent",
    "ReadResult",
    "align8",
    "header_size",
    "chunk_size",
    "dataset_containers",
    "dataset_capacity",
    "plan_layout",
    "file_size",
    "container_offsets",
    "logical_to_physical",
    "pack_chunk_meta",
    "unpack_chunk_meta",
    "pack_header",
    "checksum_bytes",
    "write_layout",
    "read_layout",
]

MAGIC = b"DCPKT\x00\x00\x01"
FORMAT_VERSION = 1
CHUNK_META_SIZE = 64
CHECKSUM_WIDTH = 16
_HEADER_FIXED = 48  # bytes before the dataset table

# wire codes are part of the format; never renumber
ALGORITHM_CODES = {
    HashAlgorithm.ADLER32: 1,
    HashAlgorithm.FLETCHER32_M65536: 2,
    HashAlgorithm.FLETCHER32_M65535: 3,
    HashAlgorithm.CRC32: 4,
    HashAlgorithm.MD5: 5,
}
_CODE_TO_ALGORITHM = {code: alg for alg, code in ALGORITHM_CODES.items()}


class LayoutError(ValueError):
    """Planning or write-side misuse: bad sizes, unknown datasets."""


class CorruptionError(RuntimeError):
    """A checkpoint file failed structural or checksum validation."""


@dataclass(frozen=True)
class ContainerSpec:
    """One immutable container: where it sits in dataset logical space."""

    dataset_id: int
    index: int
    logical_start: int
    capacity: int


@dataclass
class FileLayout:
    """Everything needed to compute any offset in a checkpoint file.

    ``sizes`` preserves insertion order; that order is the header table
    order. ``containers`` is global creation order, which is file order.
    """

    block_size: int
    algorithm: HashAlgorithm
    checkpoint_id: int
    sizes: dict[int, int]
    containers: list[ContainerSpec] = field(default_factory=list)


@dataclass
class ChunkState:
    """Per-container live state as it exists on disk."""

    spec: ContainerSpec
    chunk_size: int
    payload_checksum: bytes


@dataclass(frozen=True)
class PhysicalExtent:
    """A contiguous byte run inside one container's payload."""

    container_index: int
    offset_in_container: int
    file_offset: int
    length: int


@dataclass
class ReadResult:
    layout: FileLayout
    buffers: dict[int, bytearray]
    chunks: list[ChunkState]


def align8(n: int) -> int:
    return (n + 7) & ~7


def header_size(dataset_count: int) -> int:
    return _HEADER_FIXED + 16 * dataset_count + CHECKSUM_WIDTH


def chunk_size(layout: FileLayout, spec: ContainerSpec) -> int:
    """Live bytes inside a container for the layout's current sizes."""
    live = layout.sizes[spec.dataset_id] - spec.logical_start
    return max(0, min(spec.capacity, live))


def dataset_containers(layout: FileLayout, dataset_id: int) -> list[ContainerSpec]:
    return [c for c in layout.containers if c.dataset_id == dataset_id]


def dataset_capacity(layout: FileLayout, dataset_id: int) -> int:
    return sum(c.capacity for c in dataset_containers(layout, dataset_id))


def plan_layout(
    previous: FileLayout | None,
    sizes: Mapping[int, int],
    *,
    checkpoint_id: int,
    block_size: int | None = None,
    algorithm: HashAlgorithm | None = None,
) -> FileLayout:
    """Plan the container set for the given dataset sizes.

    Fresh plan (previous is None): one container per non-empty dataset,
    sized exactly. Incremental plan: the dataset id set must match the
    previous layout exactly, because the header table is fixed-position;
    a changed membership raises LayoutError and the caller is expected
    to start a fresh file instead. Growth past current capacity appends
    an excess-sized container per dataset, in table order.
    """
    for ds_id, size in sizes.items():
        if ds_id < 0:
            raise LayoutError(f"dataset id must be non-negative, got {ds_id}")
        if size < 0:
            raise LayoutError(f"dataset {ds_id} size must be non-negative, got {size}")

    if previous is None:
        if block_size is None or algorithm is None:
            raise LayoutError("fresh plan needs block_size and algorithm")
        if block_size <= 0:
            raise LayoutError(f"block_size must be positive, got {block_size}")
        layout = FileLayout(block_size, algorithm, checkpoint_id, dict(sizes))
        for ds_id, size in sizes.items():
            if size > 0:
                layout.containers.append(ContainerSpec(ds_id, 0, 0, size))
        return layout

    if block_size not in (None, previous.block_size):
        raise LayoutError("block_size cannot change within a checkpoint file")
    if algorithm not in (None, previous.algorithm):
        raise LayoutError("algorithm cannot change within a checkpoint file")
    if set(sizes) != set(previous.sizes):
        added = sorted(set(sizes) - set(previous.sizes))
        missing = sorted(set(previous.sizes) - set(sizes))
        raise LayoutError(
            f"dataset membership is fixed per file (added={added}, missing={missing})"
        )

    ordered = {ds_id: sizes[ds_id] for ds_id in previous.sizes}
    layout = FileLayout(
        previous.block_size,
        previous.algorithm,
        checkpoint_id,
        ordered,
        list(previous.containers),
    )
    for ds_id, size in ordered.items():
        have = dataset_capacity(layout, ds_id)
        if size > have:
            index = len(dataset_containers(layout, ds_id))
            layout.containers.append(ContainerSpec(ds_id, index, have, size - have))
    return layout


def file_size(layout: FileLayout) -> int:
    total = header_size(len(layout.sizes))
    for spec in layout.containers:
        total += CHUNK_META_SIZE + align8(spec.capacity)
    return total


def container_offsets(layout: FileLayout) -> dict[tuple[int, int], tuple[int, int]]:
    """Map (dataset_id, index) -> (chunk meta offset, payload offset)."""
    out = {}
    pos = header_size(len(layout.sizes))
    for spec in layout.containers:
        out[(spec.dataset_id, spec.index)] = (pos, pos + CHUNK_META_SIZE)
        pos += CHUNK_META_SIZE + align8(spec.capacity)
    return out


def logical_to_physical(
    layout: FileLayout, dataset_id: int, byte_offset: int, byte_length: int
) -> list[PhysicalExtent]:
    """Split a logical extent into per-container physical extents.

    Extents come back in logical order and cover the request exactly;
    a request reaching past the dataset's capacity raises LayoutError.
    """
    if byte_offset < 0 or byte_length < 0:
        raise LayoutError("extent offset and length must be non-negative")
    offsets = container_offsets(layout)
    out: list[PhysicalExtent] = []
    remaining = byte_length
    pos = byte_offset
    for spec in dataset_containers(layout, dataset_id):
        if remaining == 0:
            break
        end = spec.logical_start + spec.capacity
        if pos >= end:
            continue
        inner = pos - spec.logical_start
        take = min(remaining, spec.capacity - inner)
        _, payload = offsets[(dataset_id, spec.index)]
        out.append(PhysicalExtent(spec.index, inner, payload + inner, take))
        pos += take
        remaining -= take
    if remaining:
        raise LayoutError(
            f"extent [{byte_offset}, {byte_offset + byte_length}) exceeds "
            f"dataset {dataset_id} capacity {dataset_capacity(layout, dataset_id)}"
        )
    return out


def pack_chunk_meta(spec: ContainerSpec, chunk: int, checksum: bytes) -> bytes:
    if len(checksum) != CHECKSUM_WIDTH:
        raise LayoutError(f"payload checksum must be {CHECKSUM_WIDTH} bytes")
    return struct.pack(
        "<QLLQQ16s16s",
        spec.dataset_id,
        spec.index,
        0,
        chunk,
        spec.capacity,
        checksum,
        b"",
    )


def unpack_chunk_meta(data: bytes) -> tuple[int, int, int, int, bytes]:
    ds_id, index, _pad, chunk, capacity, checksum, _res = struct.unpack(
        "<QLLQQ16s16s", data
    )
    return ds_id, index, chunk, capacity, checksum


def _header_prefix(layout: FileLayout) -> bytes:
    parts = [
        struct.pack(
            "<8sL4xQB7xQQ",
            MAGIC,
            FORMAT_VERSION,
            layout.block_size,
            ALGORITHM_CODES[layout.algorithm],
            layout.checkpoint_id,
            len(layout.sizes),
        )
    ]
    for ds_id, size in layout.sizes.items():
        parts.append(struct.pack("<QQ", ds_id, size))
    return b"".join(parts)


def pack_header(layout: FileLayout, chunk_metas: list[bytes]) -> bytes:
    """Full header bytes; the trailing checksum seals header + metas."""
    prefix = _header_prefix(layout)
    return prefix + checksum_bytes(layout.algorithm, prefix + b"".join(chunk_metas))


def checksum_bytes(algorithm: HashAlgorithm, data) -> bytes:
    """Checksum field content: the digest, zero-padded to 16 bytes.

    Checkpoint files carry checksums in the same algorithm the engine
    hashes blocks with; 32-bit digests occupy the first 4 bytes.
    """
    return hash_block(data, algorithm).value.ljust(CHECKSUM_WIDTH, b"\x00")


def _as_stream(dest, mode: str):
    if isinstance(dest, (str, os.PathLike)):
        return open(dest, mode), True
    return dest, False


def write_layout(dest, layout: FileLayout, buffers: Mapping[int, object]) -> list[ChunkState]:
    """Write a complete checkpoint file. Returns per-container state.

    ``dest`` is a path or a writable binary stream. Buffer lengths must
    match layout sizes exactly. Slack capacity past the live prefix is
    zero-filled.
    """
    for ds_id, size in layout.sizes.items():
        if ds_id not in buffers:
            raise LayoutError(f"no buffer supplied for dataset {ds_id}")
        view = memoryview(buffers[ds_id]).cast("B")
        if len(view) != size:
            raise LayoutError(
                f"dataset {ds_id} buffer is {len(view)} bytes, layout says {size}"
            )

    chunks: list[ChunkState] = []
    metas: list[bytes] = []
    payloads: list[bytes] = []
    for spec in layout.containers:
        live = chunk_size(layout, spec)
        view = memoryview(buffers[spec.dataset_id]).cast("B")
        body = bytes(view[spec.logical_start : spec.logical_start + live])
        digest = checksum_bytes(layout.algorithm, body)
        chunks.append(ChunkState(spec, live, digest))
        metas.append(pack_chunk_meta(spec, live, digest))
        payloads.append(body + bytes(align8(spec.capacity) - live))

    stream, owned = _as_stream(dest, "wb")
    try:
        stream.write(pack_header(layout, metas))
        for meta, payload in zip(metas, payloads):
            stream.write(meta)
            stream.write(payload)
        stream.flush()
    finally:
        if owned:
            stream.close()
    return chunks


def _read_exact(stream: BinaryIO, n: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise CorruptionError(f"truncated file: short read in {what}")
    return data


def read_layout(src) -> ReadResult:
    """Parse and fully validate a checkpoint file.

    Every structural rule is checked: magic, version, table sanity,
    container ordering and coverage, both checksum layers. Datasets are
    reassembled into bytearrays sized at their committed sizes.
    """
    stream, owned = _as_stream(src, "rb")
    try:
        return _read_layout_stream(stream)
    finally:
        if owned:
            stream.close()


def _read_layout_stream(stream: BinaryIO) -> ReadResult:
    fixed = _read_exact(stream, _HEADER_FIXED, "header")
    magic, version, block_size, alg_code, checkpoint_id, count = struct.unpack(
        "<8sL4xQB7xQQ", fixed
    )
    if magic != MAGIC:
        raise CorruptionError("not a checkpoint file (bad magic)")
    if version != FORMAT_VERSION:
        raise CorruptionError(f"unsupported format version {version}")
    if alg_code not in _CODE_TO_ALGORITHM:
        raise CorruptionError(f"unknown hash algorithm code {alg_code}")
    if block_size <= 0:
        raise CorruptionError(f"invalid block size {block_size}")

    table = _read_exact(stream, 16 * count, "dataset table")
    sizes: dict[int, int] = {}
    for i in range(count):
        ds_id, size = struct.unpack_from("<QQ", table, 16 * i)
        if ds_id in sizes:
            raise CorruptionError(f"dataset {ds_id} appears twice in header table")
        sizes[ds_id] = size
    stored_meta_checksum = _read_exact(stream, CHECKSUM_WIDTH, "header checksum")

    layout = FileLayout(
        block_size, _CODE_TO_ALGORITHM[alg_code], checkpoint_id, sizes
    )
    buffers = {ds_id: bytearray(size) for ds_id, size in sizes.items()}
    chunks: list[ChunkState] = []
    metas: list[bytes] = []
    per_ds_count: dict[int, int] = {ds_id: 0 for ds_id in sizes}
    per_ds_start: dict[int, int] = {ds_id: 0 for ds_id in sizes}

    while True:
        meta = stream.read(CHUNK_META_SIZE)
        if not meta:
            break
        if len(meta) != CHUNK_META_SIZE:
            raise CorruptionError("truncated file: short read in chunk meta")
        ds_id, index, chunk, capacity, checksum = unpack_chunk_meta(meta)
        if ds_id not in sizes:
            raise CorruptionError(
                f"container for dataset {ds_id} which is not in the header table"
            )
        if index != per_ds_count[ds_id]:
            raise CorruptionError(
                f"dataset {ds_id} container {index} out of order "
                f"(expected {per_ds_count[ds_id]})"
            )
        start = per_ds_start[ds_id]
        spec = ContainerSpec(ds_id, index, start, capacity)
        expect_chunk = chunk_size(layout, spec)
        if chunk != expect_chunk:
            raise CorruptionError(
                f"dataset {ds_id} container {index} chunk size {chunk} "
                f"does not match committed size (expected {expect_chunk})"
            )
        payload = _read_exact(
            stream, align8(capacity), f"dataset {ds_id} container {index} payload"
        )
        if checksum_bytes(layout.algorithm, payload[:chunk]) != checksum:
            raise CorruptionError(
                f"dataset {ds_id} container {index} payload checksum mismatch"
            )
        buffers[ds_id][start : start + chunk] = payload[:chunk]
        layout.containers.append(spec)
        chunks.append(ChunkState(spec, chunk, checksum))
        metas.append(meta)
        per_ds_count[ds_id] += 1
        per_ds_start[ds_id] += capacity

    for ds_id, size in sizes.items():
        if per_ds_start[ds_id] < size:
            raise CorruptionError(
                f"dataset {ds_id} containers cover {per_ds_start[ds_id]} bytes, "
                f"committed size is {size}"
            )

    if pack_header(layout, metas)[-CHECKSUM_WIDTH:] != stored_meta_checksum:
        raise CorruptionError("metadata checksum mismatch")
    return ReadResult(layout, buffers, chunks)
