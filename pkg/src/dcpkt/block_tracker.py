"""Per-block hash metadata and dirty-region scanning.

A dataset is partitioned into fixed-size blocks; the final block may be
partial and is always hashed over its actual byte span. Each block keeps
a (valid, dirty, digest) triple:

- valid == False: the block was never committed at its current span
  (brand new, or the span changed when the dataset grew). It must be
  written unconditionally and has no digest to compare against.
- dirty == True: the committed digest no longer matches the block's
  current content. Set during scanning, cleared when digests commit.

Digests are only updated by commit_hashes(), never during detection, so
a failed checkpoint attempt leaves the metadata exactly as it was and a
retry re-detects the same dirty set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from .hashing import Digest, HashAlgorithm, digest_width, hash_block

__all__ = [
    "HashBlockMeta",
    "DatasetDescriptor",
    "DirtyRegion",
    "block_count",
    "register_blocks",
    "next_dirty_region",
    "bytes_view",
    "commit_hashes",
    "dirty_stats",
    "metadata_bytes",
]

log = logging.getLogger(__name__)

# valid + dirty, one byte each, accounted next to the stored digest
_FLAG_BYTES = 2


@dataclass
class HashBlockMeta:
    valid: bool = False
    dirty: bool = False
    digest: Digest | None = None


@dataclass
class DatasetDescriptor:
    """Tracking state for one protected dataset."""

    dataset_id: int
    block_size: int
    algorithm: HashAlgorithm
    size_bytes: int = 0
    committed_size_bytes: int = 0
    blocks: list[HashBlockMeta] = field(default_factory=list)

    def __post_init__(self):
        if self.dataset_id < 0:
            raise ValueError("dataset id must be non-negative")
        if self.block_size <= 0:
            raise ValueError("block size must be positive")


@dataclass(frozen=True)
class DirtyRegion:
    """A maximal run of consecutive dirty-or-invalid blocks."""

    dataset_id: int
    start_block: int
    block_count: int
    byte_offset: int
    byte_length: int  # trimmed to the dataset size at the tail


def block_count(size_bytes: int, block_size: int) -> int:
    return -(-size_bytes // block_size)


def bytes_view(data) -> memoryview:
    """A flat unsigned-byte view of any C-contiguous buffer."""
    view = data if isinstance(data, memoryview) else memoryview(data)
    if view.format != "B" or view.ndim != 1:
        view = view.cast("B")
    return view


def _span(ds: DatasetDescriptor, index: int) -> tuple[int, int]:
    start = index * ds.block_size
    return start, min(ds.size_bytes, start + ds.block_size)


def register_blocks(ds: DatasetDescriptor, new_size_bytes: int) -> None:
    """Resize the block array for a dataset now new_size_bytes long.

    Growth appends fresh invalid entries and invalidates every block not
    fully covered by the committed size: beyond the old committed tail
    the file content is undefined, and the block that straddled the old
    boundary now hashes over a longer span than its stored digest did.
    Shrink just truncates; surviving blocks keep their flags (a tail
    digest that covered a longer span simply mismatches and the block
    gets rewritten).
    """
    if new_size_bytes < 0:
        raise ValueError("dataset size must be non-negative")
    n_new = block_count(new_size_bytes, ds.block_size)
    old_size = ds.size_bytes
    if n_new < len(ds.blocks):
        del ds.blocks[n_new:]
    while len(ds.blocks) < n_new:
        ds.blocks.append(HashBlockMeta())
    if new_size_bytes > ds.committed_size_bytes:
        first_uncovered = ds.committed_size_bytes // ds.block_size
        for meta in ds.blocks[first_uncovered:]:
            meta.valid = False
            meta.dirty = False
            meta.digest = None
    ds.size_bytes = new_size_bytes
    if new_size_bytes != old_size:
        log.debug(
            "dataset %d resized %d -> %d bytes (%d blocks)",
            ds.dataset_id, old_size, new_size_bytes, n_new,
        )


def _block_changed(ds: DatasetDescriptor, data, index: int) -> bool:
    """True if block `index` must be written. Marks the dirty flag on mismatch."""
    meta = ds.blocks[index]
    if not meta.valid:
        return True
    if meta.dirty:
        return True
    start, end = _span(ds, index)
    if hash_block(data[start:end], ds.algorithm) != meta.digest:
        meta.dirty = True
        return True
    return False


def next_dirty_region(
    ds: DatasetDescriptor, data, cursor: int
) -> tuple[DirtyRegion, int] | None:
    """Find the next run of blocks that must be written, at or after cursor.

    data is a buffer of exactly ds.size_bytes bytes. Returns the region
    and the cursor to resume scanning from, or None once every remaining
    block is clean. Blocks whose hash mismatches get their dirty flag
    set; digests are not touched (that is commit_hashes' job).
    """
    n = len(ds.blocks)
    if not 0 <= cursor <= n:
        raise ValueError(f"cursor {cursor} out of range [0, {n}]")
    view = bytes_view(data)
    if len(view) != ds.size_bytes:
        raise ValueError(
            f"data is {len(view)} bytes but dataset {ds.dataset_id} "
            f"is registered at {ds.size_bytes}"
        )
    i = cursor
    while i < n and not _block_changed(ds, view, i):
        i += 1
    if i == n:
        return None
    j = i + 1
    while j < n and _block_changed(ds, view, j):
        j += 1
    start_byte = i * ds.block_size
    end_byte = min(ds.size_bytes, j * ds.block_size)
    region = DirtyRegion(
        dataset_id=ds.dataset_id,
        start_block=i,
        block_count=j - i,
        byte_offset=start_byte,
        byte_length=end_byte - start_byte,
    )
    # block j was verified clean (or is the end), so resume past it
    return region, min(j + 1, n)


def commit_hashes(ds: DatasetDescriptor, data) -> int:
    """Recompute digests for every dirty-or-invalid block and mark all valid.

    Only called after the checkpoint file is safely committed: updating
    digests earlier would make a failed attempt silently lose the dirty
    set. Returns the number of blocks rehashed.
    """
    view = bytes_view(data)
    if len(view) != ds.size_bytes:
        raise ValueError(
            f"data is {len(view)} bytes but dataset {ds.dataset_id} "
            f"is registered at {ds.size_bytes}"
        )
    rehashed = 0
    for index, meta in enumerate(ds.blocks):
        if meta.valid and not meta.dirty:
            continue
        start, end = _span(ds, index)
        meta.digest = hash_block(view[start:end], ds.algorithm)
        meta.valid = True
        meta.dirty = False
        rehashed += 1
    ds.committed_size_bytes = ds.size_bytes
    return rehashed


def dirty_stats(pairs: Iterable[tuple[DatasetDescriptor, bytes]]) -> float:
    """Fraction of dirty-or-invalid blocks across datasets, flags untouched.

    Recomputes hashes for the comparison instead of relying on (or
    setting) the dirty flags. Zero registered blocks yields 0.0.
    """
    total = 0
    changed = 0
    for ds, data in pairs:
        view = bytes_view(data)
        if len(view) != ds.size_bytes:
            raise ValueError(
                f"data is {len(view)} bytes but dataset {ds.dataset_id} "
                f"is registered at {ds.size_bytes}"
            )
        for index, meta in enumerate(ds.blocks):
            total += 1
            if not meta.valid:
                changed += 1
                continue
            start, end = _span(ds, index)
            if hash_block(view[start:end], ds.algorithm) != meta.digest:
                changed += 1
    return changed / total if total else 0.0


def metadata_bytes(ds: DatasetDescriptor) -> int:
    """Exact in-memory metadata footprint: blocks * (digest width + flags)."""
    return len(ds.blocks) * (digest_width(ds.algorithm) + _FLAG_BYTES)
