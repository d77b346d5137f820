"""Differential checkpoint engine: detection, staging, atomic commit.

The engine owns a directory of checkpoint files and a set of protected
in-memory regions. Every checkpoint lands through the same protocol:

1. duplicate the committed file to a staging file
2. update only stale blocks in place (plus affected container metadata)
3. fsync, then atomically rename staging over the new checkpoint name
4. only after the rename is durable, commit the new block hashes

Block hashes therefore always describe a file that actually exists on
disk. A crash at any point leaves either the old committed file or the
new one, never a blend, and at worst a stale ``.staging``/``.tmp`` that
the next engine sweeps away. If a checkpoint dies between the rename
and the hash commit, the next checkpoint treats every block as dirty,
which over-writes but can never under-write.

The step-1 duplication can also run ahead of time: duplicate_previous()
copies the committed file on a background thread and returns a token;
the next checkpoint() consumes the finished copy instead of making its
own. A failed duplication degrades that checkpoint to a full rewrite.

Fault injection: the engine calls ``fault_hook(stage)`` at the stages
named in FAULT_STAGES. A hook that raises SimulatedCrash aborts the
checkpoint exactly there; nothing in the engine catches it. Crash tests
drive every stage and then verify recovery.

In-process crash safety note: dirty flags are sticky until the hash
commit. If a checkpoint dies after the rename but before hashes commit,
a block that later reverts to its old content still carries its dirty
flag, so the next checkpoint rewrites it even though its digest matches.
That closes the write-then-revert hole independently of the all-dirty
taint above.
"""

from __future__ import annotations

import csv
import logging
import os
import re
import shutil
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from .block_tracker import (
    DatasetDescriptor,
    block_count,
    bytes_view,
    commit_hashes,
    next_dirty_region,
    register_blocks,
)
from .container_format import (
    ChunkState,
    CorruptionError,
    FileLayout,
    LayoutError,
    PhysicalExtent,
    checksum_bytes,
    chunk_size,
    container_offsets,
    dataset_containers,
    file_size,
    header_size,
    pack_chunk_meta,
    pack_header,
    plan_layout,
    read_layout,
    write_layout,
)
from .hashing import HashAlgorithm

__all__ = [
    "FAULT_STAGES",
    "LOG_COLUMNS",
    "SimulatedCrash",
    "CoalescingWriter",
    "EngineConfig",
    "CommitState",
    "DuplicateToken",
    "CheckpointMeta",
    "RestartResult",
    "CheckpointEngine",
]

log = logging.getLogger(__name__)

FAULT_STAGES = (
    "pre-copy",
    "post-copy",
    "mid-write",
    "post-write",
    "post-meta",
    "pre-replace",
    "post-replace",
    "pre-hash-commit",
)

LOG_COLUMNS = (
    "id",
    "kind",
    "n_d",
    "payload_bytes",
    "meta_bytes",
    "regions",
    "write_s",
    "hash_s",
)

_CKPT_NAME = re.compile(r"^ckpt\.(\d+)\.dcpkt$")
_STALE_NAME = re.compile(r"^ckpt\.(\d+)\.(staging|tmp)$")


class SimulatedCrash(BaseException):
    """Raised by fault hooks to kill a checkpoint mid-flight.

    BaseException on purpose: no ``except Exception`` inside the engine
    or the libraries it calls can absorb one by accident.
    """


@contextmanager
def _timed(acc: dict, key: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        acc[key] += time.perf_counter() - t0


class CoalescingWriter:
    """Batch scattered extent writes into few large pwrites.

    Extents accumulate until ``flush_threshold`` bytes are pending, then
    get sorted and merged: neighbours closer than ``flush_threshold//16``
    are joined into one span, with the gap read back from the staging
    file itself. Gap bytes are by construction already correct in the
    staging copy, so rewriting them is neutral. Disabled mode issues one
    pwrite per extent immediately.
    """

    def __init__(self, fd: int, *, enabled: bool = True, flush_threshold: int = 16 << 20):
        if flush_threshold <= 0:
            raise ValueError(f"flush_threshold must be positive, got {flush_threshold}")
        self.fd = fd
        self.enabled = enabled
        self.flush_threshold = flush_threshold
        self.gap_threshold = flush_threshold // 16
        self._pending: list[tuple[int, object]] = []
        self._pending_bytes = 0
        self.extents = 0
        self.bytes_in = 0
        self.spans = 0
        self.bytes_written = 0
        self.gap_bytes = 0
        self.flushes = 0
        self.span_sizes: list[int] = []

    def add(self, offset: int, data) -> None:
        n = len(data)
        if n == 0:
            return
        self.extents += 1
        self.bytes_in += n
        if not self.enabled:
            os.pwrite(self.fd, data, offset)
            self.spans += 1
            self.bytes_written += n
            self.span_sizes.append(n)
            return
        self._pending.append((offset, data))
        self._pending_bytes += n
        if self._pending_bytes >= self.flush_threshold:
            self.flush()

    def flush(self) -> None:
        if not self._pending:
            return
        self.flushes += 1
        self._pending.sort(key=lambda item: item[0])
        span_start, first = self._pending[0][0], self._pending[0][1]
        parts = [first]
        span_len = len(first)
        for offset, data in self._pending[1:]:
            gap = offset - (span_start + span_len)
            if gap < 0:
                raise RuntimeError("overlapping write extents (tracker bug)")
            if gap <= self.gap_threshold:
                if gap:
                    parts.append(os.pread(self.fd, gap, span_start + span_len))
                    self.gap_bytes += gap
                parts.append(data)
                span_len += gap + len(data)
            else:
                self._write_span(span_start, parts, span_len)
                span_start, parts, span_len = offset, [data], len(data)
        self._write_span(span_start, parts, span_len)
        self._pending = []
        self._pending_bytes = 0

    def _write_span(self, offset: int, parts: list, length: int) -> None:
        os.pwrite(self.fd, b"".join(parts), offset)
        self.spans += 1
        self.bytes_written += length
        self.span_sizes.append(length)


@dataclass
class EngineConfig:
    """Engine construction parameters, validated once.

    ``coalescing_threshold`` must hold at least one block, otherwise the
    writer would flush inside every extent it is meant to batch.
    """

    directory: str
    block_size: int = 16384
    algorithm: HashAlgorithm | str = HashAlgorithm.MD5
    dcp_enabled: bool = True
    coalescing: bool = True
    coalescing_threshold: int = 16 << 20
    async_duplicate: bool = False
    retain_all: bool = False

    def __post_init__(self):
        self.directory = os.fspath(self.directory)
        if isinstance(self.algorithm, str):
            self.algorithm = HashAlgorithm.from_name(self.algorithm)
        if self.block_size <= 0:
            raise ValueError(f"block_size must be positive, got {self.block_size}")
        if self.coalescing_threshold < self.block_size:
            raise ValueError(
                f"coalescing_threshold {self.coalescing_threshold} is smaller "
                f"than one block ({self.block_size})"
            )


@dataclass(frozen=True)
class CommitState:
    """Snapshot of the commit machinery for introspection and tests."""

    committed_file: str | None
    staging_file: str | None
    state: str  # IDLE, DUPLICATING, UPDATING or COMMITTING


class DuplicateToken:
    """Completion handle for a background duplication of the committed file."""

    def __init__(self, path: str):
        self.path = path
        self.success = False
        self.error: BaseException | None = None
        self._finished = threading.Event()

    @property
    def done(self) -> bool:
        return self._finished.is_set()

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the copy finished; True when it succeeded."""
        self._finished.wait(timeout)
        return self.success


@dataclass
class CheckpointMeta:
    """Everything measured about one committed checkpoint."""

    checkpoint_id: int
    kind: str  # "FULL" or "DIFFERENTIAL"
    n_d: float
    blocks_total: int
    blocks_dirty: int
    payload_bytes: int
    meta_bytes: int
    regions: int
    write_s: float
    hash_s: float
    file_bytes: int
    path: str
    rehashed_blocks: int = 0
    region_bytes: list[int] = field(default_factory=list)
    write_sizes: list[int] = field(default_factory=list)


@dataclass
class RestartResult:
    checkpoint_id: int
    data: dict[int, bytearray]


class CheckpointEngine:
    """Checkpoint a set of protected in-memory regions into one directory.

    Regions are bound with ``protect`` and stay bound: the engine reads
    them at every ``checkpoint()`` and writes them back in ``recover()``.
    With ``dcp_enabled`` the engine hashes blocks and rewrites only the
    stale ones; otherwise every checkpoint is a full rewrite and no hash
    state is kept (the honest baseline for comparisons). ``retain_all``
    keeps superseded files around until ``release`` is called.
    """

    def __init__(self, directory=None, *, config: EngineConfig | None = None,
                 fault_hook=None, **options):
        if config is None:
            if directory is None:
                raise ValueError("pass a directory or an EngineConfig")
            config = EngineConfig(directory=directory, **options)
        elif directory is not None or options:
            raise ValueError("pass either config or directory plus options, not both")
        self.config = config
        self.fault_hook = fault_hook
        self.directory = config.directory
        self.block_size = config.block_size
        self.algorithm = config.algorithm
        self.dcp_enabled = config.dcp_enabled
        self.coalescing = config.coalescing
        self.coalescing_threshold = config.coalescing_threshold
        self.retain_all = config.retain_all

        os.makedirs(self.directory, exist_ok=True)
        self._datasets: dict[int, DatasetDescriptor] = {}
        self._regions: dict[int, object] = {}
        self._layout: FileLayout | None = None
        self._chunks: dict[tuple[int, int], ChunkState] = {}
        self._hashes_stale = False
        self._pending_duplicate: DuplicateToken | None = None
        self._state = "IDLE"
        self._sweep_staging()
        ids = self.checkpoints()
        self._committed_id = ids[-1] if ids else 0
        self._next_id = self._committed_id + 1

    # ------------------------------------------------------------- paths

    def _path(self, checkpoint_id: int) -> str:
        return os.path.join(self.directory, f"ckpt.{checkpoint_id}.dcpkt")

    def _staging(self, checkpoint_id: int) -> str:
        return os.path.join(self.directory, f"ckpt.{checkpoint_id}.staging")

    def _tmp(self, checkpoint_id: int) -> str:
        return os.path.join(self.directory, f"ckpt.{checkpoint_id}.tmp")

    @property
    def log_path(self) -> str:
        return os.path.join(self.directory, "ckpt_log.csv")

    def _sweep_staging(self) -> None:
        for name in os.listdir(self.directory):
            if _STALE_NAME.match(name):
                log.info("removing stale staging file %s", name)
                os.unlink(os.path.join(self.directory, name))

    def checkpoints(self) -> list[int]:
        """Checkpoint ids present on disk, oldest first."""
        ids = []
        for name in os.listdir(self.directory):
            m = _CKPT_NAME.match(name)
            if m:
                ids.append(int(m.group(1)))
        return sorted(ids)

    @property
    def commit_state(self) -> CommitState:
        committed = self._path(self._committed_id) if self._committed_id else None
        token = self._pending_duplicate
        state = self._state
        if state == "IDLE" and token is not None and not token.done:
            state = "DUPLICATING"
        return CommitState(committed, token.path if token else None, state)

    # ------------------------------------------------------------ control

    def protect(self, dataset_id: int, region, size_bytes: int | None = None) -> None:
        """Bind a region as a dataset, or re-declare its size after a resize.

        ``region`` is anything with a contiguous buffer interface: a
        bytearray, a numpy array, a memoryview. The engine keeps a
        reference and reads the first ``size_bytes`` of it at every
        checkpoint. A second protect for the same id must pass the same
        region object; blocks the old size did not cover start invalid,
        so they are written out at the next checkpoint.
        """
        if not isinstance(dataset_id, int) or dataset_id < 0:
            raise ValueError(f"dataset id must be a non-negative int, got {dataset_id!r}")
        view = bytes_view(region)
        if size_bytes is None:
            size_bytes = len(view)
        if not 0 <= size_bytes <= len(view):
            raise ValueError(
                f"size_bytes {size_bytes} is outside the region's {len(view)} bytes"
            )
        if dataset_id in self._datasets:
            if self._regions[dataset_id] is not region:
                raise ValueError(
                    f"dataset {dataset_id} is already bound to a different region; "
                    f"protect only resizes the original one"
                )
        else:
            self._datasets[dataset_id] = DatasetDescriptor(
                dataset_id=dataset_id, block_size=self.block_size, algorithm=self.algorithm
            )
            self._regions[dataset_id] = region
        register_blocks(self._datasets[dataset_id], size_bytes)

    def _region_view(self, dataset_id: int):
        desc = self._datasets[dataset_id]
        view = bytes_view(self._regions[dataset_id])
        if len(view) < desc.size_bytes:
            raise ValueError(
                f"dataset {dataset_id} region shrank below its declared "
                f"{desc.size_bytes} bytes; protect it with the new size first"
            )
        return view[: desc.size_bytes]

    def release(self, checkpoint_id: int) -> None:
        """Delete a retained checkpoint file. The live one is protected."""
        if checkpoint_id == self._committed_id:
            raise ValueError(f"checkpoint {checkpoint_id} is the live checkpoint")
        path = self._path(checkpoint_id)
        try:
            os.unlink(path)
        except FileNotFoundError:
            raise ValueError(f"no checkpoint {checkpoint_id} in {self.directory}") from None

    def _fault(self, stage: str) -> None:
        if self.fault_hook is not None:
            self.fault_hook(stage)

    # -------------------------------------------------------- duplication

    def duplicate_previous(self) -> DuplicateToken:
        """Copy the committed file to staging on a background thread.

        The returned token completes when the copy is durable enough to
        update in place. The next checkpoint() waits on it and reuses
        the copy; if the copy failed, that checkpoint degrades to a full
        rewrite. Only one duplication may be in flight, and none may
        start while a checkpoint is running.
        """
        if self._state != "IDLE":
            raise RuntimeError(f"cannot duplicate while the engine is {self._state}")
        if self._pending_duplicate is not None and not self._pending_duplicate.done:
            raise RuntimeError("a duplication is already in flight")
        if not self._committed_id:
            raise RuntimeError("no committed checkpoint to duplicate")
        token = DuplicateToken(self._staging(self._next_id))
        src = self._path(self._committed_id)

        def work():
            try:
                shutil.copyfile(src, token.path)
                token.success = True
            except OSError as exc:
                token.error = exc
                log.error("background duplication of %s failed: %s", src, exc)
            finally:
                token._finished.set()

        threading.Thread(target=work, name="dcpkt-duplicate", daemon=True).start()
        self._pending_duplicate = token
        return token

    def _consume_duplicate(self) -> tuple[str | None, bool]:
        """Resolve any pending duplication: (ready staging path, failed)."""
        token = self._pending_duplicate
        self._pending_duplicate = None
        if token is None:
            return None, False
        if token.wait() and os.path.exists(token.path):
            return token.path, False
        log.warning(
            "checkpoint duplication failed (%s); falling back to a full rewrite",
            token.error,
        )
        return None, True

    # --------------------------------------------------------- checkpoint

    def checkpoint(self) -> CheckpointMeta:
        """Commit the protected regions as the next checkpoint."""
        if not self._datasets:
            raise ValueError("no datasets protected")
        if self._state != "IDLE":
            raise RuntimeError(f"checkpoint is not allowed while the engine is {self._state}")
        data = {ds_id: self._region_view(ds_id) for ds_id in self._datasets}
        sizes = {ds_id: len(view) for ds_id, view in data.items()}
        acc = {"write": 0.0, "hash": 0.0}
        new_id = self._next_id
        ready, dup_failed = self._consume_duplicate()

        layout = None
        kind = "DIFFERENTIAL"
        if self.dcp_enabled and self._layout is not None and not dup_failed:
            try:
                layout = plan_layout(self._layout, sizes, checkpoint_id=new_id)
            except LayoutError as exc:
                log.info("checkpoint %d falls back to a full rewrite: %s", new_id, exc)
        if layout is None:
            kind = "FULL"
            layout = plan_layout(
                None,
                sizes,
                checkpoint_id=new_id,
                block_size=self.block_size,
                algorithm=self.algorithm,
            )
            if ready is not None:
                os.unlink(ready)
                ready = None

        if self.dcp_enabled and self._hashes_stale:
            log.warning(
                "previous checkpoint died before its hash commit; "
                "treating every block as dirty"
            )
            for desc in self._datasets.values():
                for meta in desc.blocks:
                    meta.dirty = True

        self._state = "UPDATING"
        try:
            if kind == "DIFFERENTIAL":
                meta = self._checkpoint_dcp(layout, data, new_id, acc, ready)
            else:
                meta = self._checkpoint_full(layout, data, new_id, acc)
        finally:
            self._state = "IDLE"
        self._append_log(meta)
        if self.config.async_duplicate:
            self.duplicate_previous()
        return meta

    def _checkpoint_full(self, layout, data, new_id, acc) -> CheckpointMeta:
        self._fault("pre-copy")
        staging = self._tmp(new_id)
        with _timed(acc, "write"):
            stream = open(staging, "wb")
            try:
                chunks = write_layout(stream, layout, data)
                stream.flush()
                self._fault("post-write")
                os.fsync(stream.fileno())
            finally:
                stream.close()
        self._fault("pre-replace")
        self._commit_file(staging, new_id, layout, chunks, acc)
        self._fault("pre-hash-commit")
        rehashed = self._commit_hashes(data, acc)

        # descriptor state is empty when dcp is off, so count from sizes
        blocks_total = sum(
            block_count(size, self.block_size) for size in layout.sizes.values()
        )
        live = [chunk_size(layout, spec) for spec in layout.containers]
        return CheckpointMeta(
            checkpoint_id=new_id,
            kind="FULL",
            n_d=1.0 if blocks_total else 0.0,
            blocks_total=blocks_total,
            blocks_dirty=blocks_total,
            payload_bytes=sum(live),
            meta_bytes=header_size(len(layout.sizes)) + 64 * len(layout.containers),
            regions=len(layout.containers),
            write_s=acc["write"],
            hash_s=acc["hash"],
            file_bytes=file_size(layout),
            path=self._path(new_id),
            rehashed_blocks=rehashed,
            region_bytes=[n for n in live if n],
            write_sizes=[n for n in live if n],
        )

    def _checkpoint_dcp(self, layout, data, new_id, acc, ready) -> CheckpointMeta:
        self._fault("pre-copy")
        staging = self._staging(new_id)
        if ready is None:
            committed = self._path(self._committed_id)
            with _timed(acc, "write"):
                shutil.copyfile(committed, staging)
        self._fault("post-copy")

        offsets = container_offsets(layout)
        per_ds = {ds_id: dataset_containers(layout, ds_id) for ds_id in layout.sizes}
        touched: set[tuple[int, int]] = set()
        region_bytes: list[int] = []
        blocks_dirty = 0
        fd = os.open(staging, os.O_RDWR)
        try:
            with _timed(acc, "write"):
                target = file_size(layout)
                if target > os.fstat(fd).st_size:
                    os.ftruncate(fd, target)
            writer = CoalescingWriter(
                fd, enabled=self.coalescing, flush_threshold=self.coalescing_threshold
            )
            fired_mid_write = False
            for ds_id, desc in self._datasets.items():
                view = data[ds_id]
                cursor = 0
                while True:
                    with _timed(acc, "hash"):
                        hit = next_dirty_region(desc, view, cursor)
                    if hit is None:
                        break
                    region, cursor = hit
                    blocks_dirty += region.block_count
                    region_bytes.append(region.byte_length)
                    with _timed(acc, "write"):
                        pos = region.byte_offset
                        for ext in _split_extent(
                            per_ds[ds_id], offsets, region.byte_offset, region.byte_length
                        ):
                            writer.add(ext.file_offset, view[pos : pos + ext.length])
                            touched.add((ds_id, ext.container_index))
                            pos += ext.length
                    # flush before the mid-write stage so the fault hook
                    # sees real bytes on staging; skipped unhooked so the
                    # coalescer keeps its natural batching
                    if not fired_mid_write and self.fault_hook is not None:
                        with _timed(acc, "write"):
                            writer.flush()
                        fired_mid_write = True
                        self._fault("mid-write")
            with _timed(acc, "write"):
                writer.flush()
            self._fault("post-write")

            new_chunks: dict[tuple[int, int], ChunkState] = {}
            metas: list[bytes] = []
            touched_metas = 0
            with _timed(acc, "write"):
                for spec in layout.containers:
                    key = (spec.dataset_id, spec.index)
                    live = chunk_size(layout, spec)
                    cached = self._chunks.get(key)
                    if key in touched or cached is None or cached.chunk_size != live:
                        view = data[spec.dataset_id]
                        digest = checksum_bytes(
                            self.algorithm,
                            view[spec.logical_start : spec.logical_start + live],
                        )
                        state = ChunkState(spec, live, digest)
                        stale_meta = True
                    else:
                        state = cached
                        stale_meta = False
                    new_chunks[key] = state
                    packed = pack_chunk_meta(spec, live, state.payload_checksum)
                    metas.append(packed)
                    if stale_meta:
                        os.pwrite(fd, packed, offsets[key][0])
                        touched_metas += 1
                os.pwrite(fd, pack_header(layout, metas), 0)
            self._fault("post-meta")
            with _timed(acc, "write"):
                os.fsync(fd)
        finally:
            os.close(fd)

        self._fault("pre-replace")
        self._commit_file(staging, new_id, layout, list(new_chunks.values()), acc)
        self._fault("pre-hash-commit")
        rehashed = self._commit_hashes(data, acc)

        blocks_total = sum(len(d.blocks) for d in self._datasets.values())
        return CheckpointMeta(
            checkpoint_id=new_id,
            kind="DIFFERENTIAL",
            n_d=blocks_dirty / blocks_total if blocks_total else 0.0,
            blocks_total=blocks_total,
            blocks_dirty=blocks_dirty,
            payload_bytes=sum(region_bytes),
            meta_bytes=header_size(len(layout.sizes)) + 64 * touched_metas,
            regions=len(region_bytes),
            write_s=acc["write"],
            hash_s=acc["hash"],
            file_bytes=file_size(layout),
            path=self._path(new_id),
            rehashed_blocks=rehashed,
            region_bytes=region_bytes,
            write_sizes=list(writer.span_sizes),
        )

    def _commit_file(self, staging, new_id, layout, chunks, acc) -> None:
        """Rename staging over the checkpoint name and adopt the state.

        The in-memory adoption happens immediately after the rename with
        nothing in between that can raise, so the engine's view of the
        committed file can never diverge from disk inside one process.
        """
        self._state = "COMMITTING"
        with _timed(acc, "write"):
            os.replace(staging, self._path(new_id))
        self._layout = layout
        self._chunks = {(c.spec.dataset_id, c.spec.index): c for c in chunks}
        self._committed_id = new_id
        self._next_id = new_id + 1
        self._hashes_stale = True
        self._fault("post-replace")
        with _timed(acc, "write"):
            self._dir_fsync()
            if not self.retain_all:
                for old_id in self.checkpoints():
                    if old_id != new_id:
                        try:
                            os.unlink(self._path(old_id))
                        except FileNotFoundError:
                            pass

    def _commit_hashes(self, data, acc) -> int:
        rehashed = 0
        if self.dcp_enabled:
            with _timed(acc, "hash"):
                for ds_id, desc in self._datasets.items():
                    rehashed += commit_hashes(desc, data[ds_id])
        self._hashes_stale = False
        return rehashed

    def _dir_fsync(self) -> None:
        fd = os.open(self.directory, os.O_RDONLY)
        try:
            os.fsync(fd)
        finally:
            os.close(fd)

    def _append_log(self, meta: CheckpointMeta) -> None:
        fresh = not os.path.exists(self.log_path)
        with open(self.log_path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if fresh:
                writer.writerow(LOG_COLUMNS)
            writer.writerow(
                [
                    meta.checkpoint_id,
                    meta.kind,
                    f"{meta.n_d:.6f}",
                    meta.payload_bytes,
                    meta.meta_bytes,
                    meta.regions,
                    f"{meta.write_s:.6f}",
                    f"{meta.hash_s:.6f}",
                ]
            )

    # ------------------------------------------------------------ recovery

    def restart(self) -> RestartResult | None:
        """Load the newest readable checkpoint into fresh buffers.

        Falls back to older retained files when the newest fails its
        validation, logging the damage. Returns None when the directory
        holds no checkpoints at all. On success the engine is warm: the
        loaded bytearrays become the protected regions and the next
        checkpoint can be differential.
        """
        ids = self.checkpoints()
        if not ids:
            return None
        result = None
        last_error: CorruptionError | None = None
        for ckpt_id in reversed(ids):
            try:
                result = read_layout(self._path(ckpt_id))
                break
            except CorruptionError as exc:
                log.error("checkpoint %d unreadable: %s", ckpt_id, exc)
                last_error = exc
        if result is None:
            raise last_error
        data = {ds_id: result.buffers[ds_id] for ds_id in result.layout.sizes}
        self._datasets = {}
        self._regions = dict(data)
        self._adopt(result, ckpt_id, next_id=ids[-1] + 1)
        return RestartResult(checkpoint_id=ckpt_id, data=data)

    def recover(self) -> dict[int, int] | None:
        """Load the newest checkpoint into the protected regions, in place.

        Every dataset in the file must already be protected: bytearray
        regions are resized to the committed size, anything else must
        match it exactly. Protected regions the file does not know stay
        untouched. Returns {dataset_id: committed_size}, or None when
        there is no checkpoint.
        """
        ids = self.checkpoints()
        if not ids:
            return None
        result = read_layout(self._path(ids[-1]))
        for ds_id in result.layout.sizes:
            if ds_id not in self._regions:
                raise ValueError(
                    f"checkpoint holds dataset {ds_id} but no region is protected for it"
                )
        loaded: dict[int, int] = {}
        for ds_id, size in result.layout.sizes.items():
            payload = result.buffers[ds_id]
            target = self._regions[ds_id]
            if isinstance(target, bytearray):
                target[:] = payload
            else:
                view = bytes_view(target)
                if len(view) != size:
                    raise ValueError(
                        f"dataset {ds_id} region is {len(view)} bytes but the "
                        f"checkpoint committed {size}; protect a bytearray to "
                        f"allow resizing"
                    )
                view[:] = payload
            loaded[ds_id] = size
        self._adopt(result, ids[-1], next_id=ids[-1] + 1)
        return loaded

    def _adopt(self, result, ckpt_id: int, next_id: int) -> None:
        """Warm the engine from a validated read: descriptors and caches.

        A file written under a different block size or hash algorithm is
        adopted restore-only: ids advance but the layout cache stays
        empty, so the next checkpoint starts a fresh full file under the
        engine's own configuration.
        """
        self._committed_id = ckpt_id
        self._next_id = next_id
        for ds_id, size in result.layout.sizes.items():
            desc = DatasetDescriptor(
                dataset_id=ds_id, block_size=self.block_size, algorithm=self.algorithm
            )
            register_blocks(desc, size)
            self._datasets[ds_id] = desc
            if self.dcp_enabled:
                commit_hashes(desc, self._region_view(ds_id))
        self._hashes_stale = False
        compatible = (
            result.layout.block_size == self.block_size
            and result.layout.algorithm is self.algorithm
        )
        if compatible:
            self._layout = result.layout
            self._chunks = {
                (c.spec.dataset_id, c.spec.index): c for c in result.chunks
            }
        else:
            log.warning(
                "checkpoint %d uses block_size=%d algorithm=%s; engine is "
                "configured differently, next checkpoint will be full",
                ckpt_id, result.layout.block_size, result.layout.algorithm.value,
            )
            self._layout = None
            self._chunks = {}


def _split_extent(
    containers: list, offsets: dict, byte_offset: int, byte_length: int
) -> list[PhysicalExtent]:
    """logical_to_physical against a precomputed container list."""
    out: list[PhysicalExtent] = []
    remaining = byte_length
    pos = byte_offset
    for spec in containers:
        if remaining == 0:
            break
        if pos >= spec.logical_start + spec.capacity:
            continue
        inner = pos - spec.logical_start
        take = min(remaining, spec.capacity - inner)
        out.append(
            PhysicalExtent(
                spec.index, inner, offsets[(spec.dataset_id, spec.index)][1] + inner, take
            )
        )
        pos += take
        remaining -= take
    if remaining:
        raise LayoutError(
            f"extent [{byte_offset}, {byte_offset + byte_length}) exceeds dataset capacity"
        )
    return out
