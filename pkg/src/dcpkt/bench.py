"""Benchmark harness: calibration, synthetic update patterns, heat2d.

Three workload families drive the engine the way real applications do:

* ``run_pattern`` mutates synthetic per-rank buffers under one of three
  update patterns (UNIFORM, WAVEFRONT, STRIDED_GROWTH) and checkpoints
  on a fixed interval. "Ranks" are engine instances inside one process,
  each with its own directory.
* ``run_heat2d`` runs a small 2D heat stencil decomposed over ranks by
  rows, checkpoints every interval, kills itself mid-run once and
  resumes from disk, then compares the final grid bit-exactly against
  an uninterrupted reference run.
* ``block_size_sweep`` replays one mutation sequence across block sizes
  against both a differential engine and a full-rewrite baseline.

Every checkpoint in every run is cross-checked against the in-memory
state by reading the committed file back; a mismatch raises instead of
producing a quietly wrong benchmark. Timed results are reported, never
asserted: wall-clock assertions belong to the calling layer, which can
decide what is stable on its hardware.

``calibrate`` measures the two model constants (per-block write and
hash time) the way the cost model defines them: write time is the
whole-buffer wall time divided by block count, hash time is the mean
over per-block hash calls.
"""

from __future__ import annotations

import csv
import logging
import os
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .block_tracker import DatasetDescriptor, block_count, metadata_bytes, register_blocks
from .container_format import read_layout
from .engine import CheckpointEngine, CheckpointMeta
from .hashing import HashAlgorithm, hash_block

__all__ = [
    "PATTERN_KINDS",
    "CalibrationResult",
    "UpdatePattern",
    "PatternRunResult",
    "Heat2DResult",
    "SweepRow",
    "calibrate",
    "run_pattern",
    "run_heat2d",
    "block_size_sweep",
    "write_calibration_csv",
    "write_nd_matrix_csv",
    "write_chunk_cdf_csv",
    "write_sweep_csv",
]

log = logging.getLogger(__name__)

PATTERN_KINDS = ("UNIFORM", "WAVEFRONT", "STRIDED_GROWTH")


# ------------------------------------------------------------- calibration


@dataclass
class CalibrationResult:
    """Measured per-block write and hash times, with trial variances.

    ``hash_stability`` is the ratio between two back-to-back hash passes
    of the last trial; a value far from 1 means the measurement is not
    trustworthy on this machine.
    """

    block_size: int
    total_bytes: int
    n_blocks: int
    trials: int
    algorithm: HashAlgorithm
    t_w: float
    t_w_var: float
    t_h: float
    t_h_var: float
    hash_stability: float

    @property
    def rho(self) -> float:
        return self.t_w / self.t_h


def calibrate(
    block_size: int,
    total_bytes: int,
    target_path,
    *,
    trials: int = 5,
    algorithm: HashAlgorithm = HashAlgorithm.MD5,
    rng_seed: int = 0,
) -> CalibrationResult:
    """Measure t_w and t_h on the filesystem holding ``target_path``.

    Each trial writes ``total_bytes`` of fresh random data to the target
    (create-or-truncate, then fsync) and hashes it twice block by block.
    t_w is total write wall time over block count; t_h is the mean
    per-block hash time of the first pass; the second pass only feeds
    the stability ratio. The target file is removed afterwards.
    """
    if block_size <= 0:
        raise ValueError(f"block_size must be positive, got {block_size}")
    if total_bytes <= 0 or total_bytes % block_size:
        raise ValueError(
            f"total_bytes must be a positive multiple of block_size, got {total_bytes}"
        )
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    target_path = os.fspath(target_path)
    n = total_bytes // block_size
    rng = np.random.default_rng(np.random.SeedSequence((rng_seed, block_size)))
    tw_samples: list[float] = []
    th_samples: list[float] = []
    stability = 1.0
    try:
        for _ in range(trials):
            buf = rng.bytes(total_bytes)
            fd = os.open(target_path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
            try:
                t0 = time.perf_counter()
                os.write(fd, buf)
                os.fsync(fd)
                tw_samples.append((time.perf_counter() - t0) / n)
            finally:
                os.close(fd)
            view = memoryview(buf)
            passes = []
            for _rep in range(2):
                t0 = time.perf_counter()
                for i in range(n):
                    hash_block(view[i * block_size : (i + 1) * block_size], algorithm)
                passes.append((time.perf_counter() - t0) / n)
            th_samples.append(passes[0])
            stability = passes[0] / passes[1] if passes[1] > 0 else float("inf")
    finally:
        try:
            os.unlink(target_path)
        except OSError:
            pass
    return CalibrationResult(
        block_size=block_size,
        total_bytes=total_bytes,
        n_blocks=n,
        trials=trials,
        algorithm=algorithm,
        t_w=statistics.fmean(tw_samples),
        t_w_var=statistics.pvariance(tw_samples),
        t_h=statistics.fmean(th_samples),
        t_h_var=statistics.pvariance(th_samples),
        hash_stability=stability,
    )


# ---------------------------------------------------------------- patterns


@dataclass
class UpdatePattern:
    """What a synthetic workload touches between checkpoints.

    UNIFORM mutates round(fraction * blocks) distinct blocks of every
    rank every step. WAVEFRONT sweeps a widening rank prefix: rank r
    updates once the front (front_speed ranks per step) has passed it;
    ``hot_rank0`` additionally keeps rank 0 at an 80% update fraction
    throughout. STRIDED_GROWTH touches every stride-th block on a
    rolling phase and appends ``growth_bytes`` to every rank each step.
    """

    kind: str
    ranks: int = 1
    steps: int = 10
    fraction: float = 0.1
    front_speed: float | None = None
    hot_rank0: bool = False
    stride: int = 8
    growth_bytes: int = 0

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"pattern kind must be one of {PATTERN_KINDS}, got {self.kind!r}")
        if self.ranks < 1:
            raise ValueError(f"ranks must be at least 1, got {self.ranks}")
        if self.steps < 1:
            raise ValueError(f"steps must be at least 1, got {self.steps}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {self.fraction}")
        if self.stride < 1:
            raise ValueError(f"stride must be at least 1, got {self.stride}")
        if self.growth_bytes < 0:
            raise ValueError(f"growth_bytes must be non-negative, got {self.growth_bytes}")
        if self.front_speed is not None and self.front_speed <= 0:
            raise ValueError(f"front_speed must be positive, got {self.front_speed}")


@dataclass
class PatternRunResult:
    pattern: UpdatePattern
    block_size: int
    steps_at: list[int]
    nd_matrix: list[list[float]]  # [checkpoint][rank]
    metas: list[list[CheckpointMeta]]  # [rank][checkpoint]
    region_sizes: list[int]
    write_sizes: list[int]
    csv_paths: dict[str, object]


def _mutate_fraction(buf: bytearray, block_size: int, fraction: float, rng) -> int:
    """Bump one byte in round(fraction * blocks) distinct blocks."""
    n_blocks = block_count(len(buf), block_size)
    if n_blocks == 0:
        return 0
    k = int(round(fraction * n_blocks))
    k = max(0, min(n_blocks, k))
    if k == 0:
        return 0
    for i in rng.choice(n_blocks, size=k, replace=False):
        off = int(i) * block_size
        buf[off] = (buf[off] + 1) % 256
    return k


def _mutate_strided(buf: bytearray, block_size: int, stride: int, phase: int) -> int:
    n_blocks = block_count(len(buf), block_size)
    touched = 0
    for i in range(phase % stride, n_blocks, stride):
        off = i * block_size
        buf[off] = (buf[off] + 1) % 256
        touched += 1
    return touched


def _verify_committed(engine: CheckpointEngine, meta: CheckpointMeta, buffers) -> None:
    """Golden-copy crosscheck: the committed file must equal memory."""
    result = read_layout(meta.path)
    for ds_id, buf in buffers.items():
        disk = bytes(result.buffers[ds_id])
        mem = bytes(buf) if not isinstance(buf, np.ndarray) else buf.tobytes()
        if disk != mem:
            raise RuntimeError(
                f"checkpoint {meta.checkpoint_id} in {engine.directory} does not "
                f"match memory for dataset {ds_id}"
            )


def _require_cold(engines: list[CheckpointEngine]) -> None:
    for eng in engines:
        if eng.checkpoints():
            raise ValueError(
                f"{eng.directory} already holds checkpoints; benchmark runs need "
                f"a fresh output directory"
            )


def run_pattern(
    pattern: UpdatePattern,
    *,
    outdir,
    bytes_per_rank: int = 1 << 20,
    block_size: int = 16384,
    algorithm: HashAlgorithm = HashAlgorithm.MD5,
    dcp_enabled: bool = True,
    coalescing: bool = True,
    coalescing_threshold: int = 16 << 20,
    checkpoint_interval: int = 1,
    seed: int = 0,
    verify: bool = True,
    write_csv: bool = True,
) -> PatternRunResult:
    """Drive one engine per rank through the pattern's mutation schedule.

    Buffers start as seeded random bytes and mutate deterministically:
    the stream for (seed, rank, step) is independent of everything else,
    so a rerun with the same arguments reproduces the same dirty sets
    and the same nd_matrix/chunk_cdf CSV bytes.
    """
    if bytes_per_rank <= 0:
        raise ValueError(f"bytes_per_rank must be positive, got {bytes_per_rank}")
    if checkpoint_interval < 1:
        raise ValueError(f"checkpoint_interval must be at least 1, got {checkpoint_interval}")
    outdir = os.fspath(outdir)
    os.makedirs(outdir, exist_ok=True)
    front_speed = pattern.front_speed
    if pattern.kind == "WAVEFRONT" and front_speed is None:
        front_speed = pattern.ranks / pattern.steps

    engines = []
    buffers = []
    for r in range(pattern.ranks):
        eng = CheckpointEngine(
            os.path.join(outdir, f"rank_{r:02d}"),
            block_size=block_size,
            algorithm=algorithm,
            dcp_enabled=dcp_enabled,
            coalescing=coalescing,
            coalescing_threshold=coalescing_threshold,
        )
        init_rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        buf = bytearray(init_rng.bytes(bytes_per_rank))
        eng.protect(0, buf)
        engines.append(eng)
        buffers.append(buf)
    _require_cold(engines)

    steps_at: list[int] = []
    nd_matrix: list[list[float]] = []
    metas: list[list[CheckpointMeta]] = [[] for _ in range(pattern.ranks)]
    region_sizes: list[int] = []
    write_sizes: list[int] = []

    for step in range(pattern.steps):
        for r in range(pattern.ranks):
            rng = np.random.default_rng(np.random.SeedSequence((seed, r, step)))
            buf = buffers[r]
            if pattern.kind == "UNIFORM":
                _mutate_fraction(buf, block_size, pattern.fraction, rng)
            elif pattern.kind == "WAVEFRONT":
                fraction = None
                if pattern.hot_rank0 and r == 0:
                    fraction = 0.8
                elif r < front_speed * (step + 1):
                    fraction = pattern.fraction
                if fraction is not None:
                    _mutate_fraction(buf, block_size, fraction, rng)
            else:  # STRIDED_GROWTH
                if pattern.growth_bytes:
                    buf.extend(rng.bytes(pattern.growth_bytes))
                    engines[r].protect(0, buf)
                _mutate_strided(buf, block_size, pattern.stride, step)
        if (step + 1) % checkpoint_interval:
            continue
        row = []
        for r in range(pattern.ranks):
            meta = engines[r].checkpoint()
            if verify:
                _verify_committed(engines[r], meta, {0: buffers[r]})
            metas[r].append(meta)
            row.append(meta.n_d)
            region_sizes.extend(meta.region_bytes)
            write_sizes.extend(meta.write_sizes)
        steps_at.append(step + 1)
        nd_matrix.append(row)

    csv_paths: dict[str, object] = {
        "ckpt_logs": [eng.log_path for eng in engines],
    }
    if write_csv:
        nd_path = os.path.join(outdir, "nd_matrix.csv")
        cdf_path = os.path.join(outdir, "chunk_cdf.csv")
        write_nd_matrix_csv(nd_path, steps_at, nd_matrix)
        write_chunk_cdf_csv(cdf_path, {"region": region_sizes, "write": write_sizes})
        csv_paths["nd_matrix"] = nd_path
        csv_paths["chunk_cdf"] = cdf_path
    return PatternRunResult(
        pattern=pattern,
        block_size=block_size,
        steps_at=steps_at,
        nd_matrix=nd_matrix,
        metas=metas,
        region_sizes=region_sizes,
        write_sizes=write_sizes,
        csv_paths=csv_paths,
    )


# ------------------------------------------------------------------ heat2d


@dataclass
class Heat2DResult:
    grid: np.ndarray
    reference: np.ndarray
    bit_exact: bool
    steps_at: list[int]
    nd_matrix: list[list[float]]
    metas: list[list[CheckpointMeta]]
    kill_at_step: int | None
    resumed_from_step: int | None
    region_sizes: list[int]
    write_sizes: list[int]
    csv_paths: dict[str, object]


def _slabs(grid: np.ndarray, ranks: int) -> list[np.ndarray]:
    rows = grid.shape[0] // ranks
    return [grid[r * rows : (r + 1) * rows] for r in range(ranks)]


def _stencil_step(slabs: list[np.ndarray]) -> None:
    """One synchronous 4-neighbour-average step across all rank slabs.

    Each rank extends its slab with the boundary rows of its neighbours
    (the in-process stand-in for a halo exchange); grid borders replicate
    the edge cell, so a uniform field is a fixed point.
    """
    ranks = len(slabs)
    tops = [slabs[r - 1][-1] if r else slabs[0][0] for r in range(ranks)]
    bottoms = [slabs[r + 1][0] if r < ranks - 1 else slabs[-1][-1] for r in range(ranks)]
    fresh = []
    for r, slab in enumerate(slabs):
        ext = np.vstack([tops[r][None, :], slab, bottoms[r][None, :]])
        ext = np.pad(ext, ((0, 0), (1, 1)), mode="edge")
        fresh.append(
            0.25
            * (ext[:-2, 1:-1] + ext[2:, 1:-1] + ext[1:-1, :-2] + ext[1:-1, 2:])
        )
    for slab, new in zip(slabs, fresh):
        slab[:] = new


def _heat2d_initial(nx: int, ny: int, initial_grid) -> np.ndarray:
    if initial_grid is not None:
        grid = np.array(initial_grid, dtype=np.float64, copy=True)
        if grid.shape != (nx, ny):
            raise ValueError(f"initial grid shape {grid.shape} != ({nx}, {ny})")
        return grid
    grid = np.zeros((nx, ny), dtype=np.float64)
    grid[nx // 2, ny // 2] = 100.0
    return grid


def run_heat2d(
    outdir,
    *,
    nx: int = 256,
    ny: int = 256,
    ranks: int = 4,
    steps: int = 500,
    checkpoint_interval: int = 50,
    block_size: int = 16384,
    algorithm: HashAlgorithm = HashAlgorithm.MD5,
    dcp_enabled: bool = True,
    coalescing: bool = True,
    kill_at_step: int | None = None,
    initial_grid=None,
    verify: bool = True,
    write_csv: bool = True,
) -> Heat2DResult:
    """Heat stencil with per-rank engines, one mid-run kill, bit-exact check.

    The grid is decomposed over ranks by rows; every rank owns one engine
    and protects its slab. After ``kill_at_step`` (default: mid-run,
    between two checkpoints; pass 0 to disable) all engines and state are
    discarded and rebuilt from disk, and the run resumes from the last
    committed step. The returned ``bit_exact`` compares the final grid
    against an uninterrupted in-memory run of the same stencil.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"grid must be non-empty, got {nx}x{ny}")
    if ranks < 1 or nx % ranks:
        raise ValueError(f"grid rows {nx} must divide evenly over {ranks} ranks")
    if checkpoint_interval < 1:
        raise ValueError(f"checkpoint_interval must be at least 1, got {checkpoint_interval}")
    outdir = os.fspath(outdir)
    os.makedirs(outdir, exist_ok=True)
    if kill_at_step is None:
        n_ckpts = steps // checkpoint_interval
        if n_ckpts >= 1:
            kill_at_step = checkpoint_interval * max(1, n_ckpts // 2) + checkpoint_interval // 2
            kill_at_step = min(kill_at_step, steps)
        else:
            kill_at_step = 0
    if kill_at_step <= 0:
        kill_at_step = None

    initial = _heat2d_initial(nx, ny, initial_grid)

    # uninterrupted reference: same decomposition, same arithmetic order
    reference = initial.copy()
    ref_slabs = _slabs(reference, ranks)
    for _ in range(steps):
        _stencil_step(ref_slabs)

    def fresh_engines():
        engs = []
        for r in range(ranks):
            engs.append(
                CheckpointEngine(
                    os.path.join(outdir, f"rank_{r:02d}"),
                    block_size=block_size,
                    algorithm=algorithm,
                    dcp_enabled=dcp_enabled,
                    coalescing=coalescing,
                )
            )
        return engs

    grid = initial.copy()
    slabs = _slabs(grid, ranks)
    engines = fresh_engines()
    _require_cold(engines)
    for r in range(ranks):
        engines[r].protect(0, slabs[r])

    steps_at: list[int] = []
    nd_matrix: list[list[float]] = []
    metas: list[list[CheckpointMeta]] = [[] for _ in range(ranks)]
    region_sizes: list[int] = []
    write_sizes: list[int] = []
    resumed_from: int | None = None

    step = 0
    killed = False
    while step < steps:
        step += 1
        _stencil_step(slabs)
        if step % checkpoint_interval == 0:
            row = []
            for r in range(ranks):
                meta = engines[r].checkpoint()
                if verify:
                    _verify_committed(engines[r], meta, {0: slabs[r]})
                metas[r].append(meta)
                row.append(meta.n_d)
                region_sizes.extend(meta.region_bytes)
                write_sizes.extend(meta.write_sizes)
            steps_at.append(step)
            nd_matrix.append(row)
        if kill_at_step is not None and step == kill_at_step and not killed:
            killed = True
            # simulate the process dying: drop engines and all state,
            # then come back from whatever the directories hold
            engines = fresh_engines()
            grid = np.zeros((nx, ny), dtype=np.float64)
            slabs = _slabs(grid, ranks)
            committed_ids = set()
            for r in range(ranks):
                engines[r].protect(0, slabs[r])
                if engines[r].recover() is None:
                    committed_ids.add(0)
                else:
                    committed_ids.add(engines[r].checkpoints()[-1])
            if len(committed_ids) != 1:
                raise RuntimeError(
                    f"ranks disagree about the last committed checkpoint: {committed_ids}"
                )
            last_id = committed_ids.pop()
            if last_id == 0:  # killed before the first checkpoint
                grid[:] = initial
            resumed_from = last_id * checkpoint_interval
            step = resumed_from
            log.info("killed at step %d, resumed from step %d", kill_at_step, step)

    final = grid.copy()
    bit_exact = bool(np.array_equal(final, reference))

    csv_paths: dict[str, object] = {
        "ckpt_logs": [eng.log_path for eng in engines],
    }
    if write_csv:
        nd_path = os.path.join(outdir, "nd_matrix.csv")
        cdf_path = os.path.join(outdir, "chunk_cdf.csv")
        write_nd_matrix_csv(nd_path, steps_at, nd_matrix)
        write_chunk_cdf_csv(cdf_path, {"region": region_sizes, "write": write_sizes})
        csv_paths["nd_matrix"] = nd_path
        csv_paths["chunk_cdf"] = cdf_path
    return Heat2DResult(
        grid=final,
        reference=reference,
        bit_exact=bit_exact,
        steps_at=steps_at,
        nd_matrix=nd_matrix,
        metas=metas,
        kill_at_step=kill_at_step,
        resumed_from_step=resumed_from,
        region_sizes=region_sizes,
        write_sizes=write_sizes,
        csv_paths=csv_paths,
    )


# ------------------------------------------------------------------- sweep


@dataclass
class SweepRow:
    """One block-size sweep measurement against the full-rewrite baseline.

    ``relative_overhead`` is (T_dcp - T_full) / T_full over matching
    checkpoints: negative means the differential path was faster on this
    run. Hardware-dependent; report it, do not assert on it.
    """

    block_size: int
    relative_overhead: float
    dcp_rate: float
    hash_share: float
    write_share: float
    hash_table_bytes: int
    t_dcp_mean: float
    t_dcp_std: float
    t_full_mean: float
    t_full_std: float
    samples: int


def block_size_sweep(
    block_sizes,
    *,
    outdir,
    dataset_bytes: int = 4 << 20,
    fraction: float = 0.1,
    steps: int = 11,
    algorithm: HashAlgorithm = HashAlgorithm.MD5,
    seed: int = 0,
    write_csv: bool = True,
) -> list[SweepRow]:
    """Replay one mutation sequence per block size, dcp vs full baseline.

    Both engines checkpoint the same buffer after the same mutations, so
    the only difference is the write path. The first (full) checkpoint
    of each engine is excluded from the aggregates; the default step
    count leaves 10 timed repetitions per side.
    """
    block_sizes = list(block_sizes)
    if not block_sizes:
        raise ValueError("need at least one block size")
    if steps < 2:
        raise ValueError(f"need at least 2 steps to get a differential sample, got {steps}")
    outdir = os.fspath(outdir)
    os.makedirs(outdir, exist_ok=True)
    rows: list[SweepRow] = []
    for b in block_sizes:
        base = os.path.join(outdir, f"b{b}")
        eng_dcp = CheckpointEngine(
            os.path.join(base, "dcp"), block_size=b, algorithm=algorithm
        )
        eng_full = CheckpointEngine(
            os.path.join(base, "full"), block_size=b, algorithm=algorithm,
            dcp_enabled=False,
        )
        _require_cold([eng_dcp, eng_full])
        init_rng = np.random.default_rng(np.random.SeedSequence((seed, b)))
        buf = bytearray(init_rng.bytes(dataset_bytes))
        eng_dcp.protect(0, buf)
        eng_full.protect(0, buf)

        dcp_metas: list[CheckpointMeta] = []
        full_metas: list[CheckpointMeta] = []
        for step in range(steps):
            if step:
                rng = np.random.default_rng(np.random.SeedSequence((seed, b, step)))
                _mutate_fraction(buf, b, fraction, rng)
            dcp_metas.append(eng_dcp.checkpoint())
            full_metas.append(eng_full.checkpoint())
        _verify_committed(eng_dcp, dcp_metas[-1], {0: buf})
        _verify_committed(eng_full, full_metas[-1], {0: buf})

        diff = dcp_metas[1:]
        base_metas = full_metas[1:]
        hash_s = sum(m.hash_s for m in diff)
        write_s = sum(m.write_s for m in diff)
        dcp_times = [m.hash_s + m.write_s for m in diff]
        full_times = [m.write_s + m.hash_s for m in base_metas]
        t_dcp = statistics.fmean(dcp_times)
        t_full = statistics.fmean(full_times)
        desc = DatasetDescriptor(dataset_id=0, block_size=b, algorithm=algorithm)
        register_blocks(desc, dataset_bytes)
        rows.append(
            SweepRow(
                block_size=b,
                relative_overhead=(t_dcp - t_full) / t_full if t_full > 0 else float("nan"),
                dcp_rate=statistics.fmean(m.n_d for m in diff),
                hash_share=hash_s / (hash_s + write_s) if hash_s + write_s else 0.0,
                write_share=write_s / (hash_s + write_s) if hash_s + write_s else 0.0,
                hash_table_bytes=metadata_bytes(desc),
                t_dcp_mean=t_dcp,
                t_dcp_std=statistics.stdev(dcp_times) if len(dcp_times) > 1 else 0.0,
                t_full_mean=t_full,
                t_full_std=statistics.stdev(full_times) if len(full_times) > 1 else 0.0,
                samples=len(dcp_times),
            )
        )
    if write_csv:
        write_sweep_csv(os.path.join(outdir, "blocksize_sweep.csv"), rows)
    return rows


# ------------------------------------------------------------- csv writers


def write_calibration_csv(path, results) -> str:
    """One row per CalibrationResult."""
    if isinstance(results, CalibrationResult):
        results = [results]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["block_size", "total_bytes", "n_blocks", "trials", "algorithm",
             "t_w", "t_w_var", "t_h", "t_h_var", "rho", "hash_stability"]
        )
        for r in results:
            w.writerow(
                [r.block_size, r.total_bytes, r.n_blocks, r.trials, r.algorithm.value,
                 f"{r.t_w:.9e}", f"{r.t_w_var:.9e}", f"{r.t_h:.9e}", f"{r.t_h_var:.9e}",
                 f"{r.rho:.6f}", f"{r.hash_stability:.4f}"]
            )
    return os.fspath(path)


def write_nd_matrix_csv(path, steps_at, nd_matrix) -> str:
    """Wide rank-by-step matrix: one row per checkpoint step."""
    ranks = len(nd_matrix[0]) if nd_matrix else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + [f"rank_{r}" for r in range(ranks)])
        for step, row in zip(steps_at, nd_matrix):
            w.writerow([step] + [f"{v:.6f}" for v in row])
    return os.fspath(path)


def write_chunk_cdf_csv(path, samples: dict) -> str:
    """Cumulative size distributions, one block of rows per sample kind."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "size", "count", "cum_count", "cum_fraction"])
        for kind in sorted(samples):
            values = sorted(samples[kind])
            total = len(values)
            cum = 0
            for size in sorted(set(values)):
                n = values.count(size)
                cum += n
                w.writerow([kind, size, n, cum, f"{cum / total:.6f}" if total else "0"])
    return os.fspath(path)


def write_sweep_csv(path, rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["block_size", "relative_overhead", "dcp_rate", "hash_share",
             "write_share", "hash_table_bytes", "t_dcp_mean", "t_dcp_std",
             "t_full_mean", "t_full_std", "samples"]
        )
        for r in rows:
            w.writerow(
                [r.block_size, f"{r.relative_overhead:.6f}", f"{r.dcp_rate:.6f}",
                 f"{r.hash_share:.6f}", f"{r.write_share:.6f}", r.hash_table_bytes,
                 f"{r.t_dcp_mean:.9e}", f"{r.t_dcp_std:.9e}",
                 f"{r.t_full_mean:.9e}", f"{r.t_full_std:.9e}", r.samples]
            )
    return os.fspath(path)
