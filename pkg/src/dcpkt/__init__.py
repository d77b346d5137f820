"""dcpkt: differential checkpointing with hash-based dirty-block detection.

The pieces, bottom to top:

- hashing: block digests (Adler32, CRC32, two Fletcher32 variants, MD5)
  plus the avalanche collision harness that justifies picking a strong one.
- block_tracker: per-block valid/dirty metadata and dirty-region scanning.
- container_format: the on-disk checkpoint layout built from immutable
  per-dataset containers, with planning, mapping, and (de)serialization.
- cost_model: when does writing only dirty blocks actually pay off.
- engine: the checkpoint engine that copies the previous file and updates
  it in place, committing via fsync + atomic rename.
- bench: calibration, synthetic update patterns, a heat-diffusion mini-app,
  and a block-size sweep, all emitting CSV (and optional figures).
"""

from .bench import (
    CalibrationResult,
    Heat2DResult,
    PatternRunResult,
    SweepRow,
    UpdatePattern,
    block_size_sweep,
    calibrate,
    run_heat2d,
    run_pattern,
)
from .block_tracker import (
    DatasetDescriptor,
    DirtyRegion,
    block_count,
    commit_hashes,
    dirty_stats,
    metadata_bytes,
    next_dirty_region,
    register_blocks,
)
from .container_format import (
    ContainerSpec,
    CorruptionError,
    FileLayout,
    LayoutError,
    ReadResult,
    container_offsets,
    dataset_capacity,
    plan_layout,
    read_layout,
    write_layout,
)
from .cost_model import (
    CorrectionTerms,
    CostModelParams,
    corrected_tau,
    eta,
    rho,
    speedup,
    tau,
)
from .engine import (
    FAULT_STAGES,
    CheckpointEngine,
    CheckpointMeta,
    EngineConfig,
    SimulatedCrash,
)
from .hashing import (
    DEFAULT_PATTERNS,
    CollisionReport,
    Digest,
    HashAlgorithm,
    avalanche_collision_test,
    digest_width,
    fletcher32,
    fletcher32_collision_pair,
    hash_block,
)

__version__ = "0.1.0"

__all__ = [
    # hashing
    "HashAlgorithm",
    "Digest",
    "CollisionReport",
    "DEFAULT_PATTERNS",
    "avalanche_collision_test",
    "digest_width",
    "fletcher32",
    "fletcher32_collision_pair",
    "hash_block",
    # block tracking
    "DatasetDescriptor",
    "DirtyRegion",
    "block_count",
    "commit_hashes",
    "dirty_stats",
    "metadata_bytes",
    "next_dirty_region",
    "register_blocks",
    # container format
    "ContainerSpec",
    "CorruptionError",
    "FileLayout",
    "LayoutError",
    "ReadResult",
    "container_offsets",
    "dataset_capacity",
    "plan_layout",
    "read_layout",
    "write_layout",
    # cost model
    "CorrectionTerms",
    "CostModelParams",
    "corrected_tau",
    "eta",
    "rho",
    "speedup",
    "tau",
    # engine
    "CheckpointEngine",
    "CheckpointMeta",
    "EngineConfig",
    "FAULT_STAGES",
    "SimulatedCrash",
    # benchmarks
    "CalibrationResult",
    "Heat2DResult",
    "PatternRunResult",
    "SweepRow",
    "UpdatePattern",
    "block_size_sweep",
    "calibrate",
    "run_heat2d",
    "run_pattern",
    "__version__",
]
