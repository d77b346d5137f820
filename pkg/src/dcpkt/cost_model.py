"""Per-block cost model for differential checkpointing.

All quantities are per block. t_w is the time to write one block during
an ordinary full checkpoint, t_h the time to hash one block, and n_d the
fraction of blocks that are dirty (a full checkpoint has n_d = 1 by
convention). The per-block time delta of a differential checkpoint
relative to a full one is

    tau(n_d) = (t_h - t_w) + n_d * (t_w + t_h)

which is negative (differential wins) exactly while n_d stays below the
break-even dirty fraction

    eta = (t_w - t_h) / (t_w + t_h).

speedup() is tau normalized by t_w; at n_d = 1 it degrades to +2*rho
with rho = t_h / t_w, i.e. hashing everything and rewriting everything.

corrected_tau() folds in two second-order effects observed on real
runs: dirty writes that are cheaper than full-checkpoint writes (the
coalescing buffer turns many small writes into few large ones), and
per-region boundary costs. The boundary sums have no closed form, so
they enter as mean per-boundary-block times scaled by n_d_prime, the
boundary-block fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "CostModelParams",
    "CorrectionTerms",
    "tau",
    "eta",
    "rho",
    "speedup",
    "corrected_tau",
]


@dataclass(frozen=True)
class CostModelParams:
    """Calibrated per-block write and hash times, in seconds."""

    t_w: float
    t_h: float

    def __post_init__(self):
        if not self.t_w > 0:
            raise ValueError(f"t_w must be positive, got {self.t_w}")
        if self.t_h < 0:
            raise ValueError(f"t_h must be non-negative, got {self.t_h}")


@dataclass(frozen=True)
class CorrectionTerms:
    """Second-order correction inputs, all per block, in seconds.

    delta_t_w: how much cheaper a dirty-block write is than a
        full-checkpoint write of the same block (>= 0 when coalescing
        helps). Applied as -n_d * delta_t_w.
    extra_block_write_time / extra_block_hash_time: mean extra write and
        hash cost attributed to each region-boundary block, normalized
        per total block. Applied as +n_d_prime * (write + hash).
    """

    delta_t_w: float = 0.0
    extra_block_write_time: float = 0.0
    extra_block_hash_time: float = 0.0

    def __post_init__(self):
        for name in ("delta_t_w", "extra_block_write_time", "extra_block_hash_time"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")


def _check_fraction(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def tau(params: CostModelParams, n_d: float) -> float:
    """Per-block time delta of differential vs full checkpointing (seconds)."""
    _check_fraction("n_d", n_d)
    return (params.t_h - params.t_w) + n_d * (params.t_w + params.t_h)


def eta(params: CostModelParams) -> float:
    """Break-even dirty fraction: tau(eta) == 0."""
    return (params.t_w - params.t_h) / (params.t_w + params.t_h)


def rho(params: CostModelParams) -> float:
    """Hash-to-write cost ratio t_h / t_w."""
    return params.t_h / params.t_w


def speedup(params: CostModelParams, n_d: float) -> float:
    """tau normalized by t_w: rho - 1 + n_d * (rho + 1).

    Negative values mean the differential checkpoint is faster; the
    worst case is n_d = 1 where the overhead tops out at 2 * rho.
    """
    _check_fraction("n_d", n_d)
    r = rho(params)
    return r - 1.0 + n_d * (r + 1.0)


def corrected_tau(
    params: CostModelParams,
    corrections: CorrectionTerms,
    n_d: float,
    n_d_prime: float,
) -> float:
    """tau with write-cost and region-boundary corrections applied.

    With all correction terms zero this equals tau() bit for bit.
    n_d_prime is the fraction of blocks sitting on region boundaries.
    Measured fractions carry jitter, so n_d_prime <= n_d is not
    enforced; both just have to be fractions.
    """
    _check_fraction("n_d", n_d)
    _check_fraction("n_d_prime", n_d_prime)
    boundary = corrections.extra_block_write_time + corrections.extra_block_hash_time
    return tau(params, n_d) - n_d * corrections.delta_t_w + n_d_prime * boundary
