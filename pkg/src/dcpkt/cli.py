"""Command-line entry point.

Subcommands map one-to-one onto the library surface: ``collide`` runs
the hash collision sweep, ``calibrate`` measures per-block write/hash
cost, ``estimate`` evaluates the cost model, ``bench`` drives synthetic
update patterns (or the block-size sweep), ``heat2d`` runs the stencil
workload, and ``inspect`` dumps a checkpoint file.

Exit codes: 0 success, 1 validation or usage error, 2 I/O or corruption
error. Argparse's own usage failures are remapped from its default 2 to
1 so that 2 always means "your data is bad", never "your flags are".

Each run prints a one-line summary to stdout; structured data goes to
CSV files, and the subcommands that produce CSVs also render PNG figures
next to them unless --no-plots is given. ``DCPKT_DIR`` overrides the
default output directory for subcommands that create checkpoints.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys

from . import bench as bench_mod
from .container_format import (
    ALGORITHM_CODES,
    CHECKSUM_WIDTH,
    CHUNK_META_SIZE,
    FORMAT_VERSION,
    MAGIC,
    CorruptionError,
    align8,
    checksum_bytes,
    unpack_chunk_meta,
)
from .cost_model import CorrectionTerms, CostModelParams, corrected_tau, eta, speedup, tau
from .hashing import HashAlgorithm, avalanche_collision_test

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems as exit code 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _default_dir() -> str:
    return os.environ.get("DCPKT_DIR", os.path.join(".", "dcpkt_out"))


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _alg_list(text: str) -> list[HashAlgorithm]:
    if text == "all":
        return list(HashAlgorithm)
    try:
        return [HashAlgorithm.from_name(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _png_next_to(csv_path) -> str:
    root, _ = os.path.splitext(os.fspath(csv_path))
    return root + ".png"


def build_parser() -> _Parser:
    parser = _Parser(prog="dcpkt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand",
                            parser_class=_Parser)

    p = sub.add_parser("collide",
                       help="hash collision sweep under accumulating mutations")
    p.add_argument("--alg", type=_alg_list, default=list(HashAlgorithm),
                   help="comma-separated algorithms, or 'all' (default)")
    p.add_argument("--b", type=_int_list, default=[128],
                   help="comma-separated block sizes in bytes")
    p.add_argument("--iters", type=int, default=1_000_000,
                   help="comparisons per (algorithm, b, pattern) cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="collisions.csv")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("calibrate",
                       help="measure per-block write and hash times")
    p.add_argument("--b", type=int, default=16384, help="block size in bytes")
    p.add_argument("--bytes", type=int, default=64 << 20, dest="total_bytes",
                   help="buffer size per trial (multiple of --b)")
    p.add_argument("--path", default=None,
                   help="scratch file on the filesystem under test")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--alg", type=HashAlgorithm.from_name, default=HashAlgorithm.MD5)
    p.add_argument("--out", default="calibration.csv")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("estimate",
                       help="evaluate the cost model at given parameters")
    p.add_argument("--tw", type=float, required=True, help="seconds to write one block")
    p.add_argument("--th", type=float, required=True, help="seconds to hash one block")
    p.add_argument("--nd", type=float, required=True, help="dirty block fraction")
    p.add_argument("--b", type=int, default=None, help="block size, echoed for context")
    p.add_argument("--corrections", default=None,
                   help="JSON file with delta_t_w, extra_block_write_time, "
                        "extra_block_hash_time, n_d_prime")

    p = sub.add_parser("bench",
                       help="synthetic update patterns or the block-size sweep")
    p.add_argument("--pattern", required=True,
                   choices=["uniform", "wavefront", "strided_growth", "sweep"])
    p.add_argument("--ranks", type=int, default=4)
    p.add_argument("--bytes", type=int, default=1 << 20, dest="bytes_per_rank",
                   help="dataset bytes per rank")
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--interval", type=int, default=1, help="steps per checkpoint")
    p.add_argument("--b", type=_int_list, default=[16384],
                   help="block size; comma-separated list for --pattern sweep")
    p.add_argument("--alg", type=HashAlgorithm.from_name, default=HashAlgorithm.MD5)
    p.add_argument("--coalesce", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--fraction", type=float, default=0.1,
                   help="update fraction (uniform/wavefront/sweep)")
    p.add_argument("--front-speed", type=float, default=None,
                   help="wavefront ranks per step (default: ranks/steps)")
    p.add_argument("--hot-rank0", action="store_true",
                   help="wavefront: pin rank 0 at an 80%% update fraction")
    p.add_argument("--stride", type=int, default=8, help="strided_growth stride")
    p.add_argument("--growth-bytes", type=int, default=0,
                   help="strided_growth bytes appended per rank per step")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", default=None)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("heat2d",
                       help="2D heat stencil with mid-run kill and resume")
    p.add_argument("--nx", type=int, default=256)
    p.add_argument("--ny", type=int, default=256)
    p.add_argument("--ranks", type=int, default=4)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--interval", type=int, default=50)
    p.add_argument("--b", type=int, default=16384, help="block size in bytes")
    p.add_argument("--alg", type=HashAlgorithm.from_name, default=HashAlgorithm.MD5)
    p.add_argument("--kill-at", type=int, default=None,
                   help="step to kill and recover at (0 disables; default mid-run)")
    p.add_argument("--outdir", default=None)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("inspect",
                       help="dump a checkpoint file's structure and checksums")
    p.add_argument("file")
    p.add_argument("--csv", action="store_true",
                   help="machine-readable rows on stdout instead of text")
    return parser


# ------------------------------------------------------------ subcommands


def _cmd_collide(args) -> int:
    report = avalanche_collision_test(args.alg, args.b, iterations=args.iters,
                                      rng_seed=args.seed)
    with open(args.out, "w") as fh:
        report.write_csv(fh)
    worst = max(report.cells, key=lambda c: c.rate)
    outputs = [args.out]
    if not args.no_plots:
        from .report import render_collisions

        outputs.append(render_collisions(_png_next_to(args.out), report))
    print(
        f"collide: {len(report.cells)} cells, {args.iters} iters each, max rate "
        f"{worst.rate:.3e} ({worst.algorithm.value} b={worst.block_size} "
        f"pattern={worst.pattern:#x}) -> {' '.join(outputs)}"
    )
    return 0


def _cmd_calibrate(args) -> int:
    path = args.path
    if path is None:
        os.makedirs(_default_dir(), exist_ok=True)
        path = os.path.join(_default_dir(), "calibration.scratch")
    result = bench_mod.calibrate(args.b, args.total_bytes, path,
                                 trials=args.trials, algorithm=args.alg)
    bench_mod.write_calibration_csv(args.out, result)
    outputs = [args.out]
    if not args.no_plots:
        from .report import render_calibration

        outputs.append(render_calibration(_png_next_to(args.out), result))
    print(
        f"calibrate: b={args.b} t_w={result.t_w:.6e}s t_h={result.t_h:.6e}s "
        f"rho={result.rho:.4f} over {args.trials} trials -> {' '.join(outputs)}"
    )
    return 0


def _cmd_estimate(args) -> int:
    params = CostModelParams(t_w=args.tw, t_h=args.th)
    t = tau(params, args.nd)
    e = eta(params)
    s = speedup(params, args.nd)
    parts = [f"tau={t:.6e}", f"eta={e:.6f}", f"S={s:.6f}"]
    if args.b is not None:
        parts.insert(0, f"b={args.b}")
    decisive = t
    if args.corrections is not None:
        with open(args.corrections) as fh:
            raw = json.load(fh)
        known = {"delta_t_w", "extra_block_write_time", "extra_block_hash_time",
                 "n_d_prime"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown correction keys: {sorted(unknown)}")
        n_d_prime = raw.pop("n_d_prime", 0.0)
        terms = CorrectionTerms(**raw)
        decisive = corrected_tau(params, terms, args.nd, n_d_prime)
        parts.append(f"tau_corrected={decisive:.6e}")
    if abs(decisive) < 1e-9 * args.tw:
        verdict = "AT-THRESHOLD"
    elif decisive < 0:
        verdict = "SPEEDUP"
    else:
        verdict = "OVERHEAD"
    print(" ".join(parts) + f" verdict={verdict}")
    return 0


def _cmd_bench(args) -> int:
    outdir = args.outdir if args.outdir is not None else _default_dir()
    if args.pattern == "sweep":
        rows = bench_mod.block_size_sweep(
            args.b, outdir=outdir, dataset_bytes=args.bytes_per_rank,
            fraction=args.fraction, steps=args.steps, algorithm=args.alg,
            seed=args.seed,
        )
        csv_path = os.path.join(outdir, "blocksize_sweep.csv")
        outputs = [csv_path]
        if not args.no_plots:
            from .report import render_sweep

            outputs.append(render_sweep(os.path.join(outdir, "blocksize_sweep.png"), rows))
        best = min(rows, key=lambda r: r.relative_overhead)
        print(
            f"bench sweep: {len(rows)} block sizes, best overhead "
            f"{best.relative_overhead:+.3f} at b={best.block_size} -> {' '.join(outputs)}"
        )
        return 0
    if len(args.b) != 1:
        raise _UsageError("dcpkt bench: error: one --b value unless --pattern sweep")
    pattern = bench_mod.UpdatePattern(
        kind=args.pattern.upper(),
        ranks=args.ranks,
        steps=args.steps,
        fraction=args.fraction,
        front_speed=args.front_speed,
        hot_rank0=args.hot_rank0,
        stride=args.stride,
        growth_bytes=args.growth_bytes,
    )
    result = bench_mod.run_pattern(
        pattern, outdir=outdir, bytes_per_rank=args.bytes_per_rank,
        block_size=args.b[0], algorithm=args.alg, coalescing=args.coalesce,
        checkpoint_interval=args.interval, seed=args.seed,
    )
    outputs = [result.csv_paths["nd_matrix"], result.csv_paths["chunk_cdf"]]
    if not args.no_plots:
        from .report import render_chunk_cdf, render_nd_matrix

        outputs.append(render_nd_matrix(os.path.join(outdir, "nd_matrix.png"),
                                        result.steps_at, result.nd_matrix))
        outputs.append(render_chunk_cdf(
            os.path.join(outdir, "chunk_cdf.png"),
            {"region": result.region_sizes, "write": result.write_sizes},
        ))
    flat = [v for row in result.nd_matrix for v in row]
    mean_nd = sum(flat) / len(flat) if flat else 0.0
    print(
        f"bench {pattern.kind}: ranks={pattern.ranks} steps={pattern.steps} "
        f"checkpoints={len(result.steps_at)} mean n_d={mean_nd:.3f} "
        f"-> {' '.join(str(o) for o in outputs)}"
    )
    return 0


def _cmd_heat2d(args) -> int:
    outdir = args.outdir if args.outdir is not None else _default_dir()
    result = bench_mod.run_heat2d(
        outdir, nx=args.nx, ny=args.ny, ranks=args.ranks, steps=args.steps,
        checkpoint_interval=args.interval, block_size=args.b,
        algorithm=args.alg, kill_at_step=args.kill_at,
    )
    outputs = [result.csv_paths["nd_matrix"], result.csv_paths["chunk_cdf"]]
    if not args.no_plots:
        from .report import render_chunk_cdf, render_nd_matrix

        outputs.append(render_nd_matrix(os.path.join(outdir, "nd_matrix.png"),
                                        result.steps_at, result.nd_matrix))
        outputs.append(render_chunk_cdf(
            os.path.join(outdir, "chunk_cdf.png"),
            {"region": result.region_sizes, "write": result.write_sizes},
        ))
    resumed = (f"resumed from step {result.resumed_from_step}"
               if result.resumed_from_step is not None else "no kill")
    state = "bit-exact" if result.bit_exact else "NOT bit-exact"
    print(
        f"heat2d: {args.nx}x{args.ny} ranks={args.ranks} steps={args.steps} "
        f"{resumed}, final grid {state} vs uninterrupted run "
        f"-> {' '.join(str(o) for o in outputs)}"
    )
    return 0 if result.bit_exact else 2


# ----------------------------------------------------------------- inspect


def _walk_checkpoint(path) -> tuple[list[tuple[str, str, str, str]], bool]:
    """Tolerant structure walk: (record, name, value, status) rows.

    Unlike read_layout this keeps going past the first problem so a
    damaged file still yields a useful dump; any BAD row marks the file
    corrupt.
    """
    rows: list[tuple[str, str, str, str]] = []
    corrupt = False

    def emit(record, name, value, status=""):
        nonlocal corrupt
        if status == "BAD":
            corrupt = True
        rows.append((record, name, str(value), status))

    with open(path, "rb") as fh:
        data = fh.read()
    emit("file", "bytes", len(data))
    if len(data) < 48:
        emit("header", "fixed", "truncated", "BAD")
        return rows, corrupt
    magic, version, block_size, alg_code, checkpoint_id, count = struct.unpack(
        "<8sL4xQB7xQQ", data[:48]
    )
    emit("header", "magic", magic.hex(), "OK" if magic == MAGIC else "BAD")
    emit("header", "version", version,
         "OK" if version == FORMAT_VERSION else "BAD")
    emit("header", "block_size", block_size, "OK" if block_size > 0 else "BAD")
    code_to_alg = {code: alg for alg, code in ALGORITHM_CODES.items()}
    algorithm = code_to_alg.get(alg_code)
    if algorithm is None:
        emit("header", "algorithm", f"code {alg_code}", "BAD")
        return rows, corrupt
    emit("header", "algorithm", algorithm.value, "OK")
    emit("header", "checkpoint_id", checkpoint_id)
    emit("header", "datasets", count)

    table_end = 48 + 16 * count
    if len(data) < table_end + CHECKSUM_WIDTH:
        emit("header", "dataset_table", "truncated", "BAD")
        return rows, corrupt
    sizes: dict[int, int] = {}
    for i in range(count):
        ds_id, size = struct.unpack_from("<QQ", data, 48 + 16 * i)
        status = "BAD" if ds_id in sizes else ""
        emit("dataset", str(ds_id), size, status)
        sizes.setdefault(ds_id, size)
    stored_meta = data[table_end : table_end + CHECKSUM_WIDTH]

    pos = table_end + CHECKSUM_WIDTH
    metas = []
    covered = {ds_id: 0 for ds_id in sizes}
    order_ok = {ds_id: 0 for ds_id in sizes}
    while pos < len(data):
        if pos + CHUNK_META_SIZE > len(data):
            emit("chunk", "meta", f"truncated at {pos}", "BAD")
            break
        meta = data[pos : pos + CHUNK_META_SIZE]
        ds_id, index, chunk, capacity, checksum = unpack_chunk_meta(meta)
        name = f"ds={ds_id} idx={index}"
        issues = []
        if ds_id not in sizes:
            issues.append("unknown dataset")
        elif index != order_ok[ds_id]:
            issues.append(f"out of order (expected idx {order_ok[ds_id]})")
        payload_start = pos + CHUNK_META_SIZE
        payload_end = payload_start + align8(capacity)
        if chunk > capacity:
            issues.append("chunk exceeds capacity")
        if payload_end > len(data):
            issues.append("payload truncated")
            emit("chunk", name, f"chunk={chunk} capacity={capacity}; " + "; ".join(issues), "BAD")
            break
        payload = data[payload_start : payload_start + min(chunk, capacity)]
        if not issues and checksum_bytes(algorithm, payload) != checksum:
            issues.append("payload checksum mismatch")
        emit("chunk", name, f"chunk={chunk} capacity={capacity}",
             "BAD" if issues else "OK")
        for issue in issues:
            emit("chunk", name, issue, "BAD")
        if ds_id in sizes:
            order_ok[ds_id] = index + 1
            covered[ds_id] += capacity
        metas.append(meta)
        pos = payload_end
    else:
        for ds_id, size in sizes.items():
            if covered[ds_id] < size:
                emit("dataset", str(ds_id),
                     f"containers cover {covered[ds_id]} of {size} bytes", "BAD")

    prefix = data[:table_end]
    recomputed = checksum_bytes(algorithm, prefix + b"".join(metas))
    emit("meta_checksum", "header+chunk metas", stored_meta.hex(),
         "OK" if recomputed == stored_meta else "BAD")
    return rows, corrupt


def _cmd_inspect(args) -> int:
    rows, corrupt = _walk_checkpoint(args.file)
    if args.csv:
        print("record,name,value,status")
        for record, name, value, status in rows:
            value = value.replace('"', '""')
            print(f'{record},{name},"{value}",{status}')
    else:
        width = max(len(f"{r} {n}") for r, n, _, _ in rows)
        for record, name, value, status in rows:
            label = f"{record} {name}".ljust(width)
            tail = f"  [{status}]" if status else ""
            print(f"{label}  {value}{tail}")
        print(f"{args.file}: {'CORRUPT' if corrupt else 'OK'}")
    return 2 if corrupt else 0


# ------------------------------------------------------------------ driver

_COMMANDS = {
    "collide": _cmd_collide,
    "calibrate": _cmd_calibrate,
    "estimate": _cmd_estimate,
    "bench": _cmd_bench,
    "heat2d": _cmd_heat2d,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.subcommand](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return exc.code or 0
    except (CorruptionError, OSError) as exc:
        print(f"dcpkt: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"dcpkt: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"dcpkt: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
