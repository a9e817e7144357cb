"""Command-line front end: ``hrpb convert|spmm|classify|bench``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .binary import HrpbFormatError, is_hrpb_file, load_hrpb, save_hrpb
from .core import ConfigError, Hrpb, HrpbConfig, IntegrityError, csr_to_hrpb, hrpb_to_csr
from .emulator import DimensionError, ExecConfig, compare, spmm_hrpb, spmm_reference
from .model import UndefinedAlphaError, model_report
from .sparse_io import MatrixMarketError, coo_to_csr, read_matrix_market
from .validation import random_dense

log = logging.getLogger("hrpb")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

DATA_ERRORS = (MatrixMarketError, HrpbFormatError, IntegrityError, DimensionError,
               UndefinedAlphaError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class BenchRecord:
    matrix_name: str
    M: int
    K: int
    nnz: int
    n: int
    alpha: float
    beta: float
    synergy: str
    oi_shmem: float
    mma_count: int
    b_fragment_loads: int
    convert_wall_time: float
    spmm_wall_time: float
    verify_pass: bool


BENCH_FIELDS = [f.name for f in fields(BenchRecord)]
TIMING_FIELDS = ("convert_wall_time", "spmm_wall_time")


def _config(args):
    try:
        return HrpbConfig(tm=args.tm, tk=args.tk)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _open_matrix(path):
    """Load ``path`` as CSR (.mtx) or Hrpb (binary, detected by magic)."""
    try:
        if is_hrpb_file(path):
            return load_hrpb(path)
        return read_matrix_market(path)
    except OSError as exc:
        raise OSError(f"cannot open {path}: {exc.strerror or exc}") from None


def _load_csr(path):
    m = _open_matrix(path)
    return hrpb_to_csr(m) if isinstance(m, Hrpb) else coo_to_csr(m)


def _emit(args, payload, text_lines):
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        for line in text_lines:
            print(line)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_convert(args):
    config = _config(args)
    csr = _load_csr(args.input)
    t0 = time.perf_counter()
    h = csr_to_hrpb(csr, config, jobs=args.jobs)
    elapsed = time.perf_counter() - t0
    try:
        save_hrpb(h, args.output)
    except OSError as exc:
        raise OSError(f"cannot open {args.output} for writing: {exc.strerror or exc}") from None
    t = h.bricks()
    summary = {
        "input": str(args.input),
        "output": str(args.output),
        "M": h.num_rows,
        "K": h.num_cols,
        "nnz": t.nnz,
        "tm": config.tm,
        "tk": config.tk,
        "panels": h.num_panels,
        "blocks": h.num_blocks,
        "active_bricks": t.total_bricks,
        "packed_bytes": len(h.packed_blocks),
        "convert_wall_time": elapsed,
    }
    _emit(args, summary, [
        f"wrote {args.output}",
        f"  {h.num_rows}x{h.num_cols}, nnz={t.nnz}, tm={config.tm}, tk={config.tk}",
        f"  panels={h.num_panels} blocks={h.num_blocks} active_bricks={t.total_bricks} "
        f"packed_bytes={len(h.packed_blocks)}",
    ])
    return EXIT_OK


def cmd_spmm(args):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    config = _config(args)
    m = _open_matrix(args.matrix)
    if isinstance(m, Hrpb):
        h = m
        csr = hrpb_to_csr(h) if args.verify else None
    else:
        csr = coo_to_csr(m)
        h = csr_to_hrpb(csr, config, jobs=args.jobs)
    b = random_dense(h.num_cols, args.n, args.seed)
    t0 = time.perf_counter()
    c, stats = spmm_hrpb(h, b, ExecConfig(n=args.n), jobs=args.jobs)
    elapsed = time.perf_counter() - t0

    payload = {
        "matrix": str(args.matrix),
        "M": h.num_rows,
        "K": h.num_cols,
        "n": args.n,
        "seed": args.seed,
        "spmm_wall_time": elapsed,
        "stats": stats.to_dict(),
    }
    lines = [
        f"C = A({h.num_rows}x{h.num_cols}) @ B({h.num_cols}x{args.n}) in {elapsed:.3f}s",
        f"  mma_count={stats.mma_count} b_fragment_loads={stats.b_fragment_loads} "
        f"decode_ops={stats.decode_ops}",
        f"  b_staging_elements={stats.b_staging_elements} a_block_bytes={stats.a_block_bytes}",
        f"  warps_per_block={stats.warps_per_block} grid={stats.grid}",
    ]
    status = EXIT_OK
    if args.verify:
        report = compare(c, spmm_reference(csr, b))
        payload["verify"] = report.to_dict()
        lines.append(
            f"verify: {'pass' if report.passed else 'FAIL'} "
            f"max_abs_err={report.max_abs_err:g} max_rel_err={report.max_rel_err:g}"
        )
        if not report.passed:
            status = EXIT_DATA
    _emit(args, payload, lines)
    return status


def cmd_classify(args):
    config = _config(args)
    m = _open_matrix(args.input)
    h = m if isinstance(m, Hrpb) else csr_to_hrpb(coo_to_csr(m), config)
    report = model_report(h)
    _emit(args, {"input": str(args.input), "M": h.num_rows, "K": h.num_cols, **report.to_dict()}, [
        f"alpha={report.alpha:.6g} beta={report.beta:.6g} oi_shmem={report.oi_shmem:.6g} "
        f"synergy={report.synergy.value}",
    ])
    return EXIT_OK


def _bench_one(path, ns, seed, tm, tk):
    """Run one corpus matrix; returns ``(records, error)``."""
    name = Path(path).stem
    try:
        csr = _load_csr(path)
        t0 = time.perf_counter()
        h = csr_to_hrpb(csr, HrpbConfig(tm=tm, tk=tk))
        convert_time = time.perf_counter() - t0
        report = model_report(h)
        records = []
        for n in ns:
            b = random_dense(csr.num_cols, n, seed)
            t0 = time.perf_counter()
            c, stats = spmm_hrpb(h, b, ExecConfig(n=n))
            spmm_time = time.perf_counter() - t0
            ok = compare(c, spmm_reference(csr, b)).passed
            records.append(BenchRecord(
                name, csr.num_rows, csr.num_cols, csr.nnz, n, report.alpha, report.beta,
                report.synergy.value, report.oi_shmem, stats.mma_count, stats.b_fragment_loads,
                convert_time, spmm_time, ok,
            ))
        return records, None
    except Exception as exc:  # isolate per-matrix failures
        return [], {"matrix_name": name, "path": str(path), "error": f"{type(exc).__name__}: {exc}"}


def _parse_widths(text):
    try:
        ns = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--n expects a comma-separated list of integers, got {text!r}") from None
    if not ns or min(ns) < 1:
        raise UsageError("--n widths must be positive")
    return ns


def cmd_bench(args):
    ns = _parse_widths(args.n)
    _config(args)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    corpus = Path(args.dir)
    if not corpus.is_dir():
        raise OSError(f"cannot open corpus directory {corpus}")
    paths = sorted(corpus.glob("*.mtx"))
    if not paths:
        log.warning("no .mtx files found in %s", corpus)

    work = [(str(p), ns, args.seed, args.tm, args.tk) for p in paths]
    if args.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(min(args.jobs, len(work))) as pool:
            results = list(pool.map(_bench_one, *zip(*work)))
    else:
        results = [_bench_one(*w) for w in work]

    records = sorted((r for recs, _ in results for r in recs), key=lambda r: (r.matrix_name, r.n))
    failures = [err for _, err in results if err is not None]
    for err in failures:
        log.error("failed %s: %s", err["matrix_name"], err["error"])

    try:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(BENCH_FIELDS)
            for r in records:
                w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
    except OSError as exc:
        raise OSError(f"cannot open {args.csv} for writing: {exc.strerror or exc}") from None

    _emit(args, {
        "csv": str(args.csv),
        "matrices": len(paths),
        "records": len(records),
        "failures": failures,
    }, [f"wrote {len(records)} records for {len(paths)} matrices to {args.csv}"
        + (f" ({len(failures)} failed)" if failures else "")])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _tiling(p):
    p.add_argument("--tm", type=int, default=16, help="row-panel height (multiple of 16)")
    p.add_argument("--tk", type=int, default=16, help="block width (multiple of 4)")


def build_parser():
    parser = _Parser(prog="hrpb", description="HRPB sparse format and tensor-core SpMM emulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="Matrix Market -> binary HRPB")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _tiling(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("spmm", help="run the emulated SpMM on a seeded B")
    p.add_argument("--matrix", required=True, help=".mtx or binary HRPB file")
    p.add_argument("--n", type=int, required=True, help="dense width N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verify", action="store_true", help="compare against the CSR oracle")
    _tiling(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_spmm)

    p = sub.add_parser("classify", help="alpha, beta, OI_shmem and synergy class")
    p.add_argument("--input", required=True)
    _tiling(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bench", help="sweep a directory of .mtx files")
    p.add_argument("--dir", required=True)
    p.add_argument("--n", default="32,128,512", help="comma-separated dense widths")
    p.add_argument("--csv", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _tiling(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, bad flags exit 1
        return exc.code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hrpb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"hrpb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
