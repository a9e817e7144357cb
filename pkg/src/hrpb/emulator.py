"""Instrumented emulation of the tensor-core SpMM kernel over HRPB, plus a CSR oracle."""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import BRICK_K, BRICK_M, BRICK_N, Block, HrpbConfig, IntegrityError, csr_to_hrpb
from .sparse_io import DenseMatrix

__all__ = [
    "DimensionError",
    "ExecConfig",
    "ExecStats",
    "VerifyReport",
    "RTOL",
    "brick_mma",
    "decode_brick",
    "spmm_reference",
    "spmm_hrpb",
    "compare",
    "verify",
]

#: per-element oracle tolerance: |got - ref| <= RTOL * (1 + |ref|)
RTOL = 1e-4

_POS = np.arange(64, dtype=np.uint64)


class DimensionError(ValueError):
    pass


def _as_array(b):
    if isinstance(b, DenseMatrix):
        return b.data
    arr = np.asarray(b, dtype=np.float32)
    if arr.ndim != 2:
        raise DimensionError("dense operand must be 2-d")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class ExecConfig:
    """Launch geometry for one SpMM; only the counters depend on it."""

    n: int
    tn_per_warp: int = 32
    warp_coarsening: int = 4

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")

    @property
    def n_padded(self):
        return -(-self.n // BRICK_N) * BRICK_N

    @property
    def n_subtiles(self):
        return self.n_padded // BRICK_N

    @property
    def warps_per_block(self):
        return max(1, min(4, self.n_padded // (self.warp_coarsening * BRICK_N)))

    def grid(self, num_panels):
        cols = self.warps_per_block * self.tn_per_warp
        return (num_panels, -(-self.n_padded // cols))


@dataclass
class ExecStats:
    mma_count: int = 0
    b_fragment_loads: int = 0
    b_fragment_loads_active: int = 0
    b_staging_elements: int = 0
    a_block_bytes: int = 0
    decode_ops: int = 0
    useful_macs: int = 0
    per_panel_blocks: Counter = field(default_factory=Counter)
    warps_per_block: int = 0
    grid: tuple = (0, 0)

    def merge(self, other):
        self.mma_count += other.mma_count
        self.b_fragment_loads += other.b_fragment_loads
        self.b_fragment_loads_active += other.b_fragment_loads_active
        self.b_staging_elements += other.b_staging_elements
        self.a_block_bytes += other.a_block_bytes
        self.decode_ops += other.decode_ops
        self.useful_macs += other.useful_macs
        self.per_panel_blocks.update(other.per_panel_blocks)
        return self

    @property
    def macs_per_fragment(self):
        """Useful MACs per 4x8 B-fragment fetched for a non-empty brick column."""
        if not self.b_fragment_loads_active:
            return 0.0
        return self.useful_macs / self.b_fragment_loads_active

    def to_dict(self):
        d = asdict(self)
        d["per_panel_blocks"] = {str(k): v for k, v in sorted(self.per_panel_blocks.items())}
        d["grid"] = list(self.grid)
        d["macs_per_fragment"] = self.macs_per_fragment
        return d


def brick_mma(a_frag, b_frag, c_frag):
    """``c_frag += a_frag @ b_frag`` with the k-extent accumulated in ascending order.

    ``b_frag`` may hold several 4x8 fragments side by side (width a multiple
    of 8); each output element sees exactly the same operation sequence as
    with a single fragment. Updates ``c_frag`` in place and returns it.
    """
    if a_frag.shape != (BRICK_M, BRICK_K):
        raise ValueError("a_frag must be 16x4")
    width = b_frag.shape[1]
    if b_frag.shape[0] != BRICK_K or width % BRICK_N or c_frag.shape != (BRICK_M, width):
        raise ValueError("b_frag must be 4x(8*s) and c_frag 16x(8*s)")
    for k in range(BRICK_K):
        c_frag += a_frag[:, k:k + 1] * b_frag[k]
    return c_frag


def decode_brick(pattern, nnz_array, nnz_offset):
    """Expand one brick to a dense, zero-filled 16x4 fragment.

    Lane ``l`` of the warp owns positions ``l`` and ``l + 32``; a set bit at
    position ``p`` reads ``nnz_array[nnz_offset + prefix_index(pattern, p)]``.
    """
    bits = ((np.uint64(pattern) >> _POS) & np.uint64(1)).astype(bool)
    index = np.cumsum(bits) - bits
    frag = np.zeros(64, dtype=np.float32)
    frag[bits] = nnz_array[nnz_offset + index[bits]]
    return frag.reshape(BRICK_M, BRICK_K)


def _run_panel(h, panel, b, ecfg):
    cfg = h.config
    tk, nbc, tm = cfg.tk, cfg.brick_cols, cfg.tm
    K = h.num_cols
    n, n_pad, nsub = ecfg.n, ecfg.n_padded, ecfg.n_subtiles
    stats = ExecStats()
    acc = np.zeros((tm, n_pad), dtype=np.float32)
    staged = np.zeros((tk, n_pad), dtype=np.float32)
    start, end = int(h.blocked_row_ptr[panel]), int(h.blocked_row_ptr[panel + 1])
    stats.per_panel_blocks[end - start] += 1

    for block_id in range(start, end):
        raw = h.block_bytes(block_id)
        stats.a_block_bytes += len(raw)
        blk = Block.from_bytes(raw, tk)
        blk.validate(cfg)

        staged[:] = 0
        ac = blk.active_cols
        real = ac < K
        staged[real, :n] = b[ac[real]]
        stats.b_staging_elements += tk * n_pad

        col_ptr, rows, patterns, nnz = blk.col_ptr, blk.rows, blk.patterns, blk.nnz_array
        nnz_offset = 0
        for i in range(nbc):
            b_frag = staged[i * BRICK_K:(i + 1) * BRICK_K]
            lo, hi = int(col_ptr[i]), int(col_ptr[i + 1])
            stats.b_fragment_loads += nsub
            if hi > lo:
                stats.b_fragment_loads_active += nsub
            for j in range(lo, hi):
                row = int(rows[j])
                pattern = int(patterns[j])
                a_frag = decode_brick(pattern, nnz, nnz_offset)
                stats.decode_ops += 2
                count = pattern.bit_count()
                nnz_offset += count
                brick_mma(a_frag, b_frag, acc[row * BRICK_M:(row + 1) * BRICK_M])
                stats.mma_count += nsub
                stats.useful_macs += count * n_pad
        if nnz_offset != nnz.size:
            raise IntegrityError(f"block {block_id}: traversal consumed {nnz_offset} of {nnz.size} values")

    row_lo = panel * tm
    row_hi = min(row_lo + tm, h.num_rows)
    return row_lo, acc[:row_hi - row_lo, :n], stats


def spmm_hrpb(h, b, cfg=None, *, jobs=1):
    """Compute ``A @ B`` by walking the HRPB structure block by block.

    Returns ``(C, ExecStats)``. Row panels are independent; ``jobs > 1``
    runs them on a thread pool and gives bit-identical output.
    """
    b = _as_array(b)
    if b.shape[0] != h.num_cols:
        raise DimensionError(f"A is {h.num_rows}x{h.num_cols} but B has {b.shape[0]} rows")
    if cfg is None:
        cfg = ExecConfig(n=max(b.shape[1], 1))
    if cfg.n != b.shape[1]:
        raise DimensionError(f"ExecConfig.n={cfg.n} but B has {b.shape[1]} columns")

    c = np.zeros((h.num_rows, cfg.n), dtype=np.float32)
    total = ExecStats(warps_per_block=cfg.warps_per_block, grid=cfg.grid(h.num_panels))
    panels = range(h.num_panels)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda p: _run_panel(h, p, b, cfg), panels))
    else:
        results = [_run_panel(h, p, b, cfg) for p in panels]
    # reduce in panel order regardless of completion order
    for row_lo, block, stats in results:
        c[row_lo:row_lo + block.shape[0]] = block
        total.merge(stats)
    return DenseMatrix(c), total


def spmm_reference(csr, b):
    """Row-wise CSR SpMM, each row accumulated in ascending column order."""
    b = _as_array(b)
    if csr.num_cols != b.shape[0]:
        raise DimensionError(f"A is {csr.num_rows}x{csr.num_cols} but B has {b.shape[0]} rows")
    c = np.zeros((csr.num_rows, b.shape[1]), dtype=np.float32)
    lengths = np.diff(csr.row_ptr)
    starts = csr.row_ptr[:-1]
    for p in range(int(lengths.max()) if lengths.size else 0):
        live = np.flatnonzero(lengths > p)
        at = starts[live] + p
        c[live] += csr.values[at, None] * b[csr.col_idx[at]]
    return DenseMatrix(c)


@dataclass(frozen=True)
class VerifyReport:
    max_abs_err: float
    max_rel_err: float
    passed: bool

    def to_dict(self):
        return {"max_abs_err": self.max_abs_err, "max_rel_err": self.max_rel_err, "pass": self.passed}


def compare(result, reference, rtol=RTOL):
    got, ref = _as_array(result), _as_array(reference)
    if got.shape != ref.shape:
        raise DimensionError(f"shape mismatch {got.shape} vs {ref.shape}")
    if got.size == 0:
        return VerifyReport(0.0, 0.0, True)
    diff = np.abs(got.astype(np.float64) - ref.astype(np.float64))
    scaled = diff / (1.0 + np.abs(ref.astype(np.float64)))
    max_rel = float(scaled.max())
    return VerifyReport(float(diff.max()), max_rel, bool(max_rel <= rtol))


def verify(csr, b, config=HrpbConfig(), *, hrpb=None, jobs=1):
    """Run the HRPB emulator and the CSR oracle; compare per element.

    ``max_rel_err`` is ``max |got - ref| / (1 + |ref|)``, and the check
    passes iff it is at most :data:`RTOL`. Returns ``(report, stats)``.
    """
    b = _as_array(b)
    if csr.num_cols != b.shape[0]:
        raise DimensionError(f"A is {csr.num_rows}x{csr.num_cols} but B has {b.shape[0]} rows")
    h = hrpb if hrpb is not None else csr_to_hrpb(csr, config)
    got, stats = spmm_hrpb(h, b, jobs=jobs)
    ref = spmm_reference(csr, b)
    return compare(got, ref), stats
