"""HRPB (hierarchical row-panel blocking) format: types, conversion and validation.

Layout of one serialized block (little-endian, block start 8-byte aligned)::

    u32 nnz_count
    u32 num_bricks
    u32 active_cols[tk]            original column ids, sentinel K for padding
    u32 col_ptr[tk / brick_k + 1]  brick-CSC column pointer
    u32 rows[num_bricks]           brick-row index of each active brick
    pad to 8 bytes
    u64 patterns[num_bricks]       occupancy bitmap, bit i = row-major element i
    f32 nnz_array[nnz_count]       values, brick-CSC order, row-major in a brick
    pad to 8 bytes
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .sparse_io import CooMatrix, CsrMatrix, coo_to_csr

__all__ = [
    "BRICK_M",
    "BRICK_K",
    "BRICK_N",
    "ConfigError",
    "IntegrityError",
    "HrpbConfig",
    "Block",
    "Hrpb",
    "BrickTable",
    "compact_active_columns",
    "encode_brick_pattern",
    "decode_brick_pattern",
    "prefix_index",
    "popcount",
    "csr_to_hrpb",
    "hrpb_to_csr",
]

BRICK_M = 16
BRICK_K = 4
BRICK_N = 8
BRICK_SIZE = BRICK_M * BRICK_K

_U64_ONE = np.uint64(1)


class ConfigError(ValueError):
    pass


class IntegrityError(ValueError):
    """Raised when HRPB metadata is internally inconsistent."""


@dataclass(frozen=True)
class HrpbConfig:
    tm: int = 16
    tk: int = 16
    brick_m: int = BRICK_M
    brick_k: int = BRICK_K
    brick_n: int = BRICK_N
    warp_coarsening: int = 4

    def __post_init__(self):
        if (self.brick_m, self.brick_k, self.brick_n) != (BRICK_M, BRICK_K, BRICK_N):
            raise ConfigError("brick shape is fixed at 16x4 (A) and 4x8 (B)")
        if self.tm <= 0 or self.tm % self.brick_m:
            raise ConfigError(f"tm must be a multiple of {self.brick_m}, got {self.tm}")
        if self.tk <= 0 or self.tk % self.brick_k:
            raise ConfigError(f"tk must be a multiple of {self.brick_k}, got {self.tk}")
        if self.warp_coarsening < 1:
            raise ConfigError("warp_coarsening must be positive")

    @property
    def brick_rows(self):
        """Brick rows per block (``tm / brick_m``)."""
        return self.tm // self.brick_m

    @property
    def brick_cols(self):
        """Brick columns per block (``tk / brick_k``)."""
        return self.tk // self.brick_k


# ---------------------------------------------------------------------------
# bit-level helpers
# ---------------------------------------------------------------------------

def encode_brick_pattern(presence):
    """Pack a 16x4 occupancy mask into a 64-bit int, LSB = row-major element 0."""
    presence = np.asarray(presence, dtype=bool)
    if presence.shape != (BRICK_M, BRICK_K):
        raise ValueError(f"brick occupancy must be {BRICK_M}x{BRICK_K}")
    bits = np.packbits(presence.ravel(), bitorder="little")
    return int(bits.view("<u8")[0])


def decode_brick_pattern(pattern):
    bits = np.unpackbits(np.array([pattern], dtype="<u8").view(np.uint8), bitorder="little")
    return bits.astype(bool).reshape(BRICK_M, BRICK_K)


def prefix_index(pattern, position):
    """Number of set bits of ``pattern`` strictly below ``position``."""
    if not 0 <= position < BRICK_SIZE:
        raise ValueError("position must be in [0, 64)")
    return (int(pattern) & ((1 << position) - 1)).bit_count()


def popcount(patterns):
    return np.bitwise_count(np.asarray(patterns, dtype=np.uint64))


def compact_active_columns(csr, panel_index, config=HrpbConfig()):
    """Active columns of one row panel and their compacted positions."""
    num_panels = -(-csr.num_rows // config.tm)
    if not 0 <= panel_index < max(num_panels, 1):
        raise ValueError("panel_index out of range")
    lo = panel_index * config.tm
    hi = min(lo + config.tm, csr.num_rows)
    cols = csr.col_idx[csr.row_ptr[lo]:csr.row_ptr[hi]] if hi > lo else csr.col_idx[:0]
    active = np.unique(cols)
    col_rank = {int(c): i for i, c in enumerate(active)}
    return active, col_rank


# ---------------------------------------------------------------------------
# block layout
# ---------------------------------------------------------------------------

def _align8(x):
    return (x + 7) & ~7


def _block_offsets(tk, num_bricks, nnz_count):
    """Byte offsets (rows, patterns, nnz, end) inside one block; works on arrays."""
    rows_off = 8 + 4 * tk + 4 * (tk // BRICK_K + 1)
    pat_off = _align8(rows_off + 4 * num_bricks)
    nnz_off = pat_off + 8 * num_bricks
    end = _align8(nnz_off + 4 * nnz_count)
    return rows_off, pat_off, nnz_off, end


@dataclass(eq=False)
class Block:
    nnz_array: np.ndarray
    patterns: np.ndarray
    col_ptr: np.ndarray
    rows: np.ndarray
    active_cols: np.ndarray

    def __post_init__(self):
        self.nnz_array = np.asarray(self.nnz_array, dtype=np.float32)
        self.patterns = np.asarray(self.patterns, dtype=np.uint64)
        self.col_ptr = np.asarray(self.col_ptr, dtype=np.int64)
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.active_cols = np.asarray(self.active_cols, dtype=np.int64)

    @property
    def num_bricks(self):
        return int(self.patterns.size)

    @property
    def tk(self):
        return int(self.active_cols.size)

    def validate(self, config=HrpbConfig()):
        tk, nbc = config.tk, config.brick_cols
        if self.active_cols.shape != (tk,):
            raise IntegrityError(f"active_cols has length {self.active_cols.size}, expected {tk}")
        cp = self.col_ptr
        if cp.shape != (nbc + 1,):
            raise IntegrityError(f"col_ptr has length {cp.size}, expected {nbc + 1}")
        if cp[0] != 0 or np.any(np.diff(cp) < 0) or cp[-1] != self.num_bricks:
            raise IntegrityError("col_ptr must run from 0 to num_bricks, nondecreasing")
        if self.rows.size != self.num_bricks:
            raise IntegrityError("rows and patterns disagree on the number of bricks")
        if self.num_bricks:
            if np.any(self.rows < 0) or np.any(self.rows >= config.brick_rows):
                raise IntegrityError("brick row index out of range")
            if np.any(self.patterns == 0):
                raise IntegrityError("active brick with an empty pattern")
            brick_col = np.repeat(np.arange(nbc), np.diff(cp))
            same = brick_col[1:] == brick_col[:-1]
            if np.any(np.diff(self.rows)[same] <= 0):
                raise IntegrityError("brick rows not strictly increasing within a brick column")
        total = int(popcount(self.patterns).sum())
        if total != self.nnz_array.size:
            raise IntegrityError(
                f"patterns hold {total} nonzeros but nnz_array has {self.nnz_array.size}"
            )

    def to_bytes(self):
        tk = self.tk
        nb, nnz = self.num_bricks, int(self.nnz_array.size)
        rows_off, pat_off, nnz_off, end = _block_offsets(tk, nb, nnz)
        buf = np.zeros(end, dtype=np.uint8)
        head = np.concatenate([[nnz, nb], self.active_cols, self.col_ptr, self.rows])
        buf[:rows_off + 4 * nb] = head.astype("<u4").view(np.uint8)
        buf[pat_off:nnz_off] = self.patterns.astype("<u8").view(np.uint8)
        buf[nnz_off:nnz_off + 4 * nnz] = self.nnz_array.astype("<f4").view(np.uint8)
        return buf.tobytes()

    @classmethod
    def from_bytes(cls, data, tk):
        data = memoryview(data)
        if len(data) < 8:
            raise IntegrityError("block shorter than its header")
        nnz, nb = (int(x) for x in np.frombuffer(data, dtype="<u4", count=2))
        rows_off, pat_off, nnz_off, end = _block_offsets(tk, nb, nnz)
        if end != len(data):
            raise IntegrityError(
                f"block extent {len(data)} bytes does not match its metadata ({end} bytes)"
            )
        head = np.frombuffer(data, dtype="<u4", count=rows_off // 4 + nb).astype(np.int64)
        return cls(
            nnz_array=np.frombuffer(data, dtype="<f4", count=nnz, offset=nnz_off),
            patterns=np.frombuffer(data, dtype="<u8", count=nb, offset=pat_off),
            col_ptr=head[2 + tk:rows_off // 4],
            rows=head[rows_off // 4:],
            active_cols=head[2:2 + tk],
        )


# ---------------------------------------------------------------------------
# whole-matrix container
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Hrpb:
    num_rows: int
    num_cols: int
    config: HrpbConfig
    blocked_row_ptr: np.ndarray
    active_cols: np.ndarray
    panel_active_counts: np.ndarray
    size_ptr: np.ndarray
    packed_blocks: bytes = field(repr=False)

    @property
    def num_panels(self):
        return int(self.blocked_row_ptr.size - 1)

    @property
    def num_blocks(self):
        return int(self.blocked_row_ptr[-1])

    @property
    def shape(self):
        return (self.num_rows, self.num_cols)

    def blocks_per_panel(self):
        return np.diff(self.blocked_row_ptr)

    def block_bytes(self, block_id):
        lo, hi = int(self.size_ptr[block_id]), int(self.size_ptr[block_id + 1])
        return memoryview(self.packed_blocks)[lo:hi]

    def block(self, block_id):
        blk = Block.from_bytes(self.block_bytes(block_id), self.config.tk)
        blk.validate(self.config)
        return blk

    def bricks(self):
        """Vectorized decode of every block; validates all metadata."""
        return BrickTable.from_hrpb(self)

    @property
    def nnz(self):
        return self.bricks().nnz

    def __eq__(self, other):
        if not isinstance(other, Hrpb):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.config == other.config
            and np.array_equal(self.blocked_row_ptr, other.blocked_row_ptr)
            and np.array_equal(self.active_cols, other.active_cols)
            and np.array_equal(self.panel_active_counts, other.panel_active_counts)
            and np.array_equal(self.size_ptr, other.size_ptr)
            and bytes(self.packed_blocks) == bytes(other.packed_blocks)
        )

    @classmethod
    def from_blocks(cls, num_rows, num_cols, config, panels):
        """Assemble an Hrpb from per-panel lists of :class:`Block`.

        No validation is done here beyond what packing needs, so corrupt
        blocks can be built on purpose; decoding is where integrity is checked.
        """
        num_panels = -(-num_rows // config.tm)
        if len(panels) != num_panels:
            raise ValueError(f"expected {num_panels} panels, got {len(panels)}")
        counts, actives, chunks = [], [], []
        for blocks in panels:
            ac = np.concatenate([b.active_cols for b in blocks]) if blocks else np.zeros(0, np.int64)
            ac = ac[ac != num_cols]
            counts.append(ac.size)
            actives.append(ac)
            chunks.extend(b.to_bytes() for b in blocks)
        sizes = [len(c) for c in chunks]
        return cls(
            num_rows,
            num_cols,
            config,
            np.concatenate([[0], np.cumsum([len(b) for b in panels], dtype=np.int64)]).astype(np.int64),
            np.concatenate(actives).astype(np.int64) if actives else np.zeros(0, np.int64),
            np.asarray(counts, dtype=np.int64),
            np.concatenate([[0], np.cumsum(sizes, dtype=np.int64)]).astype(np.int64),
            b"".join(chunks),
        )


@dataclass(frozen=True)
class BrickTable:
    """Flat view over all active bricks of an Hrpb.

    Per block: ``nnz_count``, ``num_bricks``, ``active_cols`` (num_blocks x tk),
    ``col_ptr`` (num_blocks x tk/brick_k+1), ``panel``.
    Per brick: ``block``, ``brick_col``, ``brick_row``, ``pattern``,
    ``value_start`` (index into ``values``).
    """

    config: HrpbConfig
    nnz_count: np.ndarray
    num_bricks: np.ndarray
    active_cols: np.ndarray
    col_ptr: np.ndarray
    panel: np.ndarray
    block: np.ndarray
    brick_col: np.ndarray
    brick_row: np.ndarray
    pattern: np.ndarray
    value_start: np.ndarray
    values: np.ndarray

    @property
    def nnz(self):
        return int(self.values.size)

    @property
    def total_bricks(self):
        return int(self.pattern.size)

    def active_brick_columns(self):
        """Number of (block, brick column) pairs holding at least one brick."""
        return int(np.count_nonzero(np.diff(self.col_ptr, axis=1)))

    @classmethod
    def from_hrpb(cls, h):
        cfg = h.config
        tk, nbc = cfg.tk, cfg.brick_cols
        nblk = h.num_blocks
        brp = np.asarray(h.blocked_row_ptr, dtype=np.int64)
        sp = np.asarray(h.size_ptr, dtype=np.int64)
        buf = np.frombuffer(h.packed_blocks, dtype=np.uint8)

        expected_panels = -(-h.num_rows // cfg.tm)
        if brp.size != expected_panels + 1 or brp[0] != 0 or np.any(np.diff(brp) < 0):
            raise IntegrityError("blocked_row_ptr malformed")
        if sp.size != nblk + 1 or sp[0] != 0 or sp[-1] != buf.size:
            raise IntegrityError("size_ptr does not cover packed_blocks")
        extent = np.diff(sp)
        min_block = _block_offsets(tk, 0, 0)[3]
        if np.any(extent < min_block) or np.any(sp % 8):
            raise IntegrityError("size_ptr has a block extent that cannot hold a block header")

        u32 = buf.view("<u4")
        base = sp[:-1]
        nnz_count = u32[base // 4].astype(np.int64)
        num_bricks = u32[base // 4 + 1].astype(np.int64)
        _, pat_off, nnz_off, end = _block_offsets(tk, num_bricks, nnz_count)
        if not np.array_equal(end, extent):
            bad = int(np.flatnonzero(end != extent)[0])
            raise IntegrityError(
                f"block {bad}: extent {int(extent[bad])} bytes does not match its metadata ({int(end[bad])} bytes)"
            )

        active_cols = u32[(base // 4 + 2)[:, None] + np.arange(tk)].astype(np.int64)
        col_ptr = u32[(base // 4 + 2 + tk)[:, None] + np.arange(nbc + 1)].astype(np.int64)
        if nblk:
            if np.any(col_ptr[:, 0] != 0) or np.any(np.diff(col_ptr, axis=1) < 0):
                raise IntegrityError("col_ptr not nondecreasing from 0")
            if not np.array_equal(col_ptr[:, -1], num_bricks):
                raise IntegrityError("col_ptr end disagrees with the block's brick count")

        total = int(num_bricks.sum())
        first_brick = np.zeros(nblk + 1, dtype=np.int64)
        np.cumsum(num_bricks, out=first_brick[1:])
        block_of = np.repeat(np.arange(nblk, dtype=np.int64), num_bricks)
        bidx = np.arange(total, dtype=np.int64) - first_brick[block_of]
        rows_word = (base + 8 + 4 * tk + 4 * (nbc + 1)) // 4
        brick_row = u32[rows_word[block_of] + bidx].astype(np.int64)
        pattern = buf.view("<u8")[((base + pat_off) // 8)[block_of] + bidx].astype(np.uint64)
        counts = np.diff(col_ptr, axis=1).ravel()
        brick_col = np.repeat(np.tile(np.arange(nbc, dtype=np.int64), nblk), counts)

        if total:
            if np.any(pattern == 0):
                raise IntegrityError("active brick with an empty pattern")
            if np.any(brick_row >= cfg.brick_rows):
                raise IntegrityError("brick row index out of range")
            same = (block_of[1:] == block_of[:-1]) & (brick_col[1:] == brick_col[:-1])
            if np.any(np.diff(brick_row)[same] <= 0):
                raise IntegrityError("brick rows not strictly increasing within a brick column")
        pc = popcount(pattern).astype(np.int64)
        per_block = np.bincount(block_of, weights=pc, minlength=nblk).astype(np.int64)
        if not np.array_equal(per_block, nnz_count):
            bad = int(np.flatnonzero(per_block != nnz_count)[0])
            raise IntegrityError(
                f"block {bad}: patterns hold {int(per_block[bad])} nonzeros but nnz_array has {int(nnz_count[bad])}"
            )

        # popcounts match nnz_count per block, so the blocks' value arrays
        # concatenate into one array indexed by the global popcount prefix
        value_start = np.cumsum(pc) - pc
        first_nnz = np.zeros(nblk + 1, dtype=np.int64)
        np.cumsum(nnz_count, out=first_nnz[1:])

        vblock = np.repeat(np.arange(nblk, dtype=np.int64), nnz_count)
        vidx = np.arange(int(nnz_count.sum()), dtype=np.int64) - first_nnz[vblock]
        values = buf.view("<f4")[((base + nnz_off) // 4)[vblock] + vidx].astype(np.float32)

        panel = np.repeat(np.arange(brp.size - 1, dtype=np.int64), np.diff(brp))
        return cls(cfg, nnz_count, num_bricks, active_cols, col_ptr, panel, block_of,
                   brick_col, brick_row, pattern, value_start, values)


# ---------------------------------------------------------------------------
# conversion
# ---------------------------------------------------------------------------

def _convert_rows(csr, row_lo, row_hi, cfg):
    """Convert rows [row_lo, row_hi) (panel aligned) into block-local pieces.

    Returns (blocks_per_panel, panel_active_counts, active_cols, block sizes,
    packed bytes). Block bytes carry no absolute addresses, so chunks can be
    concatenated and the pointer arrays joined by prefix sums.
    """
    tm, tk, nbc, nbr = cfg.tm, cfg.tk, cfg.brick_cols, cfg.brick_rows
    K = csr.num_cols
    num_panels = -(-(row_hi - row_lo) // tm)
    lo, hi = int(csr.row_ptr[row_lo]), int(csr.row_ptr[row_hi])
    rows = np.repeat(np.arange(row_hi - row_lo, dtype=np.int64),
                     np.diff(csr.row_ptr[row_lo:row_hi + 1]))
    cols = csr.col_idx[lo:hi]
    vals = csr.values[lo:hi]

    # phase 1: active columns and block counts per panel
    panel = rows // tm
    uniq, inverse = np.unique(panel * K + cols, return_inverse=True)
    u_panel, u_col = np.divmod(uniq, K) if K else (uniq, uniq)
    active_counts = np.bincount(u_panel, minlength=num_panels).astype(np.int64)
    first = np.zeros(num_panels + 1, dtype=np.int64)
    np.cumsum(active_counts, out=first[1:])
    rank = np.arange(uniq.size, dtype=np.int64) - first[u_panel]
    blocks_per_panel = -(-active_counts // tk)
    brp = np.zeros(num_panels + 1, dtype=np.int64)
    np.cumsum(blocks_per_panel, out=brp[1:])
    nblk = int(brp[-1])
    u_block = brp[u_panel] + rank // tk
    padded = np.full((nblk, tk), K, dtype=np.int64)
    padded[u_block, rank % tk] = u_col

    # phase 2: bricks in brick-CSC order, values row-major inside each brick
    gblock = u_block[inverse]
    lcol = rank[inverse] % tk
    lrow = rows % tm
    bkey = (gblock * nbc + lcol // BRICK_K) * nbr + lrow // BRICK_M
    bit = (lrow % BRICK_M) * BRICK_K + lcol % BRICK_K
    order = np.argsort(bkey * BRICK_SIZE + bit)
    s_key, s_bit, s_val = bkey[order], bit[order], vals[order]
    n = s_key.size
    starts = np.flatnonzero(np.r_[True, s_key[1:] != s_key[:-1]]) if n else np.zeros(0, np.int64)
    patterns = (np.bitwise_or.reduceat(_U64_ONE << s_bit.astype(np.uint64), starts)
                if n else np.zeros(0, np.uint64))
    b_key = s_key[starts]
    b_block = b_key // (nbc * nbr)
    b_bcol = (b_key // nbr) % nbc
    b_brow = b_key % nbr
    nb = np.bincount(b_block, minlength=nblk).astype(np.int64)
    nnzc = np.bincount(gblock, minlength=nblk).astype(np.int64)
    col_ptr = np.zeros((nblk, nbc + 1), dtype=np.int64)
    np.cumsum(np.bincount(b_block * nbc + b_bcol, minlength=nblk * nbc).reshape(nblk, nbc),
              axis=1, out=col_ptr[:, 1:])

    rows_off, pat_off, nnz_off, end = _block_offsets(tk, nb, nnzc)
    size_ptr = np.zeros(nblk + 1, dtype=np.int64)
    np.cumsum(end, out=size_ptr[1:])
    buf = np.zeros(int(size_ptr[-1]), dtype=np.uint8)
    u32, u64, f32 = buf.view("<u4"), buf.view("<u8"), buf.view("<f4")
    base = size_ptr[:-1]
    w = base // 4
    u32[w] = nnzc
    u32[w + 1] = nb
    u32[(w + 2)[:, None] + np.arange(tk)] = padded
    u32[(w + 2 + tk)[:, None] + np.arange(nbc + 1)] = col_ptr
    first_brick = np.zeros(nblk + 1, dtype=np.int64)
    np.cumsum(nb, out=first_brick[1:])
    bidx = np.arange(b_key.size, dtype=np.int64) - first_brick[b_block]
    u32[((base + rows_off) // 4)[b_block] + bidx] = b_brow
    u64[((base + pat_off) // 8)[b_block] + bidx] = patterns
    first_nnz = np.zeros(nblk + 1, dtype=np.int64)
    np.cumsum(nnzc, out=first_nnz[1:])
    s_block = gblock[order]
    f32[((base + nnz_off) // 4)[s_block] + np.arange(n) - first_nnz[s_block]] = s_val

    return blocks_per_panel, active_counts, u_col.astype(np.int64), end, buf.tobytes()


def csr_to_hrpb(csr, config=HrpbConfig(), *, jobs=1):
    """Convert a CSR matrix into HRPB.

    With ``jobs > 1`` the row panels are split into contiguous chunks that are
    converted concurrently and joined by prefix sums; the result is
    byte-identical to the serial conversion.
    """
    if not isinstance(config, HrpbConfig):
        raise ConfigError("config must be an HrpbConfig")
    M = csr.num_rows
    num_panels = -(-M // config.tm)
    jobs = max(1, min(int(jobs), num_panels or 1))
    cuts = np.linspace(0, num_panels, jobs + 1).astype(np.int64) * config.tm
    cuts = np.minimum(cuts, M)
    spans = [(int(a), int(b)) for a, b in zip(cuts[:-1], cuts[1:])]
    if jobs == 1:
        parts = [_convert_rows(csr, a, b, config) for a, b in spans]
    else:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda s: _convert_rows(csr, s[0], s[1], config), spans))

    blocks_per_panel = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    brp = np.zeros(num_panels + 1, dtype=np.int64)
    np.cumsum(blocks_per_panel, out=brp[1:])
    sizes = np.concatenate([p[3] for p in parts]) if parts else np.zeros(0, np.int64)
    size_ptr = np.zeros(sizes.size + 1, dtype=np.int64)
    np.cumsum(sizes, out=size_ptr[1:])
    return Hrpb(
        num_rows=M,
        num_cols=csr.num_cols,
        config=config,
        blocked_row_ptr=brp,
        active_cols=np.concatenate([p[2] for p in parts]) if parts else np.zeros(0, np.int64),
        panel_active_counts=np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64),
        size_ptr=size_ptr,
        packed_blocks=b"".join(p[4] for p in parts),
    )


def hrpb_to_csr(h):
    """Reconstruct the source CSR; raises :class:`IntegrityError` on corrupt metadata."""
    t = h.bricks()
    cfg = h.config
    bits = np.unpackbits(t.pattern.astype("<u8").view(np.uint8).reshape(-1, 8),
                         axis=1, bitorder="little")
    brick, bit = np.nonzero(bits)
    blk = t.block[brick]
    rows = t.panel[blk] * cfg.tm + t.brick_row[brick] * BRICK_M + bit // BRICK_K
    cols = t.active_cols[blk, t.brick_col[brick] * BRICK_K + bit % BRICK_K]
    if rows.size:
        if np.any(cols >= h.num_cols):
            raise IntegrityError("pattern bit set on a padded (sentinel) column")
        if np.any(rows >= h.num_rows):
            raise IntegrityError("pattern bit set beyond the last matrix row")
    key = rows * max(h.num_cols, 1) + cols
    if np.unique(key).size != key.size:
        raise IntegrityError("two stored entries map to the same coordinate")
    return coo_to_csr(CooMatrix(h.num_rows, h.num_cols, rows, cols, t.values))
