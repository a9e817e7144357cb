"""On-disk HRPB container.

All integers little-endian::

    magic            8 bytes  b"HRPB1\\0\\0\\0"
    version          u32      1
    M, K, tm, tk     u32 x 4
    num_blocks       u64
    packed_len       u64
    blocked_row_ptr  u64[num_panels + 1]
    active counts    u32[num_panels]
    size_ptr         u64[num_blocks + 1]
    packed_blocks    packed_len bytes
    crc32            u32 over everything after the magic
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from .core import Hrpb, HrpbConfig, IntegrityError

__all__ = [
    "MAGIC",
    "VERSION",
    "HrpbFormatError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedError",
    "ChecksumError",
    "serialize_hrpb",
    "deserialize_hrpb",
    "save_hrpb",
    "load_hrpb",
    "is_hrpb_file",
]

MAGIC = b"HRPB1\x00\x00\x00"
VERSION = 1
_HEADER = struct.Struct("<IIIIIQQ")


class HrpbFormatError(ValueError):
    pass


class BadMagicError(HrpbFormatError):
    pass


class VersionMismatchError(HrpbFormatError):
    pass


class TruncatedError(HrpbFormatError):
    pass


class ChecksumError(HrpbFormatError):
    pass


def serialize_hrpb(h, sink=None):
    """Encode ``h``; returns bytes, or writes them to the binary file ``sink``."""
    cfg = h.config
    body = b"".join([
        _HEADER.pack(VERSION, h.num_rows, h.num_cols, cfg.tm, cfg.tk,
                     h.num_blocks, len(h.packed_blocks)),
        np.asarray(h.blocked_row_ptr).astype("<u8").tobytes(),
        np.asarray(h.panel_active_counts).astype("<u4").tobytes(),
        np.asarray(h.size_ptr).astype("<u8").tobytes(),
        bytes(h.packed_blocks),
    ])
    data = MAGIC + body + struct.pack("<I", zlib.crc32(body))
    if sink is None:
        return data
    sink.write(data)
    return None


def deserialize_hrpb(source):
    """Decode an HRPB stream (bytes or binary file object)."""
    data = source if isinstance(source, (bytes, bytearray, memoryview)) else source.read()
    data = bytes(data)
    if len(data) < len(MAGIC):
        raise TruncatedError("stream shorter than the magic")
    if data[:len(MAGIC)] != MAGIC:
        raise BadMagicError(f"bad magic {data[:len(MAGIC)]!r}")
    pos = len(MAGIC)
    if len(data) < pos + _HEADER.size:
        raise TruncatedError("stream shorter than the header")
    version, M, K, tm, tk, num_blocks, packed_len = _HEADER.unpack_from(data, pos)
    if version != VERSION:
        raise VersionMismatchError(f"unsupported version {version}, expected {VERSION}")
    pos += _HEADER.size
    try:
        config = HrpbConfig(tm=tm, tk=tk)
    except ValueError as exc:
        raise HrpbFormatError(f"invalid tiling in header: {exc}") from None
    num_panels = -(-M // tm)

    need = 8 * (num_panels + 1) + 4 * num_panels + 8 * (num_blocks + 1) + packed_len + 4
    if len(data) < pos + need:
        raise TruncatedError(f"stream truncated: need {pos + need} bytes, have {len(data)}")
    if len(data) > pos + need:
        raise HrpbFormatError("trailing bytes after checksum")
    body = data[len(MAGIC):pos + need - 4]
    (crc,) = struct.unpack_from("<I", data, pos + need - 4)
    if zlib.crc32(body) != crc:
        raise ChecksumError("CRC-32 mismatch")

    def take(dtype, count):
        nonlocal pos
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.int64)
        pos += count * np.dtype(dtype).itemsize
        return arr

    brp = take("<u8", num_panels + 1)
    counts = take("<u4", num_panels)
    size_ptr = take("<u8", num_blocks + 1)
    packed = data[pos:pos + packed_len]

    if brp.size and brp[-1] != num_blocks:
        raise IntegrityError("blocked_row_ptr does not end at num_blocks")
    active_cols = _active_cols_from_blocks(packed, size_ptr, brp, counts, tk)
    h = Hrpb(M, K, config, brp, active_cols, counts, size_ptr, packed)
    h.bricks()  # full per-block validation; raises IntegrityError
    return h


def _active_cols_from_blocks(packed, size_ptr, brp, counts, tk):
    if size_ptr.size < 2:
        return np.zeros(0, dtype=np.int64)
    if size_ptr[-1] != len(packed) or np.any(size_ptr[:-1] % 8) or np.any(np.diff(size_ptr) < 8 + 4 * tk):
        raise IntegrityError("size_ptr inconsistent with packed_blocks")
    u32 = np.frombuffer(packed, dtype="<u4")
    padded = u32[(size_ptr[:-1] // 4 + 2)[:, None] + np.arange(tk)].astype(np.int64)
    blocks = np.diff(brp)
    if np.any(counts > blocks * tk) or np.any(counts <= (blocks - 1) * tk):
        raise IntegrityError("panel active-column counts disagree with block counts")
    slot_panel = np.repeat(np.arange(blocks.size), blocks * tk)
    slot_start = np.repeat(brp[:-1] * tk, blocks * tk)
    keep = np.arange(slot_panel.size) - slot_start < counts[slot_panel]
    return padded.ravel()[keep]


def save_hrpb(h, path):
    with open(os.fspath(path), "wb") as fh:
        serialize_hrpb(h, fh)


def load_hrpb(path):
    with open(os.fspath(path), "rb") as fh:
        return deserialize_hrpb(fh)


def is_hrpb_file(path):
    with open(os.fspath(path), "rb") as fh:
        return fh.read(len(MAGIC)) == MAGIC
