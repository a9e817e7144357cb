import io
import struct
import zlib

import numpy as np
import pytest

from hrpb.binary import (
    MAGIC,
    BadMagicError,
    ChecksumError,
    TruncatedError,
    VersionMismatchError,
    deserialize_hrpb,
    load_hrpb,
    save_hrpb,
    serialize_hrpb,
)
from hrpb.core import HrpbConfig, IntegrityError, csr_to_hrpb, hrpb_to_csr
from hrpb.sparse_io import CsrMatrix, generate_synthetic


@pytest.fixture
def h():
    return csr_to_hrpb(generate_synthetic("random-uniform", 70, 90, 0.06, seed=4), HrpbConfig(tm=32, tk=8))


def test_round_trip(h):
    data = serialize_hrpb(h)
    back = deserialize_hrpb(data)
    assert back == h
    assert serialize_hrpb(back) == data


def test_round_trip_through_file(h, tmp_path):
    path = tmp_path / "m.hrpb"
    save_hrpb(h, path)
    assert load_hrpb(path) == h
    buf = io.BytesIO()
    serialize_hrpb(h, buf)
    assert deserialize_hrpb(io.BytesIO(buf.getvalue())) == h


def test_empty_and_ragged_round_trip():
    for csr in (CsrMatrix.empty(33, 5), CsrMatrix.identity(17)):
        h = csr_to_hrpb(csr)
        assert hrpb_to_csr(deserialize_hrpb(serialize_hrpb(h))) == csr


def test_header_layout(h):
    data = serialize_hrpb(h)
    assert data[:8] == b"HRPB1\x00\x00\x00"
    version, M, K, tm, tk, nblk, plen = struct.unpack_from("<IIIIIQQ", data, 8)
    assert (version, M, K, tm, tk, nblk, plen) == (1, 70, 90, 32, 8, h.num_blocks, len(h.packed_blocks))
    (crc,) = struct.unpack("<I", data[-4:])
    assert crc == zlib.crc32(data[8:-4])
    header = 8 + 36
    brp = np.frombuffer(data, "<u8", count=h.num_panels + 1, offset=header)
    np.testing.assert_array_equal(brp, h.blocked_row_ptr)


def test_bad_magic(h):
    data = serialize_hrpb(h)
    with pytest.raises(BadMagicError):
        deserialize_hrpb(b"XXXX" + data[4:])


def test_version_mismatch(h):
    data = bytearray(serialize_hrpb(h))
    data[8:12] = struct.pack("<I", 2)
    with pytest.raises(VersionMismatchError):
        deserialize_hrpb(bytes(data))


def test_truncated_packed_region(h):
    data = serialize_hrpb(h)
    with pytest.raises(TruncatedError):
        deserialize_hrpb(data[:-40])
    with pytest.raises(TruncatedError):
        deserialize_hrpb(data[:20])
    with pytest.raises(TruncatedError):
        deserialize_hrpb(MAGIC[:3])


def test_checksum_failure(h):
    data = bytearray(serialize_hrpb(h))
    data[len(data) // 2] ^= 0x10
    with pytest.raises(ChecksumError):
        deserialize_hrpb(bytes(data))


def test_block_corruption_behind_valid_crc(h):
    data = bytearray(serialize_hrpb(h))
    packed_start = len(data) - 4 - len(h.packed_blocks)
    # first block header: bump nnz_count so it disagrees with the patterns
    nnz = struct.unpack_from("<I", data, packed_start)[0]
    struct.pack_into("<I", data, packed_start, nnz + 1)
    data[-4:] = struct.pack("<I", zlib.crc32(bytes(data[8:-4])))
    with pytest.raises(IntegrityError):
        deserialize_hrpb(bytes(data))
